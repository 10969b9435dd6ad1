#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "walkeval/report.hpp"

namespace walkeval {

/// CSV text of each report section. Empty sections render as a header row.
std::string street_averages_csv(const ReportBundle& bundle);
std::string extremes_csv(const ReportBundle& bundle);
std::string model_comparison_csv(const ReportBundle& bundle);
std::string metric_divergence_csv(const ReportBundle& bundle);
std::string distribution_summary_csv(const ReportBundle& bundle);
std::string intervention_view_csv(const ReportBundle& bundle);

/// Box plots and kernel density curves of every level for one criterion.
std::string distribution_svg(const ReportBundle& bundle, const std::string& criterion);

/// Writes the six CSV tables and one distribution_<criterion>.svg per
/// criterion into `dir` (created if needed). Returns the written paths in
/// write order. Throws IoError.
std::vector<std::filesystem::path> export_report(const ReportBundle& bundle, const std::filesystem::path& dir);

}  // namespace walkeval
