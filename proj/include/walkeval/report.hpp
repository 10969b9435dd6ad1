#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "walkeval/parser.hpp"
#include "walkeval/registry.hpp"
#include "walkeval/stats.hpp"

namespace walkeval {

/// image id -> street label.
using StreetAssignment = std::map<std::string, std::string>;

/// Per-image score of one (level, criterion) cell. Replicates of the same
/// image are averaged, so each image contributes one observation.
struct ImageScore {
  std::string image_id;
  double score = 0.0;
};

/// Images in id order.
std::vector<ImageScore> image_scores(std::span<const EvaluationRecord> records, ExpertiseLevel level,
                                     std::string_view criterion);

/// Criteria appearing in `records`, in registry order first and then by name.
std::vector<std::string> criteria_present(std::span<const EvaluationRecord> records,
                                          const MetricRegistry& registry);

/// Levels appearing in `records`, ascending.
std::vector<ExpertiseLevel> levels_present(std::span<const EvaluationRecord> records);

struct StreetAverage {
  std::string street;
  ExpertiseLevel level = ExpertiseLevel::c1;
  std::string criterion;
  std::size_t images = 0;
  double mean = 0.0;
};

/// Mean criterion aggregate per (street, level, criterion), ordered by
/// street, level, then criterion name. Throws EmptyInput, UnassignedImage.
std::vector<StreetAverage> street_averages(std::span<const EvaluationRecord> records,
                                           const StreetAssignment& assignment);

enum class ExtremeKind { max, min };

struct Extreme {
  ExpertiseLevel level = ExpertiseLevel::c1;
  std::string criterion;
  ExtremeKind kind = ExtremeKind::max;
  std::string image_id;
  double score = 0.0;
  /// Another image shares the extreme score; the smallest id was chosen.
  bool tie = false;
};

/// Highest and lowest scoring image per requested (level, criterion) cell.
/// Throws EmptyCell.
std::vector<Extreme> extremes(std::span<const EvaluationRecord> records, std::span<const ExpertiseLevel> levels,
                              std::span<const std::string> criteria);

/// Every cell present in `records`, criteria in name order.
std::vector<Extreme> extremes(std::span<const EvaluationRecord> records);

struct ModelComparison {
  std::string criterion;
  /// "Model-C<n>" per level present, ascending.
  std::vector<std::string> groups;
  stats::TestResult levene;
  stats::TestResult overall;
  std::vector<stats::PairwiseResult> pairs;
};

struct ComparisonOptions {
  stats::LeveneCenter levene_center = stats::LeveneCenter::mean;
  double alpha = 0.05;
};

/// Levene, Welch ANOVA and Games-Howell over the per-level aggregate
/// scores. Throws TooSmall (fewer than two levels) and stats errors.
ModelComparison model_comparison(std::span<const EvaluationRecord> records, std::string_view criterion,
                                 const ComparisonOptions& options = {});

/// "<0.01***", "0.03**", "0.07*" or plain two decimals.
std::string format_p(double p);

struct MetricDivergence {
  std::string metric;  // quantified name
  std::string vague_name;
  stats::TestResult test;
  /// Observations at levels 2, 3, 4.
  std::array<std::size_t, 3> sizes{};
};

struct DivergenceRanking {
  std::string criterion;
  std::vector<MetricDivergence> rows;
  std::vector<std::string> warnings;
};

/// Kruskal-Wallis across levels 2-4 per metric, vague and quantified names
/// joined through the registry. Sorted by statistic descending, then name.
/// Throws DomainError (top_n < 1), TooSmall (a level missing).
DivergenceRanking metric_divergence(std::span<const EvaluationRecord> records, const MetricRegistry& registry,
                                    std::string_view criterion, std::size_t top_n);

struct DistributionSummary {
  ExpertiseLevel level = ExpertiseLevel::c1;
  std::string criterion;
  std::size_t n = 0;
  double mean = 0.0;
  /// Undefined below two observations.
  std::optional<double> sd;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  /// t-based 95% interval of the mean; undefined below two observations.
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  /// Per-image scores, id order, kept for plotting.
  std::vector<double> values;
};

/// One summary per (level, criterion) cell present, level-major.
std::vector<DistributionSummary> distribution_summary(std::span<const EvaluationRecord> records,
                                                      const MetricRegistry& registry);

struct InterventionItem {
  std::string street;
  std::string criterion;
  std::string metric;
  ExpertiseLevel level = ExpertiseLevel::c4;
  std::size_t images = 0;
  double mean = 0.0;
};

struct InterventionView {
  double threshold = 3.0;
  std::vector<InterventionItem> items;
  std::vector<std::string> warnings;
};

/// Actionable metrics whose per-street mean at `level` (default: level 4,
/// else the highest level with metric scores) is below `threshold`.
/// Throws DomainError (threshold outside 1..5), UnassignedImage.
InterventionView intervention_view(std::span<const EvaluationRecord> records, const StreetAssignment& assignment,
                                   const MetricRegistry& registry, double threshold = 3.0,
                                   std::optional<ExpertiseLevel> level = std::nullopt);

struct ReportOptions {
  ComparisonOptions comparison;
  double threshold = 3.0;
  std::size_t top_n = 6;
  std::optional<ExpertiseLevel> intervention_level;
};

struct ReportBundle {
  std::vector<std::string> criteria;
  std::vector<StreetAverage> street_averages;
  std::vector<Extreme> extremes;
  std::vector<ModelComparison> model_comparison;
  std::vector<DivergenceRanking> metric_divergence;
  std::vector<DistributionSummary> distribution_summary;
  InterventionView intervention_view;
  /// Sections that could not be computed, with the reason.
  std::vector<std::string> warnings;
};

/// Every report section. Statistical sections that cannot be computed for a
/// criterion (too few levels, zero variance) are left out with a warning.
/// Throws EmptyInput, UnassignedImage.
ReportBundle build_report(std::span<const EvaluationRecord> records, const StreetAssignment& assignment,
                          const MetricRegistry& registry, const ReportOptions& options = {});

std::string_view to_string(ExtremeKind kind);

}  // namespace walkeval
