#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "walkeval/campaign.hpp"
#include "walkeval/export.hpp"
#include "walkeval/manifest.hpp"
#include "walkeval/parser.hpp"

namespace walkeval {

/// Parsed record of every planned request whose response is cached, in plan
/// order. Responses that no longer parse are skipped with a warning.
std::vector<EvaluationRecord> collect_records(std::span<const CampaignImage> images, const MetricRegistry& registry,
                                              const CampaignOptions& options, const ResponseCache& cache,
                                              std::vector<std::string>* warnings = nullptr);

struct RunResult {
  CampaignLedger ledger;
  std::vector<EvaluationRecord> records;
  std::size_t backend_requests = 0;
  std::vector<std::string> warnings;
};

/// Runs or resumes the manifest's campaign against `backend`, then writes
/// records.jsonl. Responses that fail to parse are re-asked.
RunResult run_manifest(const CampaignManifest& manifest, const MetricRegistry& registry, Backend& backend);

/// Builds the report from `records` and writes it to `out_dir`.
ReportBundle analyze_records(std::span<const EvaluationRecord> records, const StreetAssignment& streets,
                             const MetricRegistry& registry, const ReportOptions& options,
                             const std::filesystem::path& out_dir);

}  // namespace walkeval
