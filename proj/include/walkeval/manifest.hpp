#pragma once

#include <filesystem>
#include <optional>
#include <string_view>

#include "walkeval/campaign.hpp"
#include "walkeval/gateway.hpp"
#include "walkeval/report.hpp"

namespace walkeval {

/// One campaign: images with street labels, levels, replicates, criteria,
/// backend and output directory. Relative paths are resolved against the
/// manifest's directory.
struct CampaignManifest {
  std::vector<CampaignImage> images;
  CampaignOptions options;
  BackendConfig backend;
  std::filesystem::path output_dir;
  /// Registry document; the shipped default when absent.
  std::optional<std::filesystem::path> registry;

  std::filesystem::path cache_dir() const { return output_dir / "cache"; }
  std::filesystem::path ledger_path() const { return output_dir / "ledger.jsonl"; }
  std::filesystem::path records_path() const { return output_dir / "records.jsonl"; }
  std::filesystem::path report_dir() const { return output_dir / "report"; }

  StreetAssignment streets() const;
};

/// Throws ParseError, ValidationError.
CampaignManifest parse_manifest(std::string_view document, const std::filesystem::path& base_dir);

/// Throws IoError, ParseError, ValidationError.
CampaignManifest load_manifest(const std::filesystem::path& path);

}  // namespace walkeval
