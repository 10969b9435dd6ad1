#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "walkeval/gateway.hpp"
#include "walkeval/prompt.hpp"
#include "walkeval/registry.hpp"

namespace walkeval {

struct CampaignImage {
  std::string id;
  std::filesystem::path path;
  std::string street;
};

struct CampaignOptions {
  std::vector<ExpertiseLevel> levels{std::begin(kAllLevels), std::end(kAllLevels)};
  std::vector<std::string> criteria{"Safety", "Attractiveness"};
  int replicates = 1;
  /// One request per criterion instead of one request covering all.
  bool per_criterion = false;
  /// Finish a level for every image before starting the next level.
  bool strict_global_order = false;
  int workers = 1;
};

enum class EntryStatus { cached, fetched, failed };

std::string_view to_string(EntryStatus status);

struct LedgerEntry {
  std::string key_digest;
  RequestKey key;
  std::string image_id;
  std::vector<std::string> criteria;
  EntryStatus status = EntryStatus::failed;
  std::int64_t received_at_us = 0;
  std::string backend;
  int attempt_count = 0;
  std::string response_digest;
  std::string error_kind;
  std::string error;
};

struct CampaignLedger {
  /// Plan order: image, level, criteria group, replicate.
  std::vector<LedgerEntry> entries;

  std::size_t count(EntryStatus status) const;
};

/// Bundles sent per image at `level`: one covering every criterion, or one
/// per criterion.
std::vector<PromptBundle> campaign_bundles(const MetricRegistry& registry, ExpertiseLevel level,
                                           const CampaignOptions& options);

struct PlannedRequest {
  std::size_t image_index = 0;
  std::size_t bundle_index = 0;
  RequestKey key;
};

/// Every request of the campaign in plan order, paired with its bundle.
struct CampaignPlan {
  std::vector<PromptBundle> bundles;
  std::vector<PlannedRequest> requests;
};

/// Reads each image to compute its digest. Throws EmptyCampaign,
/// OrderingViolation, IoError.
CampaignPlan plan_campaign(std::span<const CampaignImage> images, const MetricRegistry& registry,
                           const CampaignOptions& options);

/// Validator for one planned request.
using BundleValidator = std::function<void(const RawResponse&, const PromptBundle&, const CampaignImage&)>;

/// Runs (or resumes) a campaign. Per image, every level-L request completes
/// before any level-(L+1) request is issued; a failure at one level skips
/// that image's higher levels so a later run keeps the order. Each entry is
/// appended to `ledger_file` as one JSON line.
CampaignLedger run_campaign(std::span<const CampaignImage> images, const MetricRegistry& registry,
                            const CampaignOptions& options, Gateway& gateway,
                            const std::filesystem::path& ledger_file, const BundleValidator& validate = {});

std::string ledger_entry_json(const LedgerEntry& entry);
LedgerEntry ledger_entry_from_json(std::string_view line);

/// All entries of a ledger file in file order. Throws IoError / ParseError.
std::vector<LedgerEntry> read_ledger(const std::filesystem::path& ledger_file);

/// Violations of the per-image level order among received entries; empty
/// when `max(received_at | image, L) <= min(received_at | image, L+1)` holds.
std::vector<std::string> verify_level_ordering(std::span<const LedgerEntry> entries);

/// Entries whose cached text no longer matches the recorded digest.
std::vector<std::string> verify_cache(std::span<const LedgerEntry> entries, const ResponseCache& cache);

}  // namespace walkeval
