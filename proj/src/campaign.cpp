#include "walkeval/campaign.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"
#include "walkeval/hashing.hpp"

namespace walkeval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_image(const CampaignImage& image) {
  std::ifstream in(image.path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read image '{}' at '{}'", image.id, image.path.string()));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string bytes = buffer.str();
  if (bytes.empty()) throw ValidationError(fmt::format("image '{}' is empty", image.id));
  return bytes;
}

void check_levels(const std::vector<ExpertiseLevel>& levels) {
  if (levels.empty()) throw ValidationError("campaign needs at least one level");
  for (std::size_t i = 1; i < levels.size(); ++i) {
    if (to_int(levels[i]) <= to_int(levels[i - 1])) {
      throw OrderingViolation(fmt::format("levels must be strictly ascending; level {} follows level {}",
                                          to_int(levels[i]), to_int(levels[i - 1])));
    }
  }
}

class LedgerWriter {
 public:
  explicit LedgerWriter(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::app);
    if (!out_) throw IoError(fmt::format("cannot open ledger '{}'", path.string()));
  }

  void append(const LedgerEntry& entry) {
    std::lock_guard lock(mutex_);
    out_ << ledger_entry_json(entry) << '\n';
    out_.flush();
  }

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace

std::string_view to_string(EntryStatus status) {
  switch (status) {
    case EntryStatus::cached: return "cached";
    case EntryStatus::fetched: return "fetched";
    case EntryStatus::failed: return "failed";
  }
  return "failed";
}

std::size_t CampaignLedger::count(EntryStatus status) const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [&](const LedgerEntry& e) { return e.status == status; }));
}

std::vector<PromptBundle> campaign_bundles(const MetricRegistry& registry, ExpertiseLevel level,
                                           const CampaignOptions& options) {
  std::vector<PromptBundle> bundles;
  if (options.per_criterion) {
    for (const auto& criterion : options.criteria) {
      bundles.push_back(build_prompt(registry, level, std::span(&criterion, 1)));
    }
  } else {
    bundles.push_back(build_prompt(registry, level, options.criteria));
  }
  return bundles;
}

CampaignPlan plan_campaign(std::span<const CampaignImage> images, const MetricRegistry& registry,
                           const CampaignOptions& options) {
  if (images.empty()) throw EmptyCampaign();
  check_levels(options.levels);
  if (options.replicates < 1) throw ValidationError("replicates must be >= 1");
  if (options.criteria.empty()) throw ValidationError("campaign needs at least one criterion");

  std::set<std::string> ids;
  for (const auto& image : images) {
    if (!ids.insert(image.id).second) throw ValidationError(fmt::format("duplicate image id '{}'", image.id));
  }

  CampaignPlan plan;
  std::vector<std::pair<std::size_t, std::size_t>> level_ranges;
  for (auto level : options.levels) {
    const std::size_t first = plan.bundles.size();
    for (auto& bundle : campaign_bundles(registry, level, options)) plan.bundles.push_back(std::move(bundle));
    level_ranges.emplace_back(first, plan.bundles.size());
  }

  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string bytes = read_image(images[i]);
    for (const auto& [first, last] : level_ranges) {
      for (std::size_t b = first; b < last; ++b) {
        for (int r = 1; r <= options.replicates; ++r) {
          plan.requests.push_back({i, b, make_request_key(bytes, plan.bundles[b], r)});
        }
      }
    }
  }
  return plan;
}

CampaignLedger run_campaign(std::span<const CampaignImage> images, const MetricRegistry& registry,
                            const CampaignOptions& options, Gateway& gateway, const fs::path& ledger_file,
                            const BundleValidator& validate) {
  const CampaignPlan plan = plan_campaign(images, registry, options);
  LedgerWriter writer(ledger_file);

  CampaignLedger ledger;
  ledger.entries.resize(plan.requests.size());

  // Per image: indices into plan.requests, grouped by level in ascending order.
  std::vector<std::vector<std::vector<std::size_t>>> by_image(images.size());
  for (std::size_t i = 0; i < plan.requests.size(); ++i) {
    const auto& request = plan.requests[i];
    auto& levels = by_image[request.image_index];
    const auto level = plan.bundles[request.bundle_index].level;
    const auto position = static_cast<std::size_t>(
        std::find(options.levels.begin(), options.levels.end(), level) - options.levels.begin());
    if (levels.size() <= position) levels.resize(position + 1);
    levels[position].push_back(i);
  }

  std::vector<std::string> image_bytes(images.size());
  std::vector<char> image_failed(images.size(), 0);

  auto run_level = [&](std::size_t image, std::size_t level_position) {
    if (image_bytes[image].empty()) image_bytes[image] = read_image(images[image]);
    for (std::size_t index : by_image[image][level_position]) {
      const auto& request = plan.requests[index];
      const auto& bundle = plan.bundles[request.bundle_index];
      LedgerEntry& entry = ledger.entries[index];
      entry.key = request.key;
      entry.key_digest = request.key.digest();
      entry.image_id = images[image].id;
      entry.criteria = bundle.criteria;
      if (image_failed[image]) {
        entry.status = EntryStatus::failed;
        entry.error_kind = "Skipped";
        entry.error = "a lower level of this image failed";
        writer.append(entry);
        continue;
      }
      try {
        ResponseValidator validator;
        if (validate) {
          validator = [&](const RawResponse& raw) { validate(raw, bundle, images[image]); };
        }
        auto result = gateway.submit(image_bytes[image], bundle, request.key.replicate, validator);
        entry.status = result.from_cache ? EntryStatus::cached : EntryStatus::fetched;
        entry.received_at_us = result.response.received_at_us;
        entry.backend = result.response.backend;
        entry.attempt_count = result.response.attempt_count;
        entry.response_digest = sha256_hex(result.response.text);
      } catch (const Error& e) {
        if (e.exit_code() == ExitCode::io) throw;
        entry.status = EntryStatus::failed;
        entry.error_kind = e.kind();
        entry.error = e.what();
      }
      writer.append(entry);
    }
    // Same-level requests are all attempted; higher levels wait for a clean run.
    for (std::size_t index : by_image[image][level_position]) {
      if (ledger.entries[index].status == EntryStatus::failed) image_failed[image] = 1;
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(options.workers, 1)),
                                                     images.size()));

  auto parallel_over_images = [&](const std::function<void(std::size_t)>& task) {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    auto body = [&] {
      for (std::size_t i = next.fetch_add(1); i < images.size(); i = next.fetch_add(1)) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    if (workers == 1) {
      body();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
    }
    if (first_error) std::rethrow_exception(first_error);
  };

  if (options.strict_global_order) {
    for (std::size_t position = 0; position < options.levels.size(); ++position) {
      parallel_over_images([&](std::size_t image) { run_level(image, position); });
    }
  } else {
    parallel_over_images([&](std::size_t image) {
      for (std::size_t position = 0; position < by_image[image].size(); ++position) run_level(image, position);
    });
  }
  return ledger;
}

std::string ledger_entry_json(const LedgerEntry& entry) {
  json j = {
      {"key_digest", entry.key_digest},
      {"image_id", entry.image_id},
      {"level", to_int(entry.key.level)},
      {"replicate", entry.key.replicate},
      {"criteria", entry.criteria},
      {"image_digest", entry.key.image_digest},
      {"prompt_digest", entry.key.prompt_digest},
      {"status", to_string(entry.status)},
  };
  if (entry.status != EntryStatus::failed) {
    j["received_at_us"] = entry.received_at_us;
    j["received_at"] = format_timestamp(entry.received_at_us);
    j["backend"] = entry.backend;
    j["attempt_count"] = entry.attempt_count;
    j["response_digest"] = entry.response_digest;
  } else {
    j["error_kind"] = entry.error_kind;
    j["error"] = entry.error;
  }
  return j.dump();
}

LedgerEntry ledger_entry_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.what(), 0, e.byte);
  }
  try {
    LedgerEntry entry;
    entry.key_digest = j.at("key_digest").get<std::string>();
    entry.image_id = j.at("image_id").get<std::string>();
    entry.key.level = level_from_int(j.at("level").get<int>());
    entry.key.replicate = j.at("replicate").get<int>();
    entry.criteria = j.at("criteria").get<std::vector<std::string>>();
    entry.key.image_digest = j.at("image_digest").get<std::string>();
    entry.key.prompt_digest = j.at("prompt_digest").get<std::string>();
    const auto status = j.at("status").get<std::string>();
    if (status == "cached") {
      entry.status = EntryStatus::cached;
    } else if (status == "fetched") {
      entry.status = EntryStatus::fetched;
    } else if (status == "failed") {
      entry.status = EntryStatus::failed;
    } else {
      throw ValidationError(fmt::format("unknown ledger status '{}'", status));
    }
    entry.received_at_us = j.value("received_at_us", std::int64_t{0});
    entry.backend = j.value("backend", std::string{});
    entry.attempt_count = j.value("attempt_count", 0);
    entry.response_digest = j.value("response_digest", std::string{});
    entry.error_kind = j.value("error_kind", std::string{});
    entry.error = j.value("error", std::string{});
    return entry;
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("malformed ledger entry: {}", e.what()));
  }
}

std::vector<LedgerEntry> read_ledger(const fs::path& ledger_file) {
  std::ifstream in(ledger_file, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read ledger '{}'", ledger_file.string()));
  std::vector<LedgerEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    entries.push_back(ledger_entry_from_json(line));
  }
  return entries;
}

std::vector<std::string> verify_level_ordering(std::span<const LedgerEntry> entries) {
  // image -> level -> (min, max) received time
  std::map<std::string, std::map<int, std::pair<std::int64_t, std::int64_t>>> spans;
  for (const auto& e : entries) {
    if (e.status == EntryStatus::failed) continue;
    auto [it, inserted] = spans[e.image_id].try_emplace(to_int(e.key.level), e.received_at_us, e.received_at_us);
    if (!inserted) {
      it->second.first = std::min(it->second.first, e.received_at_us);
      it->second.second = std::max(it->second.second, e.received_at_us);
    }
  }
  std::vector<std::string> violations;
  for (const auto& [image, levels] : spans) {
    std::int64_t latest_lower = std::numeric_limits<std::int64_t>::min();
    int latest_level = 0;
    for (const auto& [level, span] : levels) {
      if (span.first < latest_lower) {
        violations.push_back(fmt::format("image '{}': level {} received before level {} finished", image, level,
                                         latest_level));
      }
      if (span.second > latest_lower) {
        latest_lower = span.second;
        latest_level = level;
      }
    }
  }
  return violations;
}

std::vector<std::string> verify_cache(std::span<const LedgerEntry> entries, const ResponseCache& cache) {
  std::vector<std::string> problems;
  for (const auto& e : entries) {
    if (e.status == EntryStatus::failed) continue;
    try {
      auto cached = cache.lookup(e.key);
      if (!cached) {
        problems.push_back(fmt::format("{}: missing from cache", e.key_digest));
      } else if (sha256_hex(cached->text) != e.response_digest) {
        problems.push_back(fmt::format("{}: cached text digest differs from ledger", e.key_digest));
      }
    } catch (const Error& err) {
      problems.push_back(fmt::format("{}: {}", e.key_digest, err.what()));
    }
  }
  return problems;
}

}  // namespace walkeval
