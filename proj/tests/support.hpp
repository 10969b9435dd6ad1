#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "walkeval/campaign.hpp"
#include "walkeval/parser.hpp"
#include "walkeval/prompt.hpp"
#include "walkeval/registry.hpp"

namespace walkeval::testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = fs::temp_directory_path() / ("walkeval-test-" + std::to_string(rng()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fake image bytes: distinct per id, JPEG magic so media sniffing works.
inline std::string fake_image(const std::string& id) { return std::string("\xFF\xD8\xFF\xE0", 4) + "image:" + id; }

/// Writes one fake image per id into `dir`.
inline std::vector<CampaignImage> make_images(const fs::path& dir, const std::vector<std::string>& ids,
                                              const std::vector<std::string>& streets) {
  std::vector<CampaignImage> images;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto path = dir / "images" / (ids[i] + ".jpg");
    write_file(path, fake_image(ids[i]));
    images.push_back({ids[i], path, streets[i % streets.size()]});
  }
  return images;
}

/// Score for one response key; `criterion` is the key's criterion.
using ScoreFn = std::function<int(const CampaignImage& image, const PromptBundle& bundle, const std::string& key,
                                  const std::string& criterion)>;

/// Canonical response for `bundle` with scores from `score`.
inline std::string synthetic_response(const CampaignImage& image, const PromptBundle& bundle, const ScoreFn& score) {
  EvaluationRecord record;
  if (bundle.level == ExpertiseLevel::c1) {
    for (const auto& c : bundle.criteria) {
      record.criterion_scores[c] = score(image, bundle, c, c);
      record.rationales[c] = "Overall impression of the street.";
    }
  } else {
    for (const auto& c : bundle.criteria) record.criterion_scores[c] = 0;
    for (std::size_t i = 0; i < bundle.expected_metrics.size(); ++i) {
      const auto& key = bundle.expected_metrics[i];
      const int v = score(image, bundle, key, bundle.metric_criteria[i]);
      record.metric_scores[key] = v;
      record.criterion_scores[bundle.metric_criteria[i]] += v;
      record.rationales[key] = "Visible in the image.";
    }
  }
  return render_response(record, bundle);
}

/// Mock script (key digest -> response) covering every planned request.
inline nlohmann::json mock_script(std::span<const CampaignImage> images, const MetricRegistry& registry,
                                  const CampaignOptions& options, const ScoreFn& score) {
  const auto plan = plan_campaign(images, registry, options);
  nlohmann::json script = nlohmann::json::object();
  for (const auto& r : plan.requests) {
    script[r.key.digest()] = synthetic_response(images[r.image_index], plan.bundles[r.bundle_index], score);
  }
  return script;
}

/// Deterministic 1..5 score from a string hash; presence metrics get 1 or 5.
inline int hashed_score(const CampaignImage& image, const PromptBundle& bundle, const std::string& key,
                        const std::string& criterion) {
  std::size_t h = std::hash<std::string>{}(image.id + "|" + std::to_string(to_int(bundle.level)) + "|" + key);
  if (bundle.level == ExpertiseLevel::c1) return 40 + static_cast<int>(h % 60);
  const auto it = std::find(bundle.expected_metrics.begin(), bundle.expected_metrics.end(), key);
  const auto kind = bundle.metric_kinds[static_cast<std::size_t>(it - bundle.expected_metrics.begin())];
  (void)criterion;
  if (kind == ScoringKind::presence) return h % 2 ? 5 : 1;
  return 1 + static_cast<int>(h % 5);
}

/// Images, mock script and manifest for a mock campaign under `dir`.
/// Returns the manifest path; output goes to `dir/out`.
inline fs::path write_workspace(const fs::path& dir, const std::vector<std::string>& ids,
                                const std::vector<std::string>& streets, const CampaignOptions& options,
                                const ScoreFn& score) {
  const auto images = make_images(dir, ids, streets);
  write_file(dir / "script.json", mock_script(images, default_registry(), options, score).dump(2));
  nlohmann::json manifest;
  manifest["images"] = nlohmann::json::array();
  for (const auto& image : images) {
    manifest["images"].push_back(
        {{"id", image.id}, {"path", fs::relative(image.path, dir).string()}, {"street", image.street}});
  }
  manifest["levels"] = nlohmann::json::array();
  for (auto level : options.levels) manifest["levels"].push_back(to_int(level));
  manifest["replicates"] = options.replicates;
  manifest["criteria"] = options.criteria;
  manifest["per_criterion"] = options.per_criterion;
  manifest["workers"] = options.workers;
  manifest["backend"] = {{"kind", "mock"}, {"script", "script.json"}, {"backoff_ms", 0}};
  manifest["output_dir"] = "out";
  write_file(dir / "manifest.json", manifest.dump(2));
  return dir / "manifest.json";
}

}  // namespace walkeval::testing
