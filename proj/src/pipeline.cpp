#include "walkeval/pipeline.hpp"

#include <fmt/format.h>

#include "walkeval/error.hpp"

namespace walkeval {

std::vector<EvaluationRecord> collect_records(std::span<const CampaignImage> images, const MetricRegistry& registry,
                                              const CampaignOptions& options, const ResponseCache& cache,
                                              std::vector<std::string>* warnings) {
  const auto plan = plan_campaign(images, registry, options);
  std::vector<EvaluationRecord> records;
  for (const auto& request : plan.requests) {
    auto raw = cache.lookup(request.key);
    if (!raw) continue;
    const auto& image = images[request.image_index];
    try {
      auto outcome = parse(*raw, plan.bundles[request.bundle_index], image.id);
      if (warnings) {
        for (auto& w : outcome.warnings) warnings->push_back(fmt::format("{} level {}: {}", image.id, to_int(request.key.level), w));
      }
      records.push_back(std::move(outcome.record));
    } catch (const ResponseError& e) {
      if (warnings) {
        warnings->push_back(fmt::format("{} level {}: cached response skipped: {}", image.id,
                                        to_int(request.key.level), e.what()));
      }
    }
  }
  return records;
}

RunResult run_manifest(const CampaignManifest& manifest, const MetricRegistry& registry, Backend& backend) {
  ResponseCache cache(manifest.cache_dir());
  Gateway gateway(backend, cache, manifest.backend);
  auto validate = [](const RawResponse& raw, const PromptBundle& bundle, const CampaignImage& image) {
    parse(raw, bundle, image.id);
  };
  RunResult result;
  result.ledger = run_campaign(manifest.images, registry, manifest.options, gateway, manifest.ledger_path(), validate);
  result.backend_requests = gateway.backend_requests();
  result.records = collect_records(manifest.images, registry, manifest.options, cache, &result.warnings);
  write_records(manifest.records_path(), result.records);
  return result;
}

ReportBundle analyze_records(std::span<const EvaluationRecord> records, const StreetAssignment& streets,
                             const MetricRegistry& registry, const ReportOptions& options,
                             const std::filesystem::path& out_dir) {
  auto bundle = build_report(records, streets, registry, options);
  export_report(bundle, out_dir);
  return bundle;
}

}  // namespace walkeval
