#include "walkeval/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"
#include "walkeval/pipeline.hpp"

namespace walkeval {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Flags {
  std::string registry;
  std::string manifest;
  std::optional<int> level;
  std::optional<int> workers;
  std::vector<std::string> criteria;
  std::string levene_center = "mean";
  double alpha = 0.05;
  double threshold = 3.0;
  std::size_t top_n = 6;
  std::string out_dir;
  std::string records;
  std::string input;
};

MetricRegistry registry_for(const Flags& flags, const CampaignManifest* manifest) {
  if (!flags.registry.empty()) return load_registry_file(flags.registry);
  if (manifest && manifest->registry) return load_registry_file(*manifest->registry);
  return default_registry();
}

CampaignManifest manifest_for(const Flags& flags) {
  if (flags.manifest.empty()) throw ValidationError("--manifest is required");
  auto manifest = load_manifest(flags.manifest);
  if (flags.workers) {
    if (*flags.workers < 1) throw ValidationError("--workers must be >= 1");
    manifest.options.workers = *flags.workers;
  }
  return manifest;
}

stats::LeveneCenter levene_center(const std::string& name) {
  return name == "median" ? stats::LeveneCenter::median : stats::LeveneCenter::mean;
}

ordered_json test_json(const stats::TestResult& r) {
  ordered_json j;
  j["method"] = r.method;
  j["statistic"] = r.statistic;
  j["df"] = r.df;
  j["p_value"] = r.p_value;
  j["p_display"] = format_p(r.p_value);
  return j;
}

ordered_json pair_json(const stats::PairwiseResult& p) {
  ordered_json j;
  j["pair"] = {p.pair.first, p.pair.second};
  j["mean_difference"] = p.mean_difference;
  j["standard_error"] = p.standard_error;
  j["df"] = p.df;
  j["q_statistic"] = p.q_statistic;
  j["p_value"] = p.p_value;
  j["p_display"] = format_p(p.p_value);
  j["ci_low"] = p.ci_low;
  j["ci_high"] = p.ci_high;
  return j;
}

int cmd_validate(const Flags& flags, std::ostream& out) {
  const auto registry = registry_for(flags, nullptr);
  ordered_json j;
  j["valid"] = true;
  j["criteria"] = ordered_json::array();
  for (const auto& criterion : registry.criteria()) {
    const auto metrics = registry.metrics_for(criterion, Naming::quantified);
    const auto subset = registry.actionable_subset(criterion);
    j["criteria"].push_back({{"name", criterion},
                             {"metrics", metrics.size()},
                             {"actionable", subset.actionable.size()},
                             {"unspecified", subset.unspecified.size()}});
  }
  j["metrics"] = registry.metrics().size();
  out << j.dump(2) << '\n';
  return 0;
}

int cmd_prompts(const Flags& flags, std::ostream& out) {
  if (!flags.level) throw ValidationError("--level is required");
  const auto registry = registry_for(flags, nullptr);
  auto criteria = flags.criteria;
  if (criteria.empty()) criteria = registry.criteria();
  const auto bundle = build_prompt(registry, level_from_int(*flags.level), criteria);
  out << bundle.full_text();
  if (bundle.full_text().empty() || bundle.full_text().back() != '\n') out << '\n';
  return 0;
}

int cmd_plan(const Flags& flags, std::ostream& out) {
  const auto manifest = manifest_for(flags);
  const auto registry = registry_for(flags, &manifest);
  const auto plan = plan_campaign(manifest.images, registry, manifest.options);
  for (const auto& request : plan.requests) {
    ordered_json j;
    j["image_id"] = manifest.images[request.image_index].id;
    j["level"] = to_int(request.key.level);
    j["criteria"] = plan.bundles[request.bundle_index].criteria;
    j["replicate"] = request.key.replicate;
    j["key_digest"] = request.key.digest();
    out << j.dump() << '\n';
  }
  return 0;
}

int cmd_run(const Flags& flags, std::ostream& out, std::ostream& err) {
  const auto manifest = manifest_for(flags);
  const auto registry = registry_for(flags, &manifest);
  auto backend = make_backend(manifest.backend);
  const auto result = run_manifest(manifest, registry, *backend);

  ordered_json j;
  j["entries"] = result.ledger.entries.size();
  j["fetched"] = result.ledger.count(EntryStatus::fetched);
  j["cached"] = result.ledger.count(EntryStatus::cached);
  j["failed"] = result.ledger.count(EntryStatus::failed);
  j["backend_requests"] = result.backend_requests;
  j["records"] = result.records.size();
  j["ledger"] = manifest.ledger_path().string();
  j["records_path"] = manifest.records_path().string();
  j["warnings"] = result.warnings;
  out << j.dump(2) << '\n';

  if (result.ledger.count(EntryStatus::failed) == 0) return 0;
  ordered_json e;
  e["error"] = "IncompleteCampaign";
  e["message"] = fmt::format("{} of {} requests failed; rerun with resume", result.ledger.count(EntryStatus::failed),
                             result.ledger.entries.size());
  for (const auto& entry : result.ledger.entries) {
    if (entry.status == EntryStatus::failed && entry.error_kind != "Skipped") {
      e["first_failure"] = {{"image_id", entry.image_id},
                            {"level", to_int(entry.key.level)},
                            {"kind", entry.error_kind},
                            {"message", entry.error}};
      break;
    }
  }
  e["exit_code"] = static_cast<int>(ExitCode::backend);
  err << e.dump() << '\n';
  return static_cast<int>(ExitCode::backend);
}

int cmd_analyze(const Flags& flags, std::ostream& out) {
  const auto manifest = manifest_for(flags);
  const auto registry = registry_for(flags, &manifest);
  const fs::path records_path = flags.records.empty() ? manifest.records_path() : fs::path(flags.records);
  const fs::path out_dir = flags.out_dir.empty() ? manifest.report_dir() : fs::path(flags.out_dir);
  const auto records = read_records(records_path);
  if (records.empty()) throw EmptyInput(fmt::format("no records in {}", records_path.string()));

  ReportOptions options;
  options.comparison.levene_center = levene_center(flags.levene_center);
  options.comparison.alpha = flags.alpha;
  options.threshold = flags.threshold;
  options.top_n = flags.top_n;
  if (flags.level) options.intervention_level = level_from_int(*flags.level);
  const auto bundle = analyze_records(records, manifest.streets(), registry, options, out_dir);

  ordered_json j;
  j["records"] = records.size();
  j["out_dir"] = out_dir.string();
  j["criteria"] = bundle.criteria;
  j["warnings"] = bundle.warnings;
  j["intervention_warnings"] = bundle.intervention_view.warnings;
  out << j.dump(2) << '\n';
  return 0;
}

// Input: {"groups": {"label": [values...], ...}} in the desired group order.
int cmd_stats(const Flags& flags, std::ostream& out) {
  std::ifstream in(flags.input, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", flags.input));
  std::ostringstream text;
  text << in.rdbuf();
  ordered_json doc;
  try {
    doc = ordered_json::parse(text.str());
  } catch (const ordered_json::parse_error& e) {
    throw ParseError(e.what(), 0, e.byte);
  }
  std::vector<stats::SampleGroup> groups;
  try {
    for (const auto& [label, values] : doc.at("groups").items()) {
      groups.push_back({label, values.get<std::vector<double>>()});
    }
  } catch (const ordered_json::exception& e) {
    throw ValidationError(fmt::format("stats input: {}", e.what()));
  }

  ordered_json j;
  auto attempt = [&](const char* name, auto&& compute) {
    try {
      j[name] = compute();
    } catch (const ValidationError& e) {
      j[name] = {{"error", e.kind()}, {"message", e.what()}};
    }
  };
  attempt("levene", [&] { return test_json(stats::levene(groups, levene_center(flags.levene_center))); });
  attempt("welch_anova", [&] { return test_json(stats::welch_anova(groups)); });
  attempt("games_howell", [&] {
    ordered_json pairs = ordered_json::array();
    for (const auto& p : stats::games_howell(groups, flags.alpha)) pairs.push_back(pair_json(p));
    return pairs;
  });
  attempt("kruskal_wallis", [&] { return test_json(stats::kruskal_wallis(groups)); });
  out << j.dump(2) << '\n';
  return 0;
}

void report_error(std::ostream& err, std::string_view kind, std::string_view message, int code) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prompt-level walkability evaluation with multimodal models", "walkeval"};
  app.require_subcommand(1);
  Flags flags;

  auto add_registry = [&](CLI::App* sub) {
    sub->add_option("--registry", flags.registry, "Metric registry JSON (default: the shipped registry)");
  };
  auto add_manifest = [&](CLI::App* sub) {
    sub->add_option("--manifest", flags.manifest, "Campaign manifest JSON")->required();
  };

  auto* validate = app.add_subcommand("validate", "Check a metric registry");
  add_registry(validate);

  auto* prompts = app.add_subcommand("prompts", "Print the prompt for one expertise level");
  add_registry(prompts);
  prompts->add_option("--level", flags.level, "Expertise level 1-4")->required()->check(CLI::Range(1, 4));
  prompts->add_option("--criterion", flags.criteria, "Criterion to include (repeatable; default: all)");

  auto* plan = app.add_subcommand("plan", "List every request of a campaign with its key digest");
  add_manifest(plan);
  add_registry(plan);

  CLI::App* runs[2] = {app.add_subcommand("run", "Run a campaign"),
                       app.add_subcommand("resume", "Resume a campaign from its cache")};
  for (auto* sub : runs) {
    add_manifest(sub);
    add_registry(sub);
    sub->add_option("--workers", flags.workers, "Images evaluated concurrently")->check(CLI::PositiveNumber);
  }

  auto* analyze = app.add_subcommand("analyze", "Build the report from records.jsonl (offline)");
  add_manifest(analyze);
  add_registry(analyze);
  analyze->add_option("--records", flags.records, "Records file (default: <output_dir>/records.jsonl)");
  analyze->add_option("--out", flags.out_dir, "Report directory (default: <output_dir>/report)");
  analyze->add_option("--level", flags.level, "Level for the intervention view (default: highest)")
      ->check(CLI::Range(1, 4));
  analyze->add_option("--threshold", flags.threshold, "Intervention score threshold")->check(CLI::Range(1.0, 5.0));
  analyze->add_option("--top-n", flags.top_n, "Metrics listed per criterion in the divergence ranking")
      ->check(CLI::PositiveNumber);

  auto* stats_cmd = app.add_subcommand("stats", "Run the group tests on a JSON file and print the results");
  stats_cmd->add_option("--input", flags.input, "JSON {\"groups\": {label: [values]}}")->required();

  for (auto* sub : {analyze, stats_cmd}) {
    sub->add_option("--levene-center", flags.levene_center, "Levene center")
        ->check(CLI::IsMember({"mean", "median"}));
    sub->add_option("--alpha", flags.alpha, "Confidence level complement for Games-Howell intervals")
        ->check(CLI::Range(0.0, 1.0));
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report_error(err, "UsageError", e.what(), static_cast<int>(ExitCode::usage));
    return static_cast<int>(ExitCode::usage);
  }

  try {
    if (validate->parsed()) return cmd_validate(flags, out);
    if (prompts->parsed()) return cmd_prompts(flags, out);
    if (plan->parsed()) return cmd_plan(flags, out);
    if (runs[0]->parsed() || runs[1]->parsed()) return cmd_run(flags, out, err);
    if (analyze->parsed()) return cmd_analyze(flags, out);
    if (stats_cmd->parsed()) return cmd_stats(flags, out);
  } catch (const Error& e) {
    report_error(err, e.kind(), e.what(), static_cast<int>(e.exit_code()));
    return static_cast<int>(e.exit_code());
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(err, "IoError", e.what(), static_cast<int>(ExitCode::io));
    return static_cast<int>(ExitCode::io);
  }
  return static_cast<int>(ExitCode::usage);
}

}  // namespace walkeval
