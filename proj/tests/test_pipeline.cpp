#include <gtest/gtest.h>

#include "support.hpp"
#include "walkeval/error.hpp"
#include "walkeval/pipeline.hpp"

using namespace walkeval;
using walkeval::testing::TempDir;
using walkeval::testing::hashed_score;
using walkeval::testing::write_file;
using walkeval::testing::write_workspace;
namespace fs = std::filesystem;

namespace {

const std::string kMinimal = R"({
  "images": [{"id": "a", "path": "img/a.jpg", "street": "Elm"}],
  "backend": {"kind": "mock", "script": "s.json"},
  "output_dir": "out"
})";

}  // namespace

TEST(Manifest, DefaultsAndRelativePaths) {
  const auto m = parse_manifest(kMinimal, "/data/run");
  ASSERT_EQ(m.images.size(), 1u);
  EXPECT_EQ(m.images[0].path, fs::path("/data/run/img/a.jpg"));
  EXPECT_EQ(m.options.levels.size(), 4u);
  EXPECT_EQ(m.options.replicates, 1);
  EXPECT_EQ(m.options.criteria, (std::vector<std::string>{"Safety", "Attractiveness"}));
  EXPECT_EQ(m.backend.kind, BackendConfig::Kind::mock);
  EXPECT_EQ(m.backend.script, fs::path("/data/run/s.json"));
  EXPECT_EQ(m.ledger_path(), fs::path("/data/run/out/ledger.jsonl"));
  EXPECT_EQ(m.records_path(), fs::path("/data/run/out/records.jsonl"));
  EXPECT_EQ(m.report_dir(), fs::path("/data/run/out/report"));
  EXPECT_FALSE(m.registry.has_value());
  EXPECT_EQ(m.streets().at("a"), "Elm");
}

TEST(Manifest, FullDocument) {
  const auto m = parse_manifest(R"({
    "images": [{"id": "a", "path": "/abs/a.png", "street": "Elm"}, {"id": "b", "path": "b.png", "street": "Oak"}],
    "levels": [2, 4], "replicates": 3, "criteria": ["Safety"], "per_criterion": true,
    "strict_global_order": true, "workers": 2, "registry": "reg.json",
    "backend": {"kind": "live", "endpoint": "https://api.example.com/v1/chat/completions", "model": "m1",
                "temperature": 0.5, "timeout_ms": 1500, "max_retries": 1, "credentials_env": "KEY",
                "backoff_ms": 10, "max_reasks": 0},
    "output_dir": "/tmp/out"})",
                                "/base");
  EXPECT_EQ(m.images[0].path, fs::path("/abs/a.png"));
  EXPECT_EQ(m.options.levels, (std::vector<ExpertiseLevel>{ExpertiseLevel::c2, ExpertiseLevel::c4}));
  EXPECT_EQ(m.options.replicates, 3);
  EXPECT_TRUE(m.options.per_criterion);
  EXPECT_TRUE(m.options.strict_global_order);
  EXPECT_EQ(m.options.workers, 2);
  EXPECT_EQ(*m.registry, fs::path("/base/reg.json"));
  EXPECT_EQ(m.backend.kind, BackendConfig::Kind::live);
  EXPECT_EQ(m.backend.model_name, "m1");
  EXPECT_EQ(m.backend.timeout, std::chrono::milliseconds(1500));
  EXPECT_EQ(m.backend.backoff_base, std::chrono::milliseconds(10));
  EXPECT_EQ(m.backend.max_reasks, 0);
  EXPECT_EQ(m.output_dir, fs::path("/tmp/out"));
}

TEST(Manifest, Rejections) {
  EXPECT_THROW(parse_manifest("{", "/"), ParseError);
  EXPECT_THROW(parse_manifest("[]", "/"), ParseError);
  auto with = [](const std::string& from, const std::string& to) {
    std::string doc = kMinimal;
    doc.replace(doc.find(from), from.size(), to);
    return doc;
  };
  EXPECT_THROW(parse_manifest(with("\"output_dir\"", "\"extra\": 1, \"output_dir\""), "/"), ValidationError);
  EXPECT_THROW(parse_manifest(with("\"street\": \"Elm\"", "\"street\": \"\""), "/"), ValidationError);
  EXPECT_THROW(parse_manifest(with("\"kind\": \"mock\"", "\"kind\": \"ftp\""), "/"), ValidationError);
  EXPECT_THROW(parse_manifest(with("\"kind\": \"mock\"", "\"kind\": \"live\""), "/"), ValidationError);
  EXPECT_THROW(parse_manifest(with("\"output_dir\"", "\"levels\": [5], \"output_dir\""), "/"), ValidationError);
  EXPECT_THROW(parse_manifest(with("\"output_dir\"", "\"replicates\": 0, \"output_dir\""), "/"), ValidationError);
  EXPECT_THROW(parse_manifest(with("\"output_dir\": \"out\"", "\"output_dir\": 3"), "/"), ValidationError);
  EXPECT_THROW(load_manifest("/nonexistent/manifest.json"), IoError);
}

TEST(Pipeline, RunWritesRecordsAndResumesFromCache) {
  TempDir dir;
  CampaignOptions options;
  const auto path = write_workspace(dir.path(), {"a", "b", "c"}, {"Elm", "Oak"}, options, hashed_score);
  const auto manifest = load_manifest(path);
  auto backend = make_backend(manifest.backend);

  const auto first = run_manifest(manifest, default_registry(), *backend);
  EXPECT_EQ(first.ledger.count(EntryStatus::fetched), 12u);
  EXPECT_EQ(first.records.size(), 12u);
  EXPECT_EQ(first.backend_requests, 12u);
  EXPECT_TRUE(first.warnings.empty());
  EXPECT_EQ(read_records(manifest.records_path()), first.records);
  const auto records_text = walkeval::testing::read_file(manifest.records_path());

  const auto second = run_manifest(manifest, default_registry(), *backend);
  EXPECT_EQ(second.ledger.count(EntryStatus::cached), 12u);
  EXPECT_EQ(second.backend_requests, 0u);
  EXPECT_EQ(walkeval::testing::read_file(manifest.records_path()), records_text);

  const auto bundle = analyze_records(first.records, manifest.streets(), default_registry(), {}, manifest.report_dir());
  EXPECT_EQ(bundle.criteria, (std::vector<std::string>{"Safety", "Attractiveness"}));
  EXPECT_TRUE(fs::exists(manifest.report_dir() / "model_comparison.csv"));
  EXPECT_TRUE(fs::exists(manifest.report_dir() / "distribution_Attractiveness.svg"));
}

TEST(Pipeline, UnparseableResponseIsReaskedThenFails) {
  TempDir dir;
  CampaignOptions options;
  options.levels = {ExpertiseLevel::c2};
  options.criteria = {"Safety"};
  const auto path = write_workspace(dir.path(), {"a"}, {"Elm"}, options, hashed_score);
  auto script = nlohmann::json::parse(walkeval::testing::read_file(dir / "script.json"));
  const std::string key = script.begin().key();
  const std::string good = script[key];
  script[key] = {"CCTV: 9", good};
  write_file(dir / "script.json", script.dump());

  const auto manifest = load_manifest(path);
  auto backend = make_backend(manifest.backend);
  const auto result = run_manifest(manifest, default_registry(), *backend);
  EXPECT_EQ(result.ledger.count(EntryStatus::fetched), 1u);
  EXPECT_EQ(result.backend_requests, 2u);
  EXPECT_EQ(result.records.size(), 1u);

  TempDir other;
  const auto path2 = write_workspace(other.path(), {"a"}, {"Elm"}, options, hashed_score);
  auto bad = nlohmann::json::parse(walkeval::testing::read_file(other / "script.json"));
  bad[bad.begin().key()] = "nothing useful";
  write_file(other / "script.json", bad.dump());
  const auto manifest2 = load_manifest(path2);
  auto backend2 = make_backend(manifest2.backend);
  const auto failed = run_manifest(manifest2, default_registry(), *backend2);
  EXPECT_EQ(failed.ledger.count(EntryStatus::failed), 1u);
  EXPECT_EQ(failed.ledger.entries[0].error_kind, "MissingMetrics");
  EXPECT_EQ(failed.backend_requests, 3u);
  EXPECT_TRUE(failed.records.empty());
}
