#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "walkeval/gateway.hpp"
#include "walkeval/prompt.hpp"

namespace walkeval {

/// One scored (image, level, replicate) outcome.
struct EvaluationRecord {
  std::string image_id;
  ExpertiseLevel level = ExpertiseLevel::c1;
  int replicate = 1;
  /// Criterion -> aggregate (level 1: the direct rating).
  std::map<std::string, int> criterion_scores;
  /// Response key -> score; empty for level 1.
  std::map<std::string, int> metric_scores;
  /// Response key (or criterion for level 1) -> rationale.
  std::map<std::string, std::string> rationales;
  RequestKey raw_ref;

  bool operator==(const EvaluationRecord&) const = default;
};

struct ParseOutcome {
  EvaluationRecord record;
  /// Non-fatal findings, e.g. a reported aggregate that disagrees with the
  /// recomputed sum.
  std::vector<std::string> warnings;
};

/// Parses a level 2..4 response (level 1 bundles are forwarded to
/// parse_level1). Throws MissingMetrics, UnknownMetric, ScoreOutOfRange,
/// NonIntegerScore or AmbiguousScore.
ParseOutcome parse(const RawResponse& raw, const PromptBundle& bundle, std::string_view image_id);

/// Parses a level 1 response: one rating in 1..105 per criterion.
ParseOutcome parse_level1(const RawResponse& raw, const PromptBundle& bundle, std::string_view image_id);

/// Canonical response text for `record` under `bundle`; parse() inverts it.
std::string render_response(const EvaluationRecord& record, const PromptBundle& bundle);

/// Scores of `criterion` keyed by bare metric name.
std::map<std::string, int> metric_scores_for(const EvaluationRecord& record, std::string_view criterion);

std::string record_to_json(const EvaluationRecord& record);
EvaluationRecord record_from_json(std::string_view line);

/// One JSON record per line.
void write_records(const std::filesystem::path& path, std::span<const EvaluationRecord> records);
/// Throws IoError, ValidationError.
std::vector<EvaluationRecord> read_records(const std::filesystem::path& path);

}  // namespace walkeval
