#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "walkeval/registry.hpp"

namespace walkeval {

/// Prompt expertise level. C1 carries no metrics, C2 vague metric names,
/// C3 quantified names, C4 quantified names plus descriptions and scoring
/// rules.
enum class ExpertiseLevel : int { c1 = 1, c2 = 2, c3 = 3, c4 = 4 };

inline constexpr ExpertiseLevel kAllLevels[] = {ExpertiseLevel::c1, ExpertiseLevel::c2, ExpertiseLevel::c3,
                                                ExpertiseLevel::c4};

inline constexpr int to_int(ExpertiseLevel level) { return static_cast<int>(level); }

/// Throws ValidationError outside 1..4.
ExpertiseLevel level_from_int(int value);

/// "Model-C1" .. "Model-C4".
std::string model_label(ExpertiseLevel level);

/// Naming column a level draws from (levels 2..4 only).
Naming naming_for(ExpertiseLevel level);

struct ScoreRange {
  int low = 1;
  int high = 5;
  bool operator==(const ScoreRange&) const = default;
};

/// Criterion-level range for level 1; per-metric range otherwise.
ScoreRange score_range_for(ExpertiseLevel level);

struct PromptBundle {
  ExpertiseLevel level = ExpertiseLevel::c1;
  std::vector<std::string> criteria;
  std::string body_text;
  /// Response keys in presentation order. Bare metric names for a single
  /// criterion, "<Criterion>.<Name>" when the bundle spans several.
  std::vector<std::string> expected_metrics;
  /// Criterion of each entry of `expected_metrics`.
  std::vector<std::string> metric_criteria;
  /// Scoring kind of each entry of `expected_metrics`.
  std::vector<ScoringKind> metric_kinds;
  ScoreRange score_range;
  std::string format_instruction;

  /// Text sent to the model: body followed by the format instruction.
  std::string full_text() const;
};

/// Key used in responses for `name` of `criterion` in a bundle spanning
/// `criteria_count` criteria.
std::string response_key(std::string_view criterion, std::string_view name, std::size_t criteria_count);

/// Aggregate line key for `criterion`.
std::string aggregate_key(std::string_view criterion, std::size_t criteria_count);

/// Deterministic prompt rendering. Throws UnknownCriterion, EmptyCriterion,
/// MissingDescription, or ValidationError for an empty criteria list.
PromptBundle build_prompt(const MetricRegistry& registry, ExpertiseLevel level,
                          std::span<const std::string> criteria);

/// Response-format block. For level 1 one line per criterion (Safety and
/// Attractiveness when `criteria` is empty); otherwise one line per metric
/// followed by the aggregate line(s).
std::string format_instruction(ExpertiseLevel level, std::span<const std::string> expected_metrics,
                               std::span<const std::string> criteria = {});

}  // namespace walkeval
