#include "walkeval/prompt.hpp"

#include <fmt/format.h>

#include "walkeval/error.hpp"

namespace walkeval {

namespace {

constexpr std::string_view kDefaultCriteria[] = {"Safety", "Attractiveness"};

std::string join_prose(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

constexpr std::string_view kPreamble =
    "You are assessing the walkability of the street shown in the attached street view image.\n"
    "Judge only what can be seen in the image.\n\n";

}  // namespace

ExpertiseLevel level_from_int(int value) {
  if (value < 1 || value > 4) {
    throw ValidationError(fmt::format("expertise level must be 1..4, got {}", value));
  }
  return static_cast<ExpertiseLevel>(value);
}

std::string model_label(ExpertiseLevel level) { return fmt::format("Model-C{}", to_int(level)); }

Naming naming_for(ExpertiseLevel level) {
  return level == ExpertiseLevel::c2 ? Naming::vague : Naming::quantified;
}

ScoreRange score_range_for(ExpertiseLevel level) {
  return level == ExpertiseLevel::c1 ? ScoreRange{1, 105} : ScoreRange{1, 5};
}

std::string PromptBundle::full_text() const { return body_text + "\n" + format_instruction; }

std::string response_key(std::string_view criterion, std::string_view name, std::size_t criteria_count) {
  if (criteria_count > 1) {
    return fmt::format("{}.{}", criterion, name);
  }
  return std::string(name);
}

std::string aggregate_key(std::string_view criterion, std::size_t criteria_count) {
  return response_key(criterion, "AGGREGATE", criteria_count);
}

std::string format_instruction(ExpertiseLevel level, std::span<const std::string> expected_metrics,
                               std::span<const std::string> criteria) {
  std::string out;
  if (level == ExpertiseLevel::c1) {
    std::vector<std::string> names(criteria.begin(), criteria.end());
    if (names.empty()) names.assign(std::begin(kDefaultCriteria), std::end(kDefaultCriteria));
    out += "Answer with exactly one line per criterion in the form\n";
    out += "<Criterion>: <integer> - <one-sentence rationale>\n";
    out += "using these lines:\n";
    for (const auto& name : names) {
      out += fmt::format("{}: <integer from 1 to 105> - <one-sentence rationale>\n", name);
    }
    out += "Write whole numbers only. Do not repeat a line.\n";
    return out;
  }

  out += "Answer with exactly one line per metric in the form\n";
  out += "<MetricName>: <integer> - <one-sentence rationale>\n";
  out += "using these metric names in this order:\n";
  for (const auto& key : expected_metrics) {
    out += fmt::format("{}: <integer from 1 to 5> - <one-sentence rationale>\n", key);
  }
  if (criteria.size() > 1) {
    for (const auto& criterion : criteria) {
      out += fmt::format("{}: <sum of the {} metric scores>\n", aggregate_key(criterion, criteria.size()),
                         criterion);
    }
  } else {
    out += "AGGREGATE: <sum of the metric scores>\n";
  }
  out += "Write whole numbers only. Do not repeat a line.\n";
  return out;
}

PromptBundle build_prompt(const MetricRegistry& registry, ExpertiseLevel level,
                          std::span<const std::string> criteria) {
  if (criteria.empty()) {
    throw ValidationError("a prompt needs at least one criterion");
  }
  PromptBundle bundle;
  bundle.level = level;
  bundle.criteria.assign(criteria.begin(), criteria.end());
  bundle.score_range = score_range_for(level);

  std::string body(kPreamble);
  const std::string criteria_prose = join_prose(criteria);

  if (level == ExpertiseLevel::c1) {
    body += fmt::format("Rate pedestrian {} on a scale from 1 (lowest) to 105 (highest).\n", criteria_prose);
    body += "Give one whole number for each criterion based on your overall impression of the street.\n";
    bundle.body_text = std::move(body);
    bundle.format_instruction = format_instruction(level, {}, criteria);
    return bundle;
  }

  const Naming naming = naming_for(level);
  // Resolve every criterion before rendering so errors are raised up front.
  std::vector<std::vector<NamedMetric>> per_criterion;
  for (const auto& criterion : criteria) {
    auto metrics = registry.metrics_for(criterion, naming);
    if (metrics.empty()) {
      throw EmptyCriterion(criterion);
    }
    if (level == ExpertiseLevel::c4) {
      for (const auto& m : metrics) {
        if (m.metric.description.empty()) throw MissingDescription(m.name);
      }
    }
    per_criterion.push_back(std::move(metrics));
  }

  const std::string_view naming_prose =
      level == ExpertiseLevel::c2 ? "the metrics listed below" : "the quantified metrics listed below";
  body += fmt::format("Evaluate pedestrian {} using {}.\n", criteria_prose, naming_prose);
  body += "Rate each metric on a scale from 1 (lowest) to 5 (highest).\n";
  if (level == ExpertiseLevel::c4) {
    body += "Each metric comes with a description and a scoring rule. Follow them exactly.\n";
  }

  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const auto& criterion = criteria[c];
    body += fmt::format("\n{} metrics:\n", criterion);
    for (const auto& m : per_criterion[c]) {
      if (level == ExpertiseLevel::c4) {
        body += fmt::format("\nMetric: {}\nDescription: {}\n", m.name, m.metric.description);
        if (!m.metric.scoring.rubric.empty()) {
          body += fmt::format("Scoring: {}\n", m.metric.scoring.rubric);
        }
      } else {
        body += fmt::format("- {}\n", m.name);
      }
      bundle.expected_metrics.push_back(response_key(criterion, m.name, criteria.size()));
      bundle.metric_criteria.push_back(criterion);
      bundle.metric_kinds.push_back(m.metric.scoring.kind);
    }
  }
  if (criteria.size() > 1) {
    body += "\nScore the metrics of each criterion separately; some metric names appear under more than one "
            "criterion.\n";
  }

  bundle.body_text = std::move(body);
  bundle.format_instruction = format_instruction(level, bundle.expected_metrics, criteria);
  return bundle;
}

}  // namespace walkeval
