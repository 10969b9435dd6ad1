#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace walkeval {

enum class ScoringKind {
  presence,  // binary, scores {1, 5}
  graded,    // ordinal 1..5
  direct,    // criterion-level 1..105, never attached to a metric entry
};

struct ScoringRule {
  ScoringKind kind = ScoringKind::graded;
  std::string rubric;

  bool operator==(const ScoringRule&) const = default;
};

enum class Actionability { actionable, not_actionable, unspecified };

enum class Provenance { paper, authored };

/// Which name column to draw metric names from.
enum class Naming { vague, quantified };

/// One walkability metric with both of its names and its ontology roles.
struct MetricSpec {
  std::string vague_name;
  std::string quantified_name;
  std::string criterion;
  std::string description;
  Provenance description_provenance = Provenance::authored;
  ScoringRule scoring;
  Actionability actionable = Actionability::unspecified;
  std::string method;
  std::string data_source;

  const std::string& name(Naming naming) const {
    return naming == Naming::vague ? vague_name : quantified_name;
  }

  bool operator==(const MetricSpec&) const = default;
};

struct NamedMetric {
  std::string name;
  MetricSpec metric;
};

struct ActionableSubset {
  std::vector<MetricSpec> actionable;
  /// Metrics whose flag is "unspecified"; excluded from `actionable`.
  std::vector<MetricSpec> unspecified;
};

/// Immutable, validated metric database. Metric order is the prompt
/// presentation order.
class MetricRegistry {
 public:
  MetricRegistry() = default;

  /// Validates names, uniqueness and criterion references.
  MetricRegistry(std::vector<std::string> criteria, std::vector<MetricSpec> metrics);

  const std::vector<std::string>& criteria() const noexcept { return criteria_; }
  const std::vector<MetricSpec>& metrics() const noexcept { return metrics_; }

  bool has_criterion(std::string_view criterion) const;

  /// Throws UnknownCriterion.
  std::vector<NamedMetric> metrics_for(std::string_view criterion, Naming naming) const;

  /// Throws UnknownCriterion.
  ActionableSubset actionable_subset(std::string_view criterion) const;

  /// Looks up a metric by either of its names within a criterion.
  const MetricSpec* find(std::string_view criterion, std::string_view name, Naming naming) const;

  bool operator==(const MetricRegistry&) const = default;

 private:
  void require_criterion(std::string_view criterion) const;

  std::vector<std::string> criteria_;
  std::vector<MetricSpec> metrics_;
};

/// Parses and validates a registry document (UTF-8 JSON). A blank document
/// yields an empty registry. Throws ParseError, DuplicateMetric,
/// UnknownCriterion or ValidationError.
MetricRegistry load_registry(std::string_view document);

/// Throws IoError if the file cannot be read.
MetricRegistry load_registry_file(const std::filesystem::path& path);

/// Canonical JSON rendering; `load_registry(serialize_registry(r)) == r`.
std::string serialize_registry(const MetricRegistry& registry);

/// The shipped Safety/Attractiveness registry (21 + 21 metrics).
const MetricRegistry& default_registry();

std::string_view to_string(ScoringKind kind);
std::string_view to_string(Actionability flag);
std::string_view to_string(Provenance provenance);

/// Whitespace-free, non-empty identifier.
bool is_identifier(std::string_view text);

}  // namespace walkeval
