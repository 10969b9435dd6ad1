#include "walkeval/registry.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"

namespace walkeval {

namespace detail {
extern const std::string_view kDefaultRegistryJson;
}

namespace {

using ordered_json = nlohmann::ordered_json;

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

void reject_unknown_keys(const ordered_json& object, std::initializer_list<std::string_view> allowed,
                         std::string_view where) {
  for (const auto& item : object.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ValidationError(fmt::format("{}: unknown key '{}'", where, item.key()));
    }
  }
}

const ordered_json& require(const ordered_json& object, const char* key, std::string_view where) {
  auto it = object.find(key);
  if (it == object.end()) {
    throw ValidationError(fmt::format("{}: missing key '{}'", where, key));
  }
  return *it;
}

std::string require_string(const ordered_json& object, const char* key, std::string_view where) {
  const auto& value = require(object, key, where);
  if (!value.is_string()) {
    throw ValidationError(fmt::format("{}.{}: expected a string", where, key));
  }
  return value.get<std::string>();
}

ScoringKind parse_kind(const std::string& text, std::string_view where) {
  if (text == "presence") return ScoringKind::presence;
  if (text == "graded") return ScoringKind::graded;
  if (text == "direct") return ScoringKind::direct;
  throw ValidationError(fmt::format("{}: unknown scoring kind '{}'", where, text));
}

Actionability parse_actionable(const std::string& text, std::string_view where) {
  if (text == "yes") return Actionability::actionable;
  if (text == "no") return Actionability::not_actionable;
  if (text == "unspecified") return Actionability::unspecified;
  throw ValidationError(fmt::format("{}: actionable must be yes, no or unspecified, got '{}'", where, text));
}

Provenance parse_provenance(const std::string& text, std::string_view where) {
  if (text == "paper") return Provenance::paper;
  if (text == "authored") return Provenance::authored;
  throw ValidationError(fmt::format("{}: description_provenance must be paper or authored, got '{}'", where, text));
}

MetricSpec parse_metric(const ordered_json& node, std::size_t index) {
  const std::string where = fmt::format("metrics[{}]", index);
  if (!node.is_object()) {
    throw ValidationError(fmt::format("{}: expected an object", where));
  }
  reject_unknown_keys(node,
                      {"vague_name", "quantified_name", "criterion", "description", "description_provenance",
                       "scoring", "actionable", "method", "data_source"},
                      where);
  MetricSpec spec;
  spec.vague_name = require_string(node, "vague_name", where);
  spec.quantified_name = require_string(node, "quantified_name", where);
  spec.criterion = require_string(node, "criterion", where);
  spec.description = require_string(node, "description", where);
  spec.description_provenance = parse_provenance(require_string(node, "description_provenance", where), where);
  spec.actionable = parse_actionable(require_string(node, "actionable", where), where);
  spec.method = require_string(node, "method", where);
  spec.data_source = require_string(node, "data_source", where);

  const std::string scoring_where = where + ".scoring";
  const auto& scoring = require(node, "scoring", where);
  if (!scoring.is_object()) {
    throw ValidationError(fmt::format("{}: expected an object", scoring_where));
  }
  reject_unknown_keys(scoring, {"kind", "rubric"}, scoring_where);
  spec.scoring.kind = parse_kind(require_string(scoring, "kind", scoring_where), scoring_where);
  spec.scoring.rubric = require_string(scoring, "rubric", scoring_where);
  return spec;
}

}  // namespace

bool is_identifier(std::string_view text) {
  if (text.empty()) return false;
  return std::none_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c) || std::iscntrl(c); });
}

std::string_view to_string(ScoringKind kind) {
  switch (kind) {
    case ScoringKind::presence: return "presence";
    case ScoringKind::graded: return "graded";
    case ScoringKind::direct: return "direct";
  }
  return "graded";
}

std::string_view to_string(Actionability flag) {
  switch (flag) {
    case Actionability::actionable: return "yes";
    case Actionability::not_actionable: return "no";
    case Actionability::unspecified: return "unspecified";
  }
  return "unspecified";
}

std::string_view to_string(Provenance provenance) {
  return provenance == Provenance::paper ? "paper" : "authored";
}

MetricRegistry::MetricRegistry(std::vector<std::string> criteria, std::vector<MetricSpec> metrics)
    : criteria_(std::move(criteria)), metrics_(std::move(metrics)) {
  std::set<std::string, std::less<>> seen_criteria;
  for (const auto& criterion : criteria_) {
    if (!is_identifier(criterion)) {
      throw ValidationError(fmt::format("criterion name '{}' is not a whitespace-free identifier", criterion));
    }
    if (!seen_criteria.insert(criterion).second) {
      throw ValidationError(fmt::format("criterion '{}' is declared twice", criterion));
    }
  }

  std::set<std::pair<std::string, std::string>> vague;
  std::set<std::pair<std::string, std::string>> quantified;
  for (const auto& metric : metrics_) {
    if (!seen_criteria.contains(metric.criterion)) {
      throw UnknownCriterion(metric.criterion);
    }
    for (const auto* name : {&metric.vague_name, &metric.quantified_name}) {
      if (!is_identifier(*name)) {
        throw ValidationError(fmt::format("metric name '{}' is not a whitespace-free identifier", *name));
      }
    }
    if (metric.scoring.kind == ScoringKind::direct) {
      throw ValidationError(
          fmt::format("metric '{}' uses scoring kind 'direct', which is reserved for criterion-level ratings",
                      metric.quantified_name));
    }
    if (!vague.emplace(metric.criterion, metric.vague_name).second) {
      throw DuplicateMetric(metric.vague_name);
    }
    if (!quantified.emplace(metric.criterion, metric.quantified_name).second) {
      throw DuplicateMetric(metric.quantified_name);
    }
  }
}

bool MetricRegistry::has_criterion(std::string_view criterion) const {
  return std::find(criteria_.begin(), criteria_.end(), criterion) != criteria_.end();
}

void MetricRegistry::require_criterion(std::string_view criterion) const {
  if (!has_criterion(criterion)) {
    throw UnknownCriterion(std::string(criterion));
  }
}

std::vector<NamedMetric> MetricRegistry::metrics_for(std::string_view criterion, Naming naming) const {
  require_criterion(criterion);
  std::vector<NamedMetric> out;
  for (const auto& metric : metrics_) {
    if (metric.criterion == criterion) {
      out.push_back({metric.name(naming), metric});
    }
  }
  return out;
}

ActionableSubset MetricRegistry::actionable_subset(std::string_view criterion) const {
  require_criterion(criterion);
  ActionableSubset subset;
  for (const auto& metric : metrics_) {
    if (metric.criterion != criterion) continue;
    if (metric.actionable == Actionability::actionable) {
      subset.actionable.push_back(metric);
    } else if (metric.actionable == Actionability::unspecified) {
      subset.unspecified.push_back(metric);
    }
  }
  return subset;
}

const MetricSpec* MetricRegistry::find(std::string_view criterion, std::string_view name, Naming naming) const {
  for (const auto& metric : metrics_) {
    if (metric.criterion == criterion && metric.name(naming) == name) {
      return &metric;
    }
  }
  return nullptr;
}

MetricRegistry load_registry(std::string_view document) {
  if (std::all_of(document.begin(), document.end(), [](unsigned char c) { return std::isspace(c); })) {
    return {};
  }

  ordered_json root;
  try {
    root = ordered_json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, column] = line_and_column(document, e.byte);
    throw ParseError(e.what(), line, column);
  }

  if (!root.is_object()) {
    throw ParseError("registry document must be a JSON object", 1, 1);
  }
  reject_unknown_keys(root, {"criteria", "metrics"}, "registry");

  std::vector<std::string> criteria;
  if (auto it = root.find("criteria"); it != root.end()) {
    if (!it->is_array()) throw ValidationError("criteria: expected an array of strings");
    for (const auto& c : *it) {
      if (!c.is_string()) throw ValidationError("criteria: expected an array of strings");
      criteria.push_back(c.get<std::string>());
    }
  }

  std::vector<MetricSpec> metrics;
  if (auto it = root.find("metrics"); it != root.end()) {
    if (!it->is_array()) throw ValidationError("metrics: expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      metrics.push_back(parse_metric((*it)[i], i));
    }
  }
  return MetricRegistry(std::move(criteria), std::move(metrics));
}

MetricRegistry load_registry_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError(fmt::format("cannot read registry '{}'", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_registry(buffer.str());
}

std::string serialize_registry(const MetricRegistry& registry) {
  ordered_json root;
  root["criteria"] = registry.criteria();
  root["metrics"] = ordered_json::array();
  for (const auto& m : registry.metrics()) {
    ordered_json node;
    node["vague_name"] = m.vague_name;
    node["quantified_name"] = m.quantified_name;
    node["criterion"] = m.criterion;
    node["description"] = m.description;
    node["description_provenance"] = to_string(m.description_provenance);
    node["scoring"] = {{"kind", to_string(m.scoring.kind)}, {"rubric", m.scoring.rubric}};
    node["actionable"] = to_string(m.actionable);
    node["method"] = m.method;
    node["data_source"] = m.data_source;
    root["metrics"].push_back(std::move(node));
  }
  return root.dump(2) + "\n";
}

const MetricRegistry& default_registry() {
  static const MetricRegistry registry = load_registry(detail::kDefaultRegistryJson);
  return registry;
}

}  // namespace walkeval
