#include "walkeval/parser.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <optional>

#include <fmt/format.h>
#include <json.hpp>

#include "walkeval/error.hpp"

namespace walkeval {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string normalize_name(std::string_view name) {
  std::string out;
  for (unsigned char c : name) {
    if (!std::isspace(c)) out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::string_view strip_markup(std::string_view s) {
  s = trim(s);
  auto strip_edges = [&](std::string_view marks) {
    while (!s.empty() && marks.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
    while (!s.empty() && marks.find(s.back()) != std::string_view::npos) s.remove_suffix(1);
    s = trim(s);
  };
  strip_edges("*_`#>");
  return s;
}

// Removes list markers such as "-", "*", "•", "3." or "3)".
std::string_view strip_list_marker(std::string_view s) {
  s = trim(s);
  for (std::string_view bullet : {"- ", "* ", "+ ", "\xE2\x80\xA2 "}) {
    if (s.starts_with(bullet)) return trim(s.substr(bullet.size()));
  }
  std::size_t digits = 0;
  while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
  if (digits > 0 && digits + 1 < s.size() && (s[digits] == '.' || s[digits] == ')') && s[digits + 1] == ' ') {
    return trim(s.substr(digits + 2));
  }
  return s;
}

bool is_name_like(std::string_view name) {
  if (name.empty() || name.size() > 120 || !std::isalpha(static_cast<unsigned char>(name.front()))) return false;
  return std::all_of(name.begin(), name.end(), [](unsigned char c) {
    return std::isalnum(c) || c == ' ' || c == '.' || c == '_';
  });
}

bool starts_with_any(std::string_view s, std::initializer_list<std::string_view> prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](std::string_view p) { return s.starts_with(p); });
}

struct ScoreLine {
  std::string name;
  std::string normalized;
  std::optional<long long> value;
  std::string raw_value;  // set when the value is not an integer
  std::string rationale;
};

// Returns a candidate score line, or nullopt for prose.
std::optional<ScoreLine> scan_line(std::string_view line) {
  line = strip_list_marker(line);
  const auto colon = line.find(':');
  if (colon == std::string_view::npos) return std::nullopt;

  const std::string_view name = strip_markup(line.substr(0, colon));
  if (!is_name_like(name)) return std::nullopt;

  std::string_view rest = strip_markup(line.substr(colon + 1));
  // strip_markup may eat a leading list dash only if it is markup; numbers are untouched.
  std::size_t pos = 0;
  if (pos < rest.size() && (rest[pos] == '-' || rest[pos] == '+')) ++pos;
  const std::size_t digits_begin = pos;
  while (pos < rest.size() && std::isdigit(static_cast<unsigned char>(rest[pos]))) ++pos;
  if (pos == digits_begin) return std::nullopt;

  ScoreLine out;
  out.name = std::string(name);
  out.normalized = normalize_name(name);

  // Decimal scores are rejected, not rounded.
  if (pos + 1 < rest.size() && (rest[pos] == '.' || rest[pos] == ',') &&
      std::isdigit(static_cast<unsigned char>(rest[pos + 1]))) {
    std::size_t end = pos + 1;
    while (end < rest.size() && std::isdigit(static_cast<unsigned char>(rest[end]))) ++end;
    out.raw_value = std::string(rest.substr(0, end));
    return out;
  }

  long long value = 0;
  const char* first = rest.data() + (rest[0] == '+' ? 1 : 0);
  auto [ptr, ec] = std::from_chars(first, rest.data() + pos, value);
  if (ec != std::errc{}) {
    out.raw_value = std::string(rest.substr(0, pos));
    return out;
  }

  std::string_view tail = trim(rest.substr(pos));
  if (tail.starts_with("/")) {  // "4/5"
    std::size_t i = 1;
    while (i < tail.size() && std::isspace(static_cast<unsigned char>(tail[i]))) ++i;
    const std::size_t d = i;
    while (i < tail.size() && std::isdigit(static_cast<unsigned char>(tail[i]))) ++i;
    if (i == d) return std::nullopt;
    tail = trim(tail.substr(i));
  }
  tail = strip_markup(tail);
  if (!tail.empty()) {
    if (!starts_with_any(tail, {"-", "\xE2\x80\x93", "\xE2\x80\x94", "(", ";", ",", ".", "|", ":"})) {
      return std::nullopt;
    }
    while (!tail.empty() && starts_with_any(tail, {"-", ";", ",", ".", "|", ":"})) tail = trim(tail.substr(1));
    while (starts_with_any(tail, {"\xE2\x80\x93", "\xE2\x80\x94"})) tail = trim(tail.substr(3));
  }
  out.value = value;
  out.rationale = std::string(tail);
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

struct Slot {
  std::string key;
  std::string criterion;
  ScoringKind kind = ScoringKind::graded;
  std::optional<long long> value;
  std::string rationale;
};

bool in_range(long long value, ScoreRange range) { return value >= range.low && value <= range.high; }

EvaluationRecord base_record(const RawResponse& raw, const PromptBundle& bundle, std::string_view image_id) {
  EvaluationRecord record;
  record.image_id = std::string(image_id);
  record.level = bundle.level;
  record.replicate = raw.key.replicate;
  record.raw_ref = raw.key;
  return record;
}

void assign(Slot& slot, const ScoreLine& line) {
  if (slot.value && *slot.value != *line.value) {
    throw AmbiguousScore(slot.key, *slot.value, *line.value);
  }
  if (!slot.value) {
    slot.value = line.value;
    slot.rationale = line.rationale;
  }
}

}  // namespace

ParseOutcome parse_level1(const RawResponse& raw, const PromptBundle& bundle, std::string_view image_id) {
  if (bundle.level != ExpertiseLevel::c1) {
    throw ValidationError("parse_level1 needs a level-1 bundle");
  }
  std::vector<Slot> slots;
  for (const auto& criterion : bundle.criteria) slots.push_back({criterion, criterion, ScoringKind::graded, std::nullopt, {}});

  for (auto line : split_lines(raw.text)) {
    auto scanned = scan_line(line);
    if (!scanned) continue;
    auto slot = std::find_if(slots.begin(), slots.end(),
                             [&](const Slot& s) { return normalize_name(s.key) == scanned->normalized; });
    if (slot == slots.end()) {
      if (scanned->normalized == "aggregate") continue;
      throw UnknownMetric(scanned->name);
    }
    if (!scanned->value) throw NonIntegerScore(slot->key, scanned->raw_value);
    if (!in_range(*scanned->value, bundle.score_range)) throw ScoreOutOfRange(slot->key, *scanned->value);
    assign(*slot, *scanned);
  }

  std::vector<std::string> missing;
  for (const auto& s : slots) {
    if (!s.value) missing.push_back(s.key);
  }
  if (!missing.empty()) throw MissingMetrics(std::move(missing));

  ParseOutcome outcome{base_record(raw, bundle, image_id), {}};
  for (const auto& s : slots) {
    outcome.record.criterion_scores[s.criterion] = static_cast<int>(*s.value);
    if (!s.rationale.empty()) outcome.record.rationales[s.key] = s.rationale;
  }
  return outcome;
}

ParseOutcome parse(const RawResponse& raw, const PromptBundle& bundle, std::string_view image_id) {
  if (bundle.level == ExpertiseLevel::c1) return parse_level1(raw, bundle, image_id);

  std::vector<Slot> slots;
  std::map<std::string, std::size_t> by_name;
  for (std::size_t i = 0; i < bundle.expected_metrics.size(); ++i) {
    slots.push_back({bundle.expected_metrics[i], bundle.metric_criteria.at(i), bundle.metric_kinds.at(i), std::nullopt, {}});
    by_name.emplace(normalize_name(bundle.expected_metrics[i]), i);
  }
  std::map<std::string, std::string> aggregate_names;  // normalized key -> criterion
  for (const auto& criterion : bundle.criteria) {
    aggregate_names.emplace(normalize_name(aggregate_key(criterion, bundle.criteria.size())), criterion);
  }

  std::vector<std::string> warnings;
  std::map<std::string, long long> reported_aggregates;
  for (auto line : split_lines(raw.text)) {
    auto scanned = scan_line(line);
    if (!scanned) continue;

    if (auto agg = aggregate_names.find(scanned->normalized); agg != aggregate_names.end()) {
      if (scanned->value) reported_aggregates[agg->second] = *scanned->value;
      continue;
    }
    if (scanned->normalized == "aggregate") {
      warnings.push_back("unqualified AGGREGATE line in a multi-criterion response ignored");
      continue;
    }

    auto it = by_name.find(scanned->normalized);
    if (it == by_name.end()) throw UnknownMetric(scanned->name);
    Slot& slot = slots[it->second];
    if (!scanned->value) throw NonIntegerScore(slot.key, scanned->raw_value);
    const long long value = *scanned->value;
    if (!in_range(value, bundle.score_range)) throw ScoreOutOfRange(slot.key, value);
    // The presence rubric is only stated in level-4 prompts.
    if (bundle.level == ExpertiseLevel::c4 && slot.kind == ScoringKind::presence && value != 1 && value != 5) {
      throw ScoreOutOfRange(slot.key, value);
    }
    assign(slot, *scanned);
  }

  std::vector<std::string> missing;
  for (const auto& s : slots) {
    if (!s.value) missing.push_back(s.key);
  }
  if (!missing.empty()) throw MissingMetrics(std::move(missing));

  ParseOutcome outcome{base_record(raw, bundle, image_id), std::move(warnings)};
  auto& record = outcome.record;
  for (const auto& criterion : bundle.criteria) record.criterion_scores[criterion] = 0;
  for (const auto& s : slots) {
    record.metric_scores[s.key] = static_cast<int>(*s.value);
    record.criterion_scores[s.criterion] += static_cast<int>(*s.value);
    if (!s.rationale.empty()) record.rationales[s.key] = s.rationale;
  }
  for (const auto& [criterion, reported] : reported_aggregates) {
    const int recomputed = record.criterion_scores.at(criterion);
    if (reported != recomputed) {
      outcome.warnings.push_back(fmt::format("{}: reported aggregate {} differs from recomputed sum {}; using {}",
                                             criterion, reported, recomputed, recomputed));
    }
  }
  return outcome;
}

std::string render_response(const EvaluationRecord& record, const PromptBundle& bundle) {
  std::string out;
  auto line = [&](const std::string& key, int value) {
    auto r = record.rationales.find(key);
    if (r != record.rationales.end() && !r->second.empty()) {
      out += fmt::format("{}: {} - {}\n", key, value, r->second);
    } else {
      out += fmt::format("{}: {}\n", key, value);
    }
  };
  if (bundle.level == ExpertiseLevel::c1) {
    for (const auto& criterion : bundle.criteria) line(criterion, record.criterion_scores.at(criterion));
    return out;
  }
  for (const auto& key : bundle.expected_metrics) line(key, record.metric_scores.at(key));
  for (const auto& criterion : bundle.criteria) {
    out += fmt::format("{}: {}\n", aggregate_key(criterion, bundle.criteria.size()),
                       record.criterion_scores.at(criterion));
  }
  return out;
}

std::map<std::string, int> metric_scores_for(const EvaluationRecord& record, std::string_view criterion) {
  std::map<std::string, int> out;
  if (!record.criterion_scores.contains(std::string(criterion))) return out;
  if (record.criterion_scores.size() == 1) return record.metric_scores;
  const std::string prefix = std::string(criterion) + ".";
  for (const auto& [key, value] : record.metric_scores) {
    if (key.starts_with(prefix)) out.emplace(key.substr(prefix.size()), value);
  }
  return out;
}

std::string record_to_json(const EvaluationRecord& record) {
  ordered_json j;
  j["image_id"] = record.image_id;
  j["level"] = to_int(record.level);
  j["replicate"] = record.replicate;
  j["criterion_scores"] = ordered_json::object();
  for (const auto& [k, v] : record.criterion_scores) j["criterion_scores"][k] = v;
  j["metric_scores"] = ordered_json::object();
  for (const auto& [k, v] : record.metric_scores) j["metric_scores"][k] = v;
  j["rationales"] = ordered_json::object();
  for (const auto& [k, v] : record.rationales) j["rationales"][k] = v;
  j["raw_ref"] = {{"image_digest", record.raw_ref.image_digest},
                  {"prompt_digest", record.raw_ref.prompt_digest},
                  {"level", to_int(record.raw_ref.level)},
                  {"replicate", record.raw_ref.replicate}};
  return j.dump();
}

EvaluationRecord record_from_json(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0, e.byte);
  }
  try {
    EvaluationRecord r;
    r.image_id = j.at("image_id").get<std::string>();
    r.level = level_from_int(j.at("level").get<int>());
    r.replicate = j.at("replicate").get<int>();
    r.criterion_scores = j.at("criterion_scores").get<std::map<std::string, int>>();
    r.metric_scores = j.at("metric_scores").get<std::map<std::string, int>>();
    r.rationales = j.at("rationales").get<std::map<std::string, std::string>>();
    const auto& ref = j.at("raw_ref");
    r.raw_ref.image_digest = ref.at("image_digest").get<std::string>();
    r.raw_ref.prompt_digest = ref.at("prompt_digest").get<std::string>();
    r.raw_ref.level = level_from_int(ref.at("level").get<int>());
    r.raw_ref.replicate = ref.at("replicate").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(fmt::format("malformed record: {}", e.what()));
  }
}

void write_records(const std::filesystem::path& path, std::span<const EvaluationRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

std::vector<EvaluationRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read records '{}'", path.string()));
  std::vector<EvaluationRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    records.push_back(record_from_json(line));
  }
  return records;
}

}  // namespace walkeval
