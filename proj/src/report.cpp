#include "walkeval/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "walkeval/error.hpp"

namespace walkeval {

namespace {

// Running mean per image id.
class ImageMeans {
 public:
  void add(const std::string& image_id, double value) {
    auto& cell = cells_[image_id];
    cell.first += value;
    cell.second += 1;
  }

  std::vector<ImageScore> scores() const {
    std::vector<ImageScore> out;
    out.reserve(cells_.size());
    for (const auto& [id, cell] : cells_) out.push_back({id, cell.first / static_cast<double>(cell.second)});
    return out;
  }

  std::vector<double> values() const {
    std::vector<double> out;
    for (const auto& s : scores()) out.push_back(s.score);
    return out;
  }

  bool empty() const { return cells_.empty(); }

 private:
  std::map<std::string, std::pair<double, int>> cells_;
};

const std::string& street_of(const StreetAssignment& assignment, const std::string& image_id) {
  auto it = assignment.find(image_id);
  if (it == assignment.end()) throw UnassignedImage(image_id);
  return it->second;
}

stats::TestResult degenerate_kw(std::size_t groups) {
  stats::TestResult r;
  r.method = "kruskal_wallis";
  r.statistic = 0.0;
  r.df = {static_cast<double>(groups - 1)};
  r.p_value = 1.0;
  return r;
}

constexpr std::array<ExpertiseLevel, 3> kMetricLevels{ExpertiseLevel::c2, ExpertiseLevel::c3, ExpertiseLevel::c4};

}  // namespace

std::string_view to_string(ExtremeKind kind) { return kind == ExtremeKind::max ? "max" : "min"; }

std::vector<ImageScore> image_scores(std::span<const EvaluationRecord> records, ExpertiseLevel level,
                                     std::string_view criterion) {
  ImageMeans means;
  for (const auto& r : records) {
    if (r.level != level) continue;
    auto it = r.criterion_scores.find(std::string(criterion));
    if (it != r.criterion_scores.end()) means.add(r.image_id, it->second);
  }
  return means.scores();
}

std::vector<std::string> criteria_present(std::span<const EvaluationRecord> records,
                                          const MetricRegistry& registry) {
  std::set<std::string> seen;
  for (const auto& r : records) {
    for (const auto& [criterion, score] : r.criterion_scores) seen.insert(criterion);
  }
  std::vector<std::string> out;
  for (const auto& c : registry.criteria()) {
    if (seen.erase(c) > 0) out.push_back(c);
  }
  out.insert(out.end(), seen.begin(), seen.end());
  return out;
}

std::vector<ExpertiseLevel> levels_present(std::span<const EvaluationRecord> records) {
  std::set<int> seen;
  for (const auto& r : records) seen.insert(to_int(r.level));
  std::vector<ExpertiseLevel> out;
  for (int l : seen) out.push_back(level_from_int(l));
  return out;
}

std::vector<StreetAverage> street_averages(std::span<const EvaluationRecord> records,
                                           const StreetAssignment& assignment) {
  if (records.empty()) throw EmptyInput("street_averages: no records");
  std::map<std::tuple<std::string, int, std::string>, ImageMeans> cells;
  for (const auto& r : records) {
    const auto& street = street_of(assignment, r.image_id);
    for (const auto& [criterion, score] : r.criterion_scores) {
      cells[{street, to_int(r.level), criterion}].add(r.image_id, score);
    }
  }
  std::vector<StreetAverage> out;
  for (const auto& [key, means] : cells) {
    const auto values = means.values();
    out.push_back({std::get<0>(key), level_from_int(std::get<1>(key)), std::get<2>(key), values.size(),
                   stats::mean(values)});
  }
  return out;
}

std::vector<Extreme> extremes(std::span<const EvaluationRecord> records, std::span<const ExpertiseLevel> levels,
                              std::span<const std::string> criteria) {
  std::vector<Extreme> out;
  for (auto level : levels) {
    for (const auto& criterion : criteria) {
      const auto scores = image_scores(records, level, criterion);
      if (scores.empty()) throw EmptyCell(to_int(level), criterion);
      // Scores are in id order, so the first strict improvement wins ties.
      const ImageScore* best = &scores.front();
      const ImageScore* worst = &scores.front();
      for (const auto& s : scores) {
        if (s.score > best->score) best = &s;
        if (s.score < worst->score) worst = &s;
      }
      auto ties = [&](const ImageScore* pick) {
        return std::count_if(scores.begin(), scores.end(), [&](const ImageScore& s) { return s.score == pick->score; }) > 1;
      };
      out.push_back({level, criterion, ExtremeKind::max, best->image_id, best->score, ties(best)});
      out.push_back({level, criterion, ExtremeKind::min, worst->image_id, worst->score, ties(worst)});
    }
  }
  return out;
}

std::vector<Extreme> extremes(std::span<const EvaluationRecord> records) {
  std::vector<Extreme> out;
  std::set<std::string> criteria;
  for (const auto& r : records) {
    for (const auto& [criterion, score] : r.criterion_scores) criteria.insert(criterion);
  }
  for (auto level : levels_present(records)) {
    for (const auto& criterion : criteria) {
      if (image_scores(records, level, criterion).empty()) continue;
      const std::array<ExpertiseLevel, 1> one_level{level};
      const std::array<std::string, 1> one_criterion{criterion};
      auto cell = extremes(records, one_level, one_criterion);
      out.insert(out.end(), cell.begin(), cell.end());
    }
  }
  return out;
}

ModelComparison model_comparison(std::span<const EvaluationRecord> records, std::string_view criterion,
                                 const ComparisonOptions& options) {
  ModelComparison result;
  result.criterion = std::string(criterion);
  std::vector<stats::SampleGroup> groups;
  for (auto level : levels_present(records)) {
    const auto scores = image_scores(records, level, criterion);
    if (scores.empty()) continue;
    stats::SampleGroup g{model_label(level), {}};
    for (const auto& s : scores) g.values.push_back(s.score);
    result.groups.push_back(g.label);
    groups.push_back(std::move(g));
  }
  if (groups.size() < 2) {
    throw TooSmall(fmt::format("model_comparison: criterion '{}' is scored at {} level(s), needs 2", criterion,
                               groups.size()));
  }
  result.levene = stats::levene(groups, options.levene_center);
  result.overall = stats::welch_anova(groups);
  result.pairs = stats::games_howell(groups, options.alpha);
  return result;
}

std::string format_p(double p) {
  if (p < 0.01) return "<0.01***";
  if (p < 0.05) return fmt::format("{:.2f}**", p);
  if (p < 0.10) return fmt::format("{:.2f}*", p);
  return fmt::format("{:.2f}", p);
}

DivergenceRanking metric_divergence(std::span<const EvaluationRecord> records, const MetricRegistry& registry,
                                    std::string_view criterion, std::size_t top_n) {
  if (top_n < 1) throw DomainError("top_n must be >= 1");
  DivergenceRanking ranking;
  ranking.criterion = std::string(criterion);

  const auto present = levels_present(records);
  for (auto level : kMetricLevels) {
    if (std::find(present.begin(), present.end(), level) == present.end()) {
      throw TooSmall(fmt::format("metric_divergence needs records at level {}", to_int(level)));
    }
  }

  // quantified name -> per-level image means
  std::map<std::string, std::array<ImageMeans, 3>> by_metric;
  std::set<std::string> unknown;
  for (const auto& r : records) {
    const auto level_it = std::find(kMetricLevels.begin(), kMetricLevels.end(), r.level);
    if (level_it == kMetricLevels.end()) continue;
    const auto slot = static_cast<std::size_t>(level_it - kMetricLevels.begin());
    for (const auto& [name, score] : metric_scores_for(r, criterion)) {
      const auto* spec = registry.find(criterion, name, naming_for(r.level));
      if (spec == nullptr) {
        unknown.insert(name);
        continue;
      }
      by_metric[spec->quantified_name][slot].add(r.image_id, score);
    }
  }
  for (const auto& name : unknown) {
    ranking.warnings.push_back(fmt::format("{}.{}: not in the registry, ignored", criterion, name));
  }

  for (const auto& spec : registry.metrics_for(criterion, Naming::quantified)) {
    auto it = by_metric.find(spec.name);
    if (it == by_metric.end()) {
      ranking.warnings.push_back(fmt::format("{}.{}: no scores at levels 2-4, excluded", criterion, spec.name));
      continue;
    }
    MetricDivergence row{spec.name, spec.metric.vague_name, {}, {}};
    std::vector<stats::SampleGroup> groups;
    bool complete = true;
    for (std::size_t i = 0; i < kMetricLevels.size(); ++i) {
      auto values = it->second[i].values();
      row.sizes[i] = values.size();
      if (values.empty()) complete = false;
      groups.push_back({model_label(kMetricLevels[i]), std::move(values)});
    }
    if (!complete) {
      ranking.warnings.push_back(
          fmt::format("{}.{}: not scored at every level 2-4, excluded", criterion, spec.name));
      continue;
    }
    try {
      row.test = stats::kruskal_wallis(groups);
    } catch (const DegenerateVariance&) {
      row.test = degenerate_kw(groups.size());
    }
    ranking.rows.push_back(std::move(row));
  }

  std::sort(ranking.rows.begin(), ranking.rows.end(), [](const MetricDivergence& a, const MetricDivergence& b) {
    if (a.test.statistic != b.test.statistic) return a.test.statistic > b.test.statistic;
    return a.metric < b.metric;
  });
  if (ranking.rows.size() > top_n) ranking.rows.resize(top_n);
  return ranking;
}

std::vector<DistributionSummary> distribution_summary(std::span<const EvaluationRecord> records,
                                                      const MetricRegistry& registry) {
  std::vector<DistributionSummary> out;
  const auto criteria = criteria_present(records, registry);
  for (auto level : levels_present(records)) {
    for (const auto& criterion : criteria) {
      const auto scores = image_scores(records, level, criterion);
      if (scores.empty()) continue;
      DistributionSummary s;
      s.level = level;
      s.criterion = criterion;
      for (const auto& score : scores) s.values.push_back(score.score);
      s.n = s.values.size();
      s.mean = stats::mean(s.values);
      s.min = *std::min_element(s.values.begin(), s.values.end());
      s.max = *std::max_element(s.values.begin(), s.values.end());
      s.q1 = stats::quantile(s.values, 0.25);
      s.median = stats::quantile(s.values, 0.5);
      s.q3 = stats::quantile(s.values, 0.75);
      if (s.n >= 2) {
        s.sd = std::sqrt(stats::variance(s.values));
        const double half = special::t_quantile(0.975, static_cast<double>(s.n - 1)) * *s.sd /
                            std::sqrt(static_cast<double>(s.n));
        s.ci_low = s.mean - half;
        s.ci_high = s.mean + half;
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

InterventionView intervention_view(std::span<const EvaluationRecord> records, const StreetAssignment& assignment,
                                   const MetricRegistry& registry, double threshold,
                                   std::optional<ExpertiseLevel> level) {
  if (!(threshold >= 1.0 && threshold <= 5.0)) {
    throw DomainError(fmt::format("threshold must lie in [1, 5], got {}", threshold));
  }
  InterventionView view;
  view.threshold = threshold;

  if (!level) {
    for (const auto& r : records) {
      if (!r.metric_scores.empty() && (!level || to_int(r.level) > to_int(*level))) level = r.level;
    }
  }
  if (!level) {
    view.warnings.push_back("no metric-level records; intervention view is empty");
    return view;
  }

  for (const auto& r : records) street_of(assignment, r.image_id);

  for (const auto& criterion : registry.criteria()) {
    const auto subset = registry.actionable_subset(criterion);
    if (subset.actionable.empty()) {
      view.warnings.push_back(fmt::format("{}: no metric is flagged actionable", criterion));
      for (const auto& m : subset.unspecified) {
        view.warnings.push_back(
            fmt::format("{}.{}: actionability unspecified, excluded", criterion, m.name(naming_for(*level))));
      }
      continue;
    }
    // (street, metric name) -> per-image means
    std::map<std::string, std::map<std::string, ImageMeans>> by_street;
    for (const auto& r : records) {
      if (r.level != *level) continue;
      const auto scores = metric_scores_for(r, criterion);
      const auto& street = street_of(assignment, r.image_id);
      for (const auto& m : subset.actionable) {
        auto it = scores.find(m.name(naming_for(*level)));
        if (it != scores.end()) by_street[street][m.quantified_name].add(r.image_id, it->second);
      }
    }
    for (const auto& [street, metrics] : by_street) {
      for (const auto& m : subset.actionable) {
        auto it = metrics.find(m.quantified_name);
        if (it == metrics.end()) continue;
        const auto values = it->second.values();
        const double mean = stats::mean(values);
        if (mean < threshold) view.items.push_back({street, criterion, m.quantified_name, *level, values.size(), mean});
      }
    }
  }
  std::stable_sort(view.items.begin(), view.items.end(),
                   [](const InterventionItem& a, const InterventionItem& b) { return a.street < b.street; });
  return view;
}

ReportBundle build_report(std::span<const EvaluationRecord> records, const StreetAssignment& assignment,
                          const MetricRegistry& registry, const ReportOptions& options) {
  if (records.empty()) throw EmptyInput("no records to report on");
  ReportBundle bundle;
  bundle.criteria = criteria_present(records, registry);
  bundle.street_averages = street_averages(records, assignment);
  bundle.extremes = extremes(records);

  const auto levels = levels_present(records);
  const bool metric_levels = std::all_of(kMetricLevels.begin(), kMetricLevels.end(), [&](ExpertiseLevel l) {
    return std::find(levels.begin(), levels.end(), l) != levels.end();
  });
  for (const auto& criterion : bundle.criteria) {
    try {
      bundle.model_comparison.push_back(model_comparison(records, criterion, options.comparison));
    } catch (const ValidationError& e) {
      bundle.warnings.push_back(fmt::format("model_comparison {}: {}", criterion, e.what()));
    }
    if (!registry.has_criterion(criterion)) {
      bundle.warnings.push_back(fmt::format("metric_divergence {}: criterion not in the registry", criterion));
    } else if (!metric_levels) {
      bundle.warnings.push_back(fmt::format("metric_divergence {}: needs records at levels 2, 3 and 4", criterion));
    } else {
      bundle.metric_divergence.push_back(metric_divergence(records, registry, criterion, options.top_n));
    }
  }
  bundle.distribution_summary = distribution_summary(records, registry);
  bundle.intervention_view =
      intervention_view(records, assignment, registry, options.threshold, options.intervention_level);
  return bundle;
}

}  // namespace walkeval
