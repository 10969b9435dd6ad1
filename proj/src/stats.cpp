#include "walkeval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "walkeval/error.hpp"

namespace walkeval::stats {

namespace {

void check_groups(std::span<const SampleGroup> groups, std::size_t min_size, const char* test) {
  if (groups.size() < 2) throw TooSmall(fmt::format("{} needs at least 2 groups, got {}", test, groups.size()));
  for (const auto& g : groups) {
    if (g.values.size() < min_size) {
      throw TooSmall(fmt::format("{}: group '{}' has {} values, needs at least {}", test, g.label, g.values.size(),
                                 min_size));
    }
    for (double v : g.values) {
      if (!std::isfinite(v)) throw DomainError(fmt::format("{}: group '{}' has a non-finite value", test, g.label));
    }
  }
}

void check_variances(std::span<const SampleGroup> groups, const char* test) {
  for (const auto& g : groups) {
    if (!(variance(g.values) > 0.0)) {
      throw DegenerateVariance(fmt::format("{}: group '{}' has zero variance", test, g.label));
    }
  }
}

}  // namespace

double mean(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double variance(std::span<const double> values) {
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

double quantile(std::span<const double> values, double p) {
  if (values.empty()) throw EmptyInput("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError(fmt::format("quantile level must lie in [0, 1], got {}", p));
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double median(std::span<const double> values) { return quantile(values, 0.5); }

std::vector<double> mid_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

TestResult levene(std::span<const SampleGroup> groups, LeveneCenter center) {
  check_groups(groups, 2, "levene");
  const std::size_t k = groups.size();

  std::vector<std::vector<double>> deviations;
  std::size_t total = 0;
  double grand_sum = 0.0;
  for (const auto& g : groups) {
    const double c = center == LeveneCenter::mean ? mean(g.values) : median(g.values);
    auto& z = deviations.emplace_back();
    for (double v : g.values) z.push_back(std::fabs(v - c));
    total += z.size();
    grand_sum += std::accumulate(z.begin(), z.end(), 0.0);
  }
  const double grand_mean = grand_sum / static_cast<double>(total);

  double between = 0.0;
  double within = 0.0;
  for (const auto& z : deviations) {
    const double zbar = mean(z);
    between += static_cast<double>(z.size()) * (zbar - grand_mean) * (zbar - grand_mean);
    for (double v : z) within += (v - zbar) * (v - zbar);
  }

  TestResult result;
  result.method = center == LeveneCenter::mean ? "levene" : "brown-forsythe";
  result.df = {static_cast<double>(k - 1), static_cast<double>(total - k)};
  // Relative cut-off so shifted or rescaled copies of a degenerate sample stay degenerate.
  const double scale = std::max(grand_mean * grand_mean, std::numeric_limits<double>::min());
  const double eps = 1e-24 * scale * static_cast<double>(total);
  if (within <= eps) {
    if (between <= eps) {
      throw DegenerateVariance("levene: every absolute deviation is identical");
    }
    result.statistic = std::numeric_limits<double>::infinity();
    result.p_value = 0.0;
    return result;
  }
  result.statistic = (static_cast<double>(total - k) / static_cast<double>(k - 1)) * between / within;
  result.p_value = special::f_sf(result.statistic, result.df[0], result.df[1]);
  return result;
}

TestResult welch_anova(std::span<const SampleGroup> groups) {
  check_groups(groups, 2, "welch_anova");
  check_variances(groups, "welch_anova");
  const double k = static_cast<double>(groups.size());

  std::vector<double> weights;
  std::vector<double> means;
  double weight_sum = 0.0;
  for (const auto& g : groups) {
    weights.push_back(static_cast<double>(g.values.size()) / variance(g.values));
    means.push_back(mean(g.values));
    weight_sum += weights.back();
  }
  double weighted_mean = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) weighted_mean += weights[i] * means[i];
  weighted_mean /= weight_sum;

  double spread = 0.0;
  double lambda = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    spread += weights[i] * (means[i] - weighted_mean) * (means[i] - weighted_mean);
    const double share = 1.0 - weights[i] / weight_sum;
    lambda += share * share / static_cast<double>(groups[i].values.size() - 1);
  }

  TestResult result;
  result.method = "welch_anova";
  result.statistic = (spread / (k - 1.0)) / (1.0 + 2.0 * (k - 2.0) / (k * k - 1.0) * lambda);
  result.df = {k - 1.0, (k * k - 1.0) / (3.0 * lambda)};
  result.p_value = special::f_sf(result.statistic, result.df[0], result.df[1]);
  return result;
}

std::vector<PairwiseResult> games_howell(std::span<const SampleGroup> groups, double alpha) {
  check_groups(groups, 2, "games_howell");
  check_variances(groups, "games_howell");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  const int k = static_cast<int>(groups.size());

  std::vector<PairwiseResult> results;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const auto& a = groups[i].values;
      const auto& b = groups[j].values;
      const double va = variance(a) / static_cast<double>(a.size());
      const double vb = variance(b) / static_cast<double>(b.size());

      PairwiseResult r;
      r.pair = {groups[i].label, groups[j].label};
      r.mean_difference = mean(a) - mean(b);
      r.standard_error = std::sqrt(va + vb);
      r.df = (va + vb) * (va + vb) /
             (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
      r.q_statistic = std::fabs(r.mean_difference) * std::sqrt(2.0) / r.standard_error;
      r.p_value = std::clamp(1.0 - special::studentized_range_cdf(r.q_statistic, k, r.df), 0.0, 1.0);
      const double half_width =
          special::studentized_range_quantile(1.0 - alpha, k, r.df) / std::sqrt(2.0) * r.standard_error;
      r.ci_low = r.mean_difference - half_width;
      r.ci_high = r.mean_difference + half_width;
      results.push_back(std::move(r));
    }
  }
  return results;
}

TestResult kruskal_wallis(std::span<const SampleGroup> groups) {
  check_groups(groups, 1, "kruskal_wallis");
  std::vector<double> pooled;
  for (const auto& g : groups) pooled.insert(pooled.end(), g.values.begin(), g.values.end());
  const double n = static_cast<double>(pooled.size());
  if (pooled.size() < 3) throw TooSmall("kruskal_wallis needs at least 3 observations");

  const auto ranks = mid_ranks(pooled);

  // Tie correction: sum over tie groups of t^3 - t.
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  const double correction = 1.0 - ties / (n * n * n - n);
  if (correction <= 0.0) throw DegenerateVariance("kruskal_wallis: every observation is identical");

  double h = 0.0;
  std::size_t offset = 0;
  const double centre = (n + 1.0) / 2.0;
  for (const auto& g : groups) {
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < g.values.size(); ++i) rank_sum += ranks[offset + i];
    const double size = static_cast<double>(g.values.size());
    const double rbar = rank_sum / size;
    h += size * (rbar - centre) * (rbar - centre);
    offset += g.values.size();
  }
  h *= 12.0 / (n * (n + 1.0));

  TestResult result;
  result.method = "kruskal_wallis";
  result.statistic = h / correction;
  result.df = {static_cast<double>(groups.size() - 1)};
  result.p_value = special::chisq_sf(result.statistic, result.df[0]);
  return result;
}

}  // namespace walkeval::stats
