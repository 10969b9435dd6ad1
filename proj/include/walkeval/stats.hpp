#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "walkeval/special_functions.hpp"

namespace walkeval::stats {

struct SampleGroup {
  std::string label;
  std::vector<double> values;
};

enum class LeveneCenter { mean, median };

struct TestResult {
  double statistic = 0.0;
  /// One entry (chi-squared) or two (F numerator, denominator).
  std::vector<double> df;
  double p_value = 1.0;
  std::string method;
};

struct PairwiseResult {
  std::pair<std::string, std::string> pair;
  /// mean(first) - mean(second)
  double mean_difference = 0.0;
  double standard_error = 0.0;
  double df = 0.0;
  double q_statistic = 0.0;
  double p_value = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Levene's test on absolute deviations from the group mean (or median,
/// i.e. Brown-Forsythe). Needs >= 2 groups of >= 2 values. Throws TooSmall,
/// DegenerateVariance.
TestResult levene(std::span<const SampleGroup> groups, LeveneCenter center = LeveneCenter::mean);

/// Welch's heteroscedastic one-way ANOVA. Throws TooSmall,
/// DegenerateVariance (a group with zero variance).
TestResult welch_anova(std::span<const SampleGroup> groups);

/// Games-Howell pairwise comparisons, k(k-1)/2 results in (i, j), i < j
/// order. Confidence intervals have level 1 - alpha.
std::vector<PairwiseResult> games_howell(std::span<const SampleGroup> groups, double alpha = 0.05);

/// Kruskal-Wallis H with mid-ranks and tie correction. Throws TooSmall,
/// DegenerateVariance (all values identical).
TestResult kruskal_wallis(std::span<const SampleGroup> groups);

double mean(std::span<const double> values);
/// Unbiased sample variance (n - 1 denominator).
double variance(std::span<const double> values);
double median(std::span<const double> values);
/// Linear interpolation between order statistics (type 7), 0 <= p <= 1.
double quantile(std::span<const double> values, double p);

/// Mid-ranks (1-based) of `values` within themselves.
std::vector<double> mid_ranks(std::span<const double> values);

using special::chisq_cdf;
using special::f_cdf;
using special::studentized_range_cdf;
using special::studentized_range_quantile;

}  // namespace walkeval::stats
