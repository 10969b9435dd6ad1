// Studentized range distribution
//
//   P(Q <= q) = int_0^inf f_S(s; df) W(q s) ds,
//   W(w)      = k int phi(z) [Phi(z) - Phi(z - w)]^(k-1) dz,
//
// where S = sqrt(chi2_df / df). The outer integral runs in t = log(s) over the
// central 1 - 2e-15 mass of S. Panels are refined against the mixing density
// alone and the inner rule is fixed, so every quadrature weight is positive
// and independent of q: the computed CDF is nondecreasing in q.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "walkeval/error.hpp"
#include "walkeval/special_functions.hpp"

namespace walkeval::special {

namespace {

constexpr int kOrder = 64;
constexpr double kInfiniteDf = 1e6;
constexpr double kTailMass = 1e-15;
constexpr double kPanelTolerance = 1e-10;
constexpr double kInnerHalfWidth = 8.75;
constexpr int kInnerPanels = 4;

struct GaussLegendre {
  std::array<double, kOrder> nodes{};    // on [-1, 1]
  std::array<double, kOrder> weights{};

  GaussLegendre() {
    for (int i = 0; i < kOrder / 2; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (kOrder + 0.5));
      double derivative = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = 0.0;
        for (int j = 1; j <= kOrder; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p2) / j;
        }
        derivative = kOrder * (x * p0 - p1) / (x * x - 1.0);
        const double step = p0 / derivative;
        x -= step;
        if (std::fabs(step) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[kOrder - 1 - i] = x;
      weights[i] = weights[kOrder - 1 - i] = 2.0 / ((1.0 - x * x) * derivative * derivative);
    }
  }
};

const GaussLegendre& rule() {
  static const GaussLegendre gl;
  return gl;
}

template <class F>
double integrate_panel(const F& f, double a, double b) {
  const auto& gl = rule();
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double sum = 0.0;
  for (int i = 0; i < kOrder; ++i) sum += gl.weights[i] * f(mid + half * gl.nodes[i]);
  return sum * half;
}

struct Panel {
  double a;
  double b;
};

// Splits [a, b] until halving a panel changes its integral by less than tol.
template <class F>
void refine(const F& f, double a, double b, double whole, double tol, int depth, std::vector<Panel>& out) {
  const double mid = 0.5 * (a + b);
  const double left = integrate_panel(f, a, mid);
  const double right = integrate_panel(f, mid, b);
  if (depth <= 0 || std::fabs(left + right - whole) < tol) {
    out.push_back({a, mid});
    out.push_back({mid, b});
    return;
  }
  refine(f, a, mid, left, tol / 2, depth - 1, out);
  refine(f, mid, b, right, tol / 2, depth - 1, out);
}

// Inner rule for W(w): fixed panels over |z| <= 8.75 with phi(z) and Phi(z)
// precomputed at the nodes.
struct InnerRule {
  std::vector<double> z;
  std::vector<double> weighted_pdf;
  std::vector<double> cdf;

  InnerRule() {
    const auto& gl = rule();
    const double width = 2.0 * kInnerHalfWidth / kInnerPanels;
    for (int p = 0; p < kInnerPanels; ++p) {
      const double a = -kInnerHalfWidth + p * width;
      const double mid = a + 0.5 * width;
      for (int i = 0; i < kOrder; ++i) {
        const double x = mid + 0.5 * width * gl.nodes[i];
        z.push_back(x);
        weighted_pdf.push_back(0.5 * width * gl.weights[i] * normal_pdf(x));
        cdf.push_back(normal_cdf(x));
      }
    }
  }
};

const InnerRule& inner_rule() {
  static const InnerRule r;
  return r;
}

double range_of_normals_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  const auto& r = inner_rule();
  double sum = 0.0;
  for (std::size_t i = 0; i < r.z.size(); ++i) {
    const double inside = r.cdf[i] - normal_cdf(r.z[i] - w);
    if (inside > 0.0) sum += r.weighted_pdf[i] * std::pow(inside, k - 1);
  }
  return std::min(1.0, k * sum);
}

// x with P(chi2_df <= x) = p (lower) or P(chi2_df > x) = p (upper).
double chisq_tail_point(double df, double p, bool upper) {
  double lo = std::log(1e-300);
  double hi = std::log(std::max(1e4, 100.0 * df));
  auto mass = [&](double log_x) {
    const double x = std::exp(log_x);
    return upper ? chisq_sf(x, df) : chisq_cdf(x, df);
  };
  for (int i = 0; i < 200 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double m = mass(mid);
    if (upper) {
      (m > p ? lo : hi) = mid;
    } else {
      (m < p ? lo : hi) = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

class StudentizedRange {
 public:
  StudentizedRange(int k, double df) : k_(k), df_(df) {
    if (k < 2) throw DomainError(fmt::format("k must be >= 2, got {}", k));
    if (!(df > 0.0)) throw DomainError(fmt::format("df must be > 0, got {}", df));
    if (df >= kInfiniteDf) return;

    const double half_df = 0.5 * df;
    int sign = 0;
    const double log_norm = half_df * std::log(half_df) + std::log(2.0) - ::lgamma_r(half_df, &sign);
    // Density of log(S): f_S(e^t) e^t.
    auto density = [=](double t) {
      const double s2 = std::exp(2.0 * t);
      return std::exp(log_norm + df * t - half_df * s2);
    };

    const double t_lo = 0.5 * std::log(chisq_tail_point(df, kTailMass, false) / df);
    const double t_hi = 0.5 * std::log(chisq_tail_point(df, kTailMass, true) / df);
    upper_mass_ = chisq_sf(df * std::exp(2.0 * t_hi), df);

    std::vector<Panel> panels;
    constexpr int kInitial = 2;
    const double width = (t_hi - t_lo) / kInitial;
    for (int p = 0; p < kInitial; ++p) {
      const double a = t_lo + p * width;
      const double b = a + width;
      refine(density, a, b, integrate_panel(density, a, b), kPanelTolerance, 20, panels);
    }

    const auto& gl = rule();
    for (const auto& panel : panels) {
      const double half = 0.5 * (panel.b - panel.a);
      const double mid = 0.5 * (panel.a + panel.b);
      for (int i = 0; i < kOrder; ++i) {
        const double t = mid + half * gl.nodes[i];
        const double weight = half * gl.weights[i] * density(t);
        if (weight > 0.0) nodes_.push_back({std::exp(t), weight});
      }
    }
  }

  double cdf(double q) const {
    if (std::isnan(q) || q < 0.0) throw DomainError(fmt::format("q must be >= 0, got {}", q));
    if (q == 0.0) return 0.0;
    if (std::isinf(q)) return 1.0;
    if (df_ >= kInfiniteDf) return range_of_normals_cdf(q, k_);
    double sum = upper_mass_ * range_of_normals_cdf(q * nodes_.back().s, k_);
    for (const auto& node : nodes_) sum += node.weight * range_of_normals_cdf(q * node.s, k_);
    return std::clamp(sum, 0.0, 1.0);
  }

 private:
  struct Node {
    double s;
    double weight;
  };

  int k_;
  double df_;
  double upper_mass_ = 0.0;
  std::vector<Node> nodes_;
};

}  // namespace

double studentized_range_cdf(double q, int k, double df) {
  if (std::isnan(q) || q < 0.0) throw DomainError(fmt::format("q must be >= 0, got {}", q));
  return StudentizedRange(k, df).cdf(q);
}

double studentized_range_quantile(double p, int k, double df) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError(fmt::format("p must lie in (0, 1), got {}", p));
  const StudentizedRange dist(k, df);
  double lo = 0.0;
  double hi = 4.0;
  double f_lo = -p;
  double f_hi = dist.cdf(hi) - p;
  while (f_hi < 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    if (hi > 1e6) throw DomainError("studentized range quantile did not bracket");
    f_hi = dist.cdf(hi) - p;
  }
  // Illinois-modified regula falsi on the monotone CDF.
  int side = 0;
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < 200; ++i) {
    x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
    if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);
    const double fx = dist.cdf(x) - p;
    if (fx == 0.0) return x;
    if (fx < 0.0) {
      lo = x;
      f_lo = fx;
      if (side == -1) f_hi *= 0.5;
      side = -1;
    } else {
      hi = x;
      f_hi = fx;
      if (side == 1) f_lo *= 0.5;
      side = 1;
    }
    if (hi - lo < 1e-10 * std::max(1.0, hi)) return 0.5 * (lo + hi);
    if (std::fabs(fx) < 1e-13) return x;
  }
  return x;
}

}  // namespace walkeval::special
