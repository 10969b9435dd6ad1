#pragma once

namespace walkeval::special {

/// Regularized incomplete beta I_x(a, b), a, b > 0, 0 <= x <= 1.
double incomplete_beta(double a, double b, double x);

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double lower_gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double upper_gamma_q(double a, double x);

/// Standard normal CDF and density.
double normal_cdf(double z);
double normal_pdf(double z);

/// F distribution CDF / survival; throws DomainError on x < 0 or d <= 0.
double f_cdf(double x, double d1, double d2);
double f_sf(double x, double d1, double d2);

/// Chi-squared CDF / survival; throws DomainError on x < 0 or df <= 0.
double chisq_cdf(double x, double df);
double chisq_sf(double x, double df);

/// Student t CDF and quantile (0 < p < 1).
double t_cdf(double x, double df);
double t_quantile(double p, double df);

/// Studentized range CDF P(Q <= q) for k means and df error degrees of
/// freedom, by Gauss-Legendre quadrature. Throws DomainError on q < 0,
/// k < 2 or df <= 0.
double studentized_range_cdf(double q, int k, double df);

/// Inverse of studentized_range_cdf in q, 0 < p < 1.
double studentized_range_quantile(double p, int k, double df);

}  // namespace walkeval::special
