#ifndef LPANET_STATS_HPP
#define LPANET_STATS_HPP

#include <cstdint>

namespace lpanet {

/// Standard normal CDF.
double norm_cdf(double x);

/// Standard normal quantile. Acklam's rational approximation polished with a
/// Halley step against the erfc-based CDF; absolute error well under 1e-9.
double norm_quantile(double p);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value for a Student t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

/// log C(n, k) via lgamma.
double log_choose(std::int64_t n, std::int64_t k);

/// P(X = x) for X ~ Hypergeometric(N, marked, draws).
double hypergeom_pmf(std::int64_t N, std::int64_t marked, std::int64_t draws, std::int64_t x);

/// Lower/upper tail P(X <= x) and P(X >= x), summed on the exact support.
double hypergeom_cdf_lower(std::int64_t N, std::int64_t marked, std::int64_t draws, std::int64_t x);
double hypergeom_cdf_upper(std::int64_t N, std::int64_t marked, std::int64_t draws, std::int64_t x);

} // namespace lpanet

#endif
