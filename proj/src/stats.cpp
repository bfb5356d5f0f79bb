#include "lpanet/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lpanet/errors.hpp"
#include "lpanet/numerics.hpp"

namespace lpanet {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Acklam's inverse-normal rational approximation (initial guess).
double acklam_guess(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -HUGE_VAL;
        if (p == 1.0) return HUGE_VAL;
        throw InvalidCounts("norm_quantile needs p in [0, 1], got " + std::to_string(p));
    }
    // work on the lower tail; 1 - p is exact for p >= 0.5 (Sterbenz), and the
    // erfc-based CDF keeps full precision there
    if (p > 0.5) return -norm_quantile(1.0 - p);
    double x = acklam_guess(p);
    // one Halley step against the high-precision erfc CDF
    const double e = norm_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    x = x - u / (1.0 + x * u / 2.0);
    return x;
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cont_fraction(double a, double b, double x) {
    constexpr int max_iter = 300;
    constexpr double eps = 3e-16;
    constexpr double fpmin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

} // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cont_fraction(a, b, x) / a;
    return 1.0 - front * beta_cont_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    if (df <= 0.0) throw InvalidCounts("t test needs positive df");
    if (!std::isfinite(t)) return 0.0;
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

double log_choose(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return -HUGE_VAL;
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

double hypergeom_pmf(std::int64_t N, std::int64_t marked, std::int64_t draws, std::int64_t x) {
    if (x < std::max<std::int64_t>(0, draws + marked - N) || x > std::min(marked, draws))
        return 0.0;
    return std::exp(log_choose(marked, x) + log_choose(N - marked, draws - x) -
                    log_choose(N, draws));
}

double hypergeom_cdf_lower(std::int64_t N, std::int64_t marked, std::int64_t draws,
                           std::int64_t x) {
    const std::int64_t lo = std::max<std::int64_t>(0, draws + marked - N);
    KahanSum acc;
    for (std::int64_t v = lo; v <= std::min({x, marked, draws}); ++v)
        acc.add(hypergeom_pmf(N, marked, draws, v));
    return std::min(1.0, acc.value());
}

double hypergeom_cdf_upper(std::int64_t N, std::int64_t marked, std::int64_t draws,
                           std::int64_t x) {
    const std::int64_t hi = std::min(marked, draws);
    KahanSum acc;
    for (std::int64_t v = std::max<std::int64_t>(x, std::max<std::int64_t>(0, draws + marked - N));
         v <= hi; ++v)
        acc.add(hypergeom_pmf(N, marked, draws, v));
    return std::min(1.0, acc.value());
}

} // namespace lpanet
