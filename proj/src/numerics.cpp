#include "lpanet/numerics.hpp"

#include <cmath>
#include <string>

#include "lpanet/errors.hpp"

namespace lpanet {

namespace {
constexpr double kPivotTol = 1e-12; // declares numerical non-positive-definiteness
}

double SymMatrix::max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = i + 1; j < dim; ++j)
            worst = std::max(worst, std::abs(at(i, j) - at(j, i)));
    return worst;
}

std::vector<double> SpdFactorization::forward_solve(std::span<const double> b) const {
    std::vector<double> y(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= lower_at(i, j) * y[j];
        y[i] = s / lower_at(i, i);
    }
    return y;
}

std::vector<double> SpdFactorization::solve(std::span<const double> b) const {
    std::vector<double> y = forward_solve(b);
    std::vector<double> x(dim);
    for (std::size_t ii = dim; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < dim; ++j) s -= lower_at(j, ii) * x[j];
        x[ii] = s / lower_at(ii, ii);
    }
    return x;
}

SymMatrix covariance_matrix(const Matrix& X, int ddof) {
    if (ddof != 0 && ddof != 1) throw ConfigError("covariance ddof must be 0 or 1");
    const std::size_t n = X.rows, d = X.cols;
    if (n < 2) throw TooFewRows("covariance needs at least 2 rows, got " + std::to_string(n));
    for (double v : X.data)
        if (!std::isfinite(v)) throw ParseError("non-finite value in covariance input");

    std::vector<double> mean(d);
    for (std::size_t j = 0; j < d; ++j) {
        KahanSum acc;
        for (std::size_t i = 0; i < n; ++i) acc.add(X.at(i, j));
        mean[j] = acc.value() / static_cast<double>(n);
    }

    const double denom = static_cast<double>(n - static_cast<std::size_t>(ddof));
    SymMatrix S(d);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            KahanSum acc;
            for (std::size_t i = 0; i < n; ++i)
                acc.add((X.at(i, j) - mean[j]) * (X.at(i, k) - mean[k]));
            S.set(j, k, acc.value() / denom);
        }
    }
    return S;
}

SpdFactorization spd_factorize(const SymMatrix& A) {
    const std::size_t d = A.dim;
    SpdFactorization f;
    f.dim = d;
    f.lower.assign(d * d, 0.0);
    KahanSum log_det;
    for (std::size_t j = 0; j < d; ++j) {
        KahanSum diag;
        diag.add(A.at(j, j));
        for (std::size_t k = 0; k < j; ++k) diag.add(-f.lower[j * d + k] * f.lower[j * d + k]);
        const double pivot = diag.value();
        if (!(pivot > kPivotTol))
            throw NotPositiveDefinite("pivot " + std::to_string(pivot) + " at index " +
                                      std::to_string(j));
        const double ljj = std::sqrt(pivot);
        f.lower[j * d + j] = ljj;
        log_det.add(2.0 * std::log(ljj));
        for (std::size_t i = j + 1; i < d; ++i) {
            KahanSum s;
            s.add(A.at(i, j));
            for (std::size_t k = 0; k < j; ++k) s.add(-f.lower[i * d + k] * f.lower[j * d + k]);
            f.lower[i * d + j] = s.value() / ljj;
        }
    }
    f.log_det = log_det.value();
    return f;
}

SymMatrix invert_spd(const SymMatrix& A) {
    const SpdFactorization f = spd_factorize(A);
    const std::size_t d = A.dim;
    SymMatrix inv(d);
    std::vector<double> e(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        e[j] = 1.0;
        std::vector<double> col = f.solve(e);
        e[j] = 0.0;
        // columns of the true inverse are symmetric; set() keeps it exact
        for (std::size_t i = j; i < d; ++i) inv.set(i, j, col[i]);
    }
    return inv;
}

SymMatrix correlation_matrix(const Matrix& X) {
    const std::size_t n = X.rows, d = X.cols;
    if (n < 3) throw TooFewRows("correlation needs at least 3 rows, got " + std::to_string(n));
    SymMatrix cov = covariance_matrix(X, 1);
    std::vector<double> sd(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (!(cov.at(j, j) > 0.0))
            throw ZeroVariance("column " + std::to_string(j) + " has zero variance");
        sd[j] = std::sqrt(cov.at(j, j));
    }
    SymMatrix R(d);
    for (std::size_t i = 0; i < d; ++i) {
        R.set(i, i, 1.0);
        for (std::size_t j = i + 1; j < d; ++j) {
            double r = cov.at(i, j) / (sd[i] * sd[j]);
            r = std::min(1.0, std::max(-1.0, r));
            R.set(i, j, r);
        }
    }
    return R;
}

} // namespace lpanet
