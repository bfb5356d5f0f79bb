#ifndef LPANET_TEST_HELPERS_HPP
#define LPANET_TEST_HELPERS_HPP

// Test-only oracles, independent of the library's implementation paths.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "lpanet/numerics.hpp"

namespace lpanet::test {

/// Determinant by cofactor expansion; oracle for log-det checks (dim <= 4 in
/// practice, recursion is exponential).
inline double cofactor_det(const std::vector<std::vector<double>>& a) {
    const std::size_t n = a.size();
    if (n == 1) return a[0][0];
    double det = 0.0;
    double sign = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<std::vector<double>> minor(n - 1, std::vector<double>(n - 1));
        for (std::size_t i = 1; i < n; ++i) {
            std::size_t mc = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == c) continue;
                minor[i - 1][mc++] = a[i][j];
            }
        }
        det += sign * a[0][c] * cofactor_det(minor);
        sign = -sign;
    }
    return det;
}

inline double cofactor_det(const SymMatrix& m) {
    std::vector<std::vector<double>> a(m.dim, std::vector<double>(m.dim));
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t j = 0; j < m.dim; ++j) a[i][j] = m.at(i, j);
    return cofactor_det(a);
}

/// Adjusted Rand index between two labelings.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    std::map<std::pair<int, int>, std::size_t> joint;
    std::map<int, std::size_t> ca, cb;
    for (std::size_t i = 0; i < n; ++i) {
        ++joint[{a[i], b[i]}];
        ++ca[a[i]];
        ++cb[b[i]];
    }
    auto choose2 = [](std::size_t m) {
        return static_cast<double>(m) * static_cast<double>(m > 0 ? m - 1 : 0) / 2.0;
    };
    double sum_joint = 0.0, sum_a = 0.0, sum_b = 0.0;
    for (const auto& [k, v] : joint) sum_joint += choose2(v);
    for (const auto& [k, v] : ca) sum_a += choose2(v);
    for (const auto& [k, v] : cb) sum_b += choose2(v);
    const double total = choose2(n);
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    return (sum_joint - expected) / (max_index - expected);
}

/// Plain Gauss-Jordan linear solve; independent regression route for the
/// relative-importance oracles.
inline std::vector<double> gauss_solve(std::vector<std::vector<double>> a,
                                       std::vector<double> b) {
    const std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col || a[r][col] == 0.0) continue;
            const double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

/// R^2 of y on the given columns (with intercept), via Gauss-Jordan on the
/// raw normal equations — a deliberately different route from the library.
inline double r2_direct(const std::vector<double>& y, const Matrix& X,
                        const std::vector<std::size_t>& cols) {
    const std::size_t n = y.size();
    const std::size_t q = cols.size();
    std::vector<std::vector<double>> a(q + 1, std::vector<double>(q + 1, 0.0));
    std::vector<double> b(q + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> row(q + 1, 1.0);
        for (std::size_t c = 0; c < q; ++c) row[c] = X.at(i, cols[c]);
        for (std::size_t r = 0; r <= q; ++r) {
            for (std::size_t c = 0; c <= q; ++c) a[r][c] += row[r] * row[c];
            b[r] += row[r] * y[i];
        }
    }
    const std::vector<double> beta = gauss_solve(a, b);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = beta[q];
        for (std::size_t c = 0; c < q; ++c) pred += beta[c] * X.at(i, cols[c]);
        sse += (y[i] - pred) * (y[i] - pred);
        sst += (y[i] - mean) * (y[i] - mean);
    }
    return 1.0 - sse / sst;
}

/// Proximal-gradient maximizer of the glasso objective
///   log det T - tr(S T) - lambda sum_{i != j} |T_ij|,
/// used as the independent slow optimizer against block coordinate descent.
inline double glasso_objective(const SymMatrix& theta, const SymMatrix& S, double lambda) {
    const SpdFactorization fac = spd_factorize(theta);
    double trace = 0.0, penalty = 0.0;
    for (std::size_t i = 0; i < theta.dim; ++i)
        for (std::size_t j = 0; j < theta.dim; ++j) {
            trace += S.at(i, j) * theta.at(i, j);
            if (i != j) penalty += std::abs(theta.at(i, j));
        }
    return fac.log_det - trace - lambda * penalty;
}

inline SymMatrix glasso_prox_gradient(const SymMatrix& S, double lambda,
                                      std::size_t iters = 20000) {
    const std::size_t d = S.dim;
    SymMatrix theta = SymMatrix::identity(d);
    double step = 0.1;
    double best_obj = glasso_objective(theta, S, lambda);
    for (std::size_t it = 0; it < iters; ++it) {
        const SymMatrix inv = invert_spd(theta);
        // gradient ascent on the smooth part, then soft-threshold off-diagonals
        for (double alpha = step; alpha > 1e-12; alpha *= 0.5) {
            SymMatrix trial(d);
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = i; j < d; ++j) {
                    double v = theta.at(i, j) + alpha * (inv.at(i, j) - S.at(i, j));
                    if (i != j) {
                        const double t = alpha * lambda;
                        v = v > t ? v - t : (v < -t ? v + t : 0.0);
                    }
                    trial.set(i, j, v);
                }
            }
            bool pd = true;
            double obj = -1e300;
            try {
                obj = glasso_objective(trial, S, lambda);
            } catch (...) {
                pd = false;
            }
            if (pd && obj >= best_obj - 1e-15) {
                theta = trial;
                best_obj = obj;
                break;
            }
        }
    }
    return theta;
}

} // namespace lpanet::test

#endif
