#ifndef LPANET_NUMERICS_HPP
#define LPANET_NUMERICS_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace lpanet {

/// Neumaier-compensated accumulator. All reductions in this library go
/// through it so that covariance sums over long columns keep full precision.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

/// Dense row-major matrix, no ownership tricks.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

/// Dense symmetric matrix; set() writes both triangles so symmetry is exact
/// by construction.
struct SymMatrix {
    std::size_t dim = 0;
    std::vector<double> data;

    SymMatrix() = default;
    explicit SymMatrix(std::size_t d, double fill = 0.0) : dim(d), data(d * d, fill) {}

    static SymMatrix identity(std::size_t d) {
        SymMatrix m(d);
        for (std::size_t i = 0; i < d; ++i) m.data[i * d + i] = 1.0;
        return m;
    }

    double at(std::size_t i, std::size_t j) const { return data[i * dim + j]; }
    void set(std::size_t i, std::size_t j, double v) {
        data[i * dim + j] = v;
        data[j * dim + i] = v;
    }
    double max_asymmetry() const;
};

/// Cholesky factor L (lower triangular, positive diagonal) of an SPD matrix,
/// with log det cached: log_det = 2 sum log L[i][i].
struct SpdFactorization {
    std::size_t dim = 0;
    std::vector<double> lower; // row-major, upper triangle zero
    double log_det = 0.0;

    double lower_at(std::size_t i, std::size_t j) const { return lower[i * dim + j]; }

    /// Solves A x = b via the two triangular systems.
    std::vector<double> solve(std::span<const double> b) const;
    /// Solves L y = b (forward substitution only); used for Gaussian
    /// quadratic forms where only y'y is needed.
    std::vector<double> forward_solve(std::span<const double> b) const;
};

/// Sample covariance with ddof in {0, 1}. Throws TooFewRows for n < 2,
/// ParseError for non-finite cells.
SymMatrix covariance_matrix(const Matrix& X, int ddof);

/// Cholesky with pivot tolerance 1e-12; throws NotPositiveDefinite.
SpdFactorization spd_factorize(const SymMatrix& A);

/// SPD inverse via the Cholesky factor; result exactly symmetric.
SymMatrix invert_spd(const SymMatrix& A);

/// Pearson correlation matrix; unit diagonal, entries clamped to [-1, 1].
/// Throws ZeroVariance naming the offending column index, TooFewRows for n < 3.
SymMatrix correlation_matrix(const Matrix& X);

} // namespace lpanet

#endif
