#include "lpanet/lpa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include "lpanet/csv.hpp"
#include "lpanet/errors.hpp"
#include "lpanet/parallel.hpp"
#include "lpanet/rng.hpp"

namespace lpanet {

int Parameterization::model_number() const {
    switch (covariances) {
        case CovarianceMode::Zero:
            return variances == VarianceMode::Equal ? 1 : 2;
        case CovarianceMode::Equal:
            return variances == VarianceMode::Equal ? 3 : 4;
        case CovarianceMode::Varying:
            return variances == VarianceMode::Equal ? 5 : 6;
    }
    return 0;
}

std::string Parameterization::name() const { return "M" + std::to_string(model_number()); }

Parameterization Parameterization::from_model_number(int m) {
    switch (m) {
        case 1: return {VarianceMode::Equal, CovarianceMode::Zero};
        case 2: return {VarianceMode::Varying, CovarianceMode::Zero};
        case 3: return {VarianceMode::Equal, CovarianceMode::Equal};
        case 4: return {VarianceMode::Varying, CovarianceMode::Equal};
        case 5: return {VarianceMode::Equal, CovarianceMode::Varying};
        case 6: return {VarianceMode::Varying, CovarianceMode::Varying};
        default: throw ConfigError("model number must be 1..6, got " + std::to_string(m));
    }
}

std::vector<Parameterization> Parameterization::all_six() {
    std::vector<Parameterization> out;
    out.reserve(6);
    for (int m = 1; m <= 6; ++m) out.push_back(from_model_number(m));
    return out;
}

std::size_t n_free_params(Parameterization param, std::size_t K, std::size_t d) {
    if (K < 1 || d < 1) throw ConfigError("n_free_params needs K >= 1 and d >= 1");
    std::size_t p = (K - 1) + K * d;
    p += (param.variances == VarianceMode::Equal) ? d : K * d;
    const std::size_t offdiag = d * (d - 1) / 2;
    switch (param.covariances) {
        case CovarianceMode::Zero: break;
        case CovarianceMode::Equal: p += offdiag; break;
        case CovarianceMode::Varying: p += K * offdiag; break;
    }
    return p;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kVarianceFloorScale = 1e-6;

// quadratic form (x-mu)' Sigma^-1 (x-mu) through the Cholesky factor
double chol_quadform(const SpdFactorization& f, const double* diff, std::vector<double>& work) {
    const std::size_t d = f.dim;
    work.resize(d);
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double s = diff[i];
        for (std::size_t j = 0; j < i; ++j) s -= f.lower[i * d + j] * work[j];
        const double y = s / f.lower[i * d + i];
        work[i] = y;
        q += y * y;
    }
    return q;
}

std::size_t offdiag_count(std::size_t d) { return d * (d - 1) / 2; }

// (i, j) pairs with i < j, in row-major order
std::vector<std::pair<std::size_t, std::size_t>> offdiag_pairs(std::size_t d) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(offdiag_count(d));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) pairs.emplace_back(i, j);
    return pairs;
}

struct GemState {
    // class-specific and shared covariance parameters for M4/M5 warm starts
    std::vector<std::vector<double>> class_diag; // K x d (M4)
    std::vector<double> shared_offdiag;          // d(d-1)/2 (M4)
    std::vector<double> shared_diag;             // d (M5)
    std::vector<std::vector<double>> class_offdiag; // K x d(d-1)/2 (M5)
    bool ready = false;
};

struct EmWorkspace {
    std::vector<double> floor;  // per-coordinate variance floor
    std::vector<double> pooled; // per-coordinate pooled variance (ddof 0)
    GemState gem;
};

SymMatrix diag_matrix(const std::vector<double>& v) {
    SymMatrix m(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) m.set(j, j, v[j]);
    return m;
}

bool is_spd(const SymMatrix& m) {
    try {
        spd_factorize(m);
        return true;
    } catch (const NotPositiveDefinite&) {
        return false;
    }
}

// Blends toward the (floored) diagonal until the matrix factorizes; the pure
// diagonal end point is always positive definite.
bool repair_to_spd(SymMatrix& m, const std::vector<double>& floor) {
    for (std::size_t j = 0; j < m.dim; ++j)
        if (m.at(j, j) < floor[j]) m.set(j, j, floor[j]);
    if (is_spd(m)) return false;
    const SymMatrix base = m;
    for (double gamma : {0.1, 0.25, 0.5, 0.75, 0.9, 1.0}) {
        SymMatrix trial(m.dim);
        for (std::size_t i = 0; i < m.dim; ++i) trial.set(i, i, base.at(i, i));
        for (std::size_t i = 0; i < m.dim; ++i)
            for (std::size_t j = i + 1; j < m.dim; ++j)
                trial.set(i, j, (1.0 - gamma) * base.at(i, j));
        if (is_spd(trial)) {
            m = trial;
            return true;
        }
    }
    throw NotPositiveDefinite("covariance repair failed");
}

// negative expected complete-data covariance objective:
//   f = sum_k N_k (log det Sigma_k + tr(Sigma_k^-1 S_k))
double structured_objective(const std::vector<SymMatrix>& sigmas,
                            const std::vector<SymMatrix>& scatters,
                            const std::vector<double>& class_n) {
    double f = 0.0;
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
        if (class_n[k] <= 0.0) continue;
        const SpdFactorization fac = spd_factorize(sigmas[k]);
        const SymMatrix inv = invert_spd(sigmas[k]);
        double trace = 0.0;
        for (std::size_t i = 0; i < inv.dim; ++i)
            for (std::size_t j = 0; j < inv.dim; ++j)
                trace += inv.at(i, j) * scatters[k].at(i, j);
        f += class_n[k] * (fac.log_det + trace);
    }
    return f;
}

// Generalized M-step for the two structures without a closed form (M4:
// varying diagonals + shared off-diagonals, M5: shared diagonals + varying
// off-diagonals): preconditioned projected gradient descent on the expected
// complete-data objective with backtracking, warm-started from the previous
// iteration so the EM step never decreases the likelihood.
void gem_covariance_step(Parameterization param, const std::vector<SymMatrix>& scatters,
                         const std::vector<double>& class_n, EmWorkspace& ws,
                         std::vector<SymMatrix>& sigmas_out) {
    const std::size_t K = scatters.size();
    const std::size_t d = scatters.front().dim;
    const auto pairs = offdiag_pairs(d);
    const std::size_t np = pairs.size();
    const bool varying_diag = (param.variances == VarianceMode::Varying); // M4
    GemState& st = ws.gem;

    if (!st.ready) {
        if (varying_diag) {
            st.class_diag.assign(K, std::vector<double>(d));
            st.shared_offdiag.assign(np, 0.0);
            for (std::size_t p = 0; p < np; ++p) {
                double num = 0.0, den = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    num += class_n[k] * scatters[k].at(pairs[p].first, pairs[p].second);
                    den += class_n[k];
                }
                st.shared_offdiag[p] = num / den;
            }
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j < d; ++j)
                    st.class_diag[k][j] = std::max(scatters[k].at(j, j), ws.floor[j]);
        } else {
            st.shared_diag.assign(d, 0.0);
            st.class_offdiag.assign(K, std::vector<double>(np));
            double total = 0.0;
            for (std::size_t k = 0; k < K; ++k) total += class_n[k];
            for (std::size_t j = 0; j < d; ++j) {
                double num = 0.0;
                for (std::size_t k = 0; k < K; ++k) num += class_n[k] * scatters[k].at(j, j);
                st.shared_diag[j] = std::max(num / total, ws.floor[j]);
            }
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t p = 0; p < np; ++p)
                    st.class_offdiag[k][p] = scatters[k].at(pairs[p].first, pairs[p].second);
        }
        st.ready = true;
    }

    auto build = [&](std::vector<SymMatrix>& out) {
        out.assign(K, SymMatrix(d));
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < d; ++j)
                out[k].set(j, j, varying_diag ? st.class_diag[k][j] : st.shared_diag[j]);
            for (std::size_t p = 0; p < np; ++p)
                out[k].set(pairs[p].first, pairs[p].second,
                           varying_diag ? st.shared_offdiag[p] : st.class_offdiag[k][p]);
        }
    };

    // make sure the warm start is feasible before descending
    std::vector<SymMatrix> sigmas;
    build(sigmas);
    for (int shrink = 0; shrink < 64; ++shrink) {
        bool ok = true;
        for (std::size_t k = 0; k < K; ++k)
            if (!is_spd(sigmas[k])) ok = false;
        if (ok) break;
        if (varying_diag) {
            for (double& c : st.shared_offdiag) c *= 0.7;
        } else {
            for (auto& row : st.class_offdiag)
                for (double& c : row) c *= 0.7;
        }
        build(sigmas);
    }

    double f = structured_objective(sigmas, scatters, class_n);

    const std::size_t max_inner = 40;
    for (std::size_t inner = 0; inner < max_inner; ++inner) {
        // gradients of f w.r.t. the free parameters
        std::vector<std::vector<double>> grad_diag(K, std::vector<double>(d, 0.0));
        std::vector<double> grad_shared(varying_diag ? np : d, 0.0);
        std::vector<std::vector<double>> grad_off(K, std::vector<double>(np, 0.0));
        std::vector<std::vector<double>> precond_diag(K, std::vector<double>(d, 0.0));
        std::vector<double> precond_shared(grad_shared.size(), 0.0);
        std::vector<std::vector<double>> precond_off(K, std::vector<double>(np, 0.0));

        for (std::size_t k = 0; k < K; ++k) {
            if (class_n[k] <= 0.0) continue;
            const SymMatrix inv = invert_spd(sigmas[k]);
            // dG/dSigma_k = N_k (Sigma^-1 - Sigma^-1 S Sigma^-1)
            SymMatrix isi(d);
            for (std::size_t a = 0; a < d; ++a) {
                for (std::size_t b = a; b < d; ++b) {
                    double s = 0.0;
                    for (std::size_t u = 0; u < d; ++u)
                        for (std::size_t v = 0; v < d; ++v)
                            s += inv.at(a, u) * scatters[k].at(u, v) * inv.at(v, b);
                    isi.set(a, b, s);
                }
            }
            for (std::size_t j = 0; j < d; ++j) {
                const double g = class_n[k] * (inv.at(j, j) - isi.at(j, j));
                const double h = class_n[k] * inv.at(j, j) * inv.at(j, j) + 1e-12;
                if (varying_diag) {
                    grad_diag[k][j] = g;
                    precond_diag[k][j] = h;
                } else {
                    grad_shared[j] += g;
                    precond_shared[j] += h;
                }
            }
            for (std::size_t p = 0; p < np; ++p) {
                const auto [a, b] = pairs[p];
                const double g = 2.0 * class_n[k] * (inv.at(a, b) - isi.at(a, b));
                const double h = 2.0 * class_n[k] *
                                     (inv.at(a, a) * inv.at(b, b) + inv.at(a, b) * inv.at(a, b)) +
                                 1e-12;
                if (varying_diag) {
                    grad_shared[p] += g;
                    precond_shared[p] += h;
                } else {
                    grad_off[k][p] = g;
                    precond_off[k][p] = h;
                }
            }
        }

        double step_norm = 0.0;
        auto dir = [&](double g, double h) { return g / h; };
        if (varying_diag) {
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t j = 0; j < d; ++j)
                    step_norm = std::max(step_norm, std::abs(dir(grad_diag[k][j], precond_diag[k][j])));
            for (std::size_t p = 0; p < np; ++p)
                step_norm = std::max(step_norm, std::abs(dir(grad_shared[p], precond_shared[p])));
        } else {
            for (std::size_t j = 0; j < d; ++j)
                step_norm = std::max(step_norm, std::abs(dir(grad_shared[j], precond_shared[j])));
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t p = 0; p < np; ++p)
                    step_norm = std::max(step_norm, std::abs(dir(grad_off[k][p], precond_off[k][p])));
        }
        if (step_norm < 1e-11) break;

        const GemState saved = st;
        bool accepted = false;
        for (double alpha = 1.0; alpha > 1e-10; alpha *= 0.5) {
            st = saved;
            if (varying_diag) {
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t j = 0; j < d; ++j)
                        st.class_diag[k][j] = std::max(
                            ws.floor[j],
                            saved.class_diag[k][j] - alpha * dir(grad_diag[k][j], precond_diag[k][j]));
                for (std::size_t p = 0; p < np; ++p)
                    st.shared_offdiag[p] =
                        saved.shared_offdiag[p] - alpha * dir(grad_shared[p], precond_shared[p]);
            } else {
                for (std::size_t j = 0; j < d; ++j)
                    st.shared_diag[j] = std::max(
                        ws.floor[j], saved.shared_diag[j] - alpha * dir(grad_shared[j], precond_shared[j]));
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t p = 0; p < np; ++p)
                        st.class_offdiag[k][p] =
                            saved.class_offdiag[k][p] - alpha * dir(grad_off[k][p], precond_off[k][p]);
            }
            std::vector<SymMatrix> trial;
            build(trial);
            bool pd = true;
            for (std::size_t k = 0; k < K && pd; ++k)
                if (!is_spd(trial[k])) pd = false;
            if (!pd) continue;
            const double f_trial = structured_objective(trial, scatters, class_n);
            if (f_trial < f) {
                sigmas = std::move(trial);
                f = f_trial;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            st = saved;
            break;
        }
    }
    sigmas_out = sigmas;
}

struct MStepResult {
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<SymMatrix> covariances;
    bool repaired = false;
    std::vector<std::size_t> collapsed; // classes below the weight floor
};

MStepResult m_step(const Matrix& X, const Matrix& tau, Parameterization param, EmWorkspace& ws) {
    const std::size_t n = X.rows, d = X.cols, K = tau.cols;
    MStepResult out;
    out.weights.assign(K, 0.0);
    out.means.assign(K, std::vector<double>(d, 0.0));

    std::vector<double> class_n(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        KahanSum acc;
        for (std::size_t i = 0; i < n; ++i) acc.add(tau.at(i, k));
        class_n[k] = acc.value();
        out.weights[k] = class_n[k] / static_cast<double>(n);
    }
    const double weight_floor = 1.0 / (10.0 * static_cast<double>(n));
    for (std::size_t k = 0; k < K; ++k)
        if (out.weights[k] < weight_floor) out.collapsed.push_back(k);
    if (!out.collapsed.empty()) return out; // caller repairs and retries

    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            KahanSum acc;
            for (std::size_t i = 0; i < n; ++i) acc.add(tau.at(i, k) * X.at(i, j));
            out.means[k][j] = acc.value() / class_n[k];
        }
    }

    // full weighted scatter per class; every structure is assembled from it
    std::vector<SymMatrix> scatters(K, SymMatrix(d));
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t a = 0; a < d; ++a) {
            for (std::size_t b = a; b < d; ++b) {
                KahanSum acc;
                for (std::size_t i = 0; i < n; ++i)
                    acc.add(tau.at(i, k) * (X.at(i, a) - out.means[k][a]) *
                            (X.at(i, b) - out.means[k][b]));
                scatters[k].set(a, b, acc.value() / class_n[k]);
            }
        }
    }

    out.covariances.assign(K, SymMatrix(d));
    switch (param.covariances) {
        case CovarianceMode::Zero: {
            if (param.variances == VarianceMode::Equal) {
                std::vector<double> pooled(d, 0.0);
                for (std::size_t j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < K; ++k) s += class_n[k] * scatters[k].at(j, j);
                    pooled[j] = std::max(s / static_cast<double>(n), ws.floor[j]);
                }
                const SymMatrix shared = diag_matrix(pooled);
                for (std::size_t k = 0; k < K; ++k) out.covariances[k] = shared;
            } else {
                for (std::size_t k = 0; k < K; ++k) {
                    std::vector<double> v(d);
                    for (std::size_t j = 0; j < d; ++j)
                        v[j] = std::max(scatters[k].at(j, j), ws.floor[j]);
                    out.covariances[k] = diag_matrix(v);
                }
            }
            break;
        }
        case CovarianceMode::Equal: {
            if (param.variances == VarianceMode::Equal) {
                // pooled full covariance (closed form)
                SymMatrix pooled(d);
                for (std::size_t a = 0; a < d; ++a)
                    for (std::size_t b = a; b < d; ++b) {
                        double s = 0.0;
                        for (std::size_t k = 0; k < K; ++k)
                            s += class_n[k] * scatters[k].at(a, b);
                        pooled.set(a, b, s / static_cast<double>(n));
                    }
                out.repaired = repair_to_spd(pooled, ws.floor) || out.repaired;
                for (std::size_t k = 0; k < K; ++k) out.covariances[k] = pooled;
            } else {
                gem_covariance_step(param, scatters, class_n, ws, out.covariances);
            }
            break;
        }
        case CovarianceMode::Varying: {
            if (param.variances == VarianceMode::Equal) {
                gem_covariance_step(param, scatters, class_n, ws, out.covariances);
            } else {
                for (std::size_t k = 0; k < K; ++k) {
                    SymMatrix cov = scatters[k];
                    out.repaired = repair_to_spd(cov, ws.floor) || out.repaired;
                    out.covariances[k] = cov;
                }
            }
            break;
        }
    }
    return out;
}

// log-space E-step; returns the observed-data log-likelihood and fills tau
double e_step(const Matrix& X, const std::vector<double>& weights,
              const std::vector<std::vector<double>>& means,
              const std::vector<SymMatrix>& covariances, Matrix& tau) {
    const std::size_t n = X.rows, d = X.cols, K = weights.size();
    std::vector<SpdFactorization> factors;
    std::vector<double> log_const(K);
    factors.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
        factors.push_back(spd_factorize(covariances[k]));
        log_const[k] = -0.5 * (static_cast<double>(d) * kLog2Pi + factors[k].log_det) +
                       std::log(weights[k]);
    }
    KahanSum ll;
    std::vector<double> diff(d), work(d), logp(K);
    for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t j = 0; j < d; ++j) diff[j] = X.at(i, j) - means[k][j];
            logp[k] = log_const[k] - 0.5 * chol_quadform(factors[k], diff.data(), work);
            m = std::max(m, logp[k]);
        }
        double denom = 0.0;
        for (std::size_t k = 0; k < K; ++k) denom += std::exp(logp[k] - m);
        for (std::size_t k = 0; k < K; ++k) tau.at(i, k) = std::exp(logp[k] - m) / denom;
        ll.add(m + std::log(denom));
    }
    return ll.value();
}

std::vector<std::size_t> kmeanspp_centers(const Matrix& X, std::size_t K, Rng& rng) {
    const std::size_t n = X.rows, d = X.cols;
    std::vector<std::size_t> centers;
    centers.reserve(K);
    centers.push_back(static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n)) % n);
    std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
    while (centers.size() < K) {
        const std::size_t last = centers.back();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double delta = X.at(i, j) - X.at(last, j);
                s += delta * delta;
            }
            dist2[i] = std::min(dist2[i], s);
            total += dist2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform01() * total;
            double run = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                run += dist2[i];
                if (run >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n)) % n;
        }
        centers.push_back(pick);
    }
    return centers;
}

struct RunOutcome {
    bool ok = false;
    std::string error;
    FittedMixture mix;
};

RunOutcome run_em_once(const Matrix& X, std::size_t K, Parameterization param,
                       const EmSettings& settings, Rng rng) {
    const std::size_t n = X.rows, d = X.cols;
    RunOutcome out;
    try {
        EmWorkspace ws;
        ws.pooled.resize(d);
        ws.floor.resize(d);
        {
            const SymMatrix cov = covariance_matrix(X, 0);
            for (std::size_t j = 0; j < d; ++j) {
                ws.pooled[j] = cov.at(j, j);
                ws.floor[j] = kVarianceFloorScale * ws.pooled[j];
            }
        }

        Matrix tau(n, K, 0.0);
        {
            const auto centers = kmeanspp_centers(X, K, rng);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t best = 0;
                double best_d = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < K; ++k) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double delta = X.at(i, j) - X.at(centers[k], j);
                        s += delta * delta;
                    }
                    if (s < best_d) {
                        best_d = s;
                        best = k;
                    }
                }
                tau.at(i, best) = 1.0;
            }
        }

        MStepResult params = m_step(X, tau, param, ws);
        std::size_t repairs = 0;
        const std::size_t max_repairs = 3 * K + 3;
        double ll_prev = -std::numeric_limits<double>::infinity();
        bool baseline_valid = false;
        double max_drop = 0.0;
        bool converged = false;
        std::size_t iter = 0;
        double ll = 0.0;

        auto handle_collapse = [&](MStepResult& mr) -> bool {
            // re-seed each collapsed class from the point the model explains worst
            if (mr.collapsed.empty()) return false;
            if (++repairs > max_repairs)
                throw AllStartsFailed("class weight collapsed repeatedly");
            std::size_t worst_row = 0;
            double worst = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                double max_tau = 0.0;
                for (std::size_t k = 0; k < K; ++k) max_tau = std::max(max_tau, tau.at(i, k));
                if (max_tau < worst) {
                    worst = max_tau;
                    worst_row = i;
                }
            }
            for (std::size_t k = 0; k < K; ++k) tau.at(worst_row, k) = 0.0;
            for (std::size_t c : mr.collapsed) {
                tau.at(worst_row, c) = 1.0 / static_cast<double>(mr.collapsed.size());
                for (std::size_t i = 0; i < n; ++i)
                    tau.at(i, c) = std::max(tau.at(i, c), 1e-3); // soften so the class regrows
            }
            // renormalize rows
            for (std::size_t i = 0; i < n; ++i) {
                double s = 0.0;
                for (std::size_t k = 0; k < K; ++k) s += tau.at(i, k);
                for (std::size_t k = 0; k < K; ++k) tau.at(i, k) /= s;
            }
            ws.gem.ready = false;
            baseline_valid = false;
            return true;
        };

        while (!params.collapsed.empty()) {
            handle_collapse(params);
            params = m_step(X, tau, param, ws);
        }

        for (iter = 1; iter <= settings.max_iter; ++iter) {
            ll = e_step(X, params.weights, params.means, params.covariances, tau);
            if (baseline_valid) {
                if (ll < ll_prev) max_drop = std::max(max_drop, ll_prev - ll);
                if (std::abs(ll - ll_prev) < settings.tol) {
                    converged = true;
                    break;
                }
            }
            ll_prev = ll;
            baseline_valid = true;

            MStepResult next = m_step(X, tau, param, ws);
            while (!next.collapsed.empty()) {
                handle_collapse(next);
                next = m_step(X, tau, param, ws);
            }
            if (next.repaired) baseline_valid = false; // PD repair perturbs the ascent
            params = std::move(next);
        }
        if (!converged) {
            // sync posteriors and LL with the last parameter set
            ll = e_step(X, params.weights, params.means, params.covariances, tau);
            iter = settings.max_iter;
        }

        FittedMixture mix;
        mix.K = K;
        mix.d = d;
        mix.param = param;
        mix.weights = params.weights;
        mix.means = params.means;
        mix.covariances = params.covariances;
        mix.loglik = ll;
        mix.posteriors = std::move(tau);
        mix.n_params = n_free_params(param, K, d);
        mix.converged = converged;
        mix.n_iter = iter;
        mix.max_ll_drop = max_drop;
        mix.n_repairs = repairs;
        out.mix = std::move(mix);
        out.ok = true;
    } catch (const Error& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

FittedMixture fit_k1_closed_form(const Matrix& X, Parameterization param) {
    const std::size_t n = X.rows, d = X.cols;
    FittedMixture mix;
    mix.K = 1;
    mix.d = d;
    mix.param = param;
    mix.weights = {1.0};
    mix.means.assign(1, std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
        KahanSum acc;
        for (std::size_t i = 0; i < n; ++i) acc.add(X.at(i, j));
        mix.means[0][j] = acc.value() / static_cast<double>(n);
    }
    SymMatrix cov = covariance_matrix(X, 0);
    if (param.covariances == CovarianceMode::Zero) {
        SymMatrix diag(d);
        for (std::size_t j = 0; j < d; ++j) diag.set(j, j, cov.at(j, j));
        cov = diag;
    }
    mix.covariances = {cov};
    mix.posteriors = Matrix(n, 1, 1.0);
    mix.loglik = mixture_loglik(X, mix.weights, mix.means, mix.covariances);
    mix.n_params = n_free_params(param, 1, d);
    mix.converged = true;
    mix.n_iter = 0;
    return mix;
}

// deterministic presentation order: classes sorted by mean vector
void canonicalize_class_order(FittedMixture& mix) {
    std::vector<std::size_t> order(mix.K);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return mix.means[a] < mix.means[b];
    });
    FittedMixture tmp = mix;
    for (std::size_t k = 0; k < mix.K; ++k) {
        mix.weights[k] = tmp.weights[order[k]];
        mix.means[k] = tmp.means[order[k]];
        mix.covariances[k] = tmp.covariances[order[k]];
        for (std::size_t i = 0; i < mix.posteriors.rows; ++i)
            mix.posteriors.at(i, k) = tmp.posteriors.at(i, order[k]);
    }
}

} // namespace

double mixture_loglik(const Matrix& X, const std::vector<double>& weights,
                      const std::vector<std::vector<double>>& means,
                      const std::vector<SymMatrix>& covariances) {
    Matrix tau(X.rows, weights.size(), 0.0);
    return e_step(X, weights, means, covariances, tau);
}

FittedMixture fit_em(const Matrix& X, std::size_t K, Parameterization param,
                     const EmSettings& settings) {
    const std::size_t n = X.rows, d = X.cols;
    if (K < 1) throw ConfigError("K must be >= 1");
    if (settings.tol <= 0.0) throw ConfigError("tol must be positive");
    if (n <= K * d)
        throw TooFewRows("n = " + std::to_string(n) + " is too small for K = " +
                         std::to_string(K) + ", d = " + std::to_string(d));

    if (K == 1) {
        try {
            FittedMixture mix = fit_k1_closed_form(X, param);
            return mix;
        } catch (const Error& e) {
            throw AllStartsFailed(std::string("closed-form K=1 fit failed: ") + e.what());
        }
    }

    const Rng master(settings.seed);
    std::vector<RunOutcome> outcomes(settings.n_starts);
    parallel_for(settings.n_starts, settings.threads, [&](std::size_t s) {
        outcomes[s] = run_em_once(X, K, param, settings, master.child(s));
    });

    std::size_t best = settings.n_starts;
    for (std::size_t s = 0; s < settings.n_starts; ++s) {
        if (!outcomes[s].ok) continue;
        if (best == settings.n_starts || outcomes[s].mix.loglik > outcomes[best].mix.loglik)
            best = s;
    }
    if (best == settings.n_starts) {
        std::string detail = outcomes.empty() ? "no starts requested" : outcomes.front().error;
        throw AllStartsFailed("all " + std::to_string(settings.n_starts) + " starts failed: " +
                              detail);
    }
    FittedMixture mix = std::move(outcomes[best].mix);
    canonicalize_class_order(mix);
    return mix;
}

FitReport fit_indices(const FittedMixture& m, std::size_t n) {
    FitReport r;
    const double ll = m.loglik;
    const double p = static_cast<double>(m.n_params);
    const double nn = static_cast<double>(n);
    r.loglik = ll;
    r.aic = -2.0 * ll + 2.0 * p;
    r.bic = -2.0 * ll + p * std::log(nn);
    r.kic = -2.0 * ll + 3.0 * (p + 1.0);
    r.sabic = -2.0 * ll + p * std::log((nn + 2.0) / 24.0);

    KahanSum en; // total classification entropy, nats
    for (std::size_t i = 0; i < m.posteriors.rows; ++i) {
        for (std::size_t k = 0; k < m.K; ++k) {
            const double t = m.posteriors.at(i, k);
            if (t > 0.0) en.add(-t * std::log(t));
        }
    }
    const double total_entropy = en.value();
    if (m.K <= 1) {
        r.entropy = 1.0;
    } else {
        r.entropy = 1.0 - total_entropy / (nn * std::log(static_cast<double>(m.K)));
        r.entropy = std::min(1.0, std::max(0.0, r.entropy));
    }
    r.icl = 2.0 * ll - p * std::log(nn) - 2.0 * total_entropy;
    r.K = m.K;
    r.param = m.param;
    r.n_params = m.n_params;
    r.n = n;
    return r;
}

SweepResult sweep_models(const Matrix& X, KRange k_range,
                         const std::vector<Parameterization>& params,
                         const EmSettings& settings) {
    if (k_range.lo < 1 || k_range.hi < k_range.lo) throw ConfigError("bad K range");
    if (params.empty()) throw ConfigError("no parameterizations requested");

    std::vector<std::pair<std::size_t, Parameterization>> cells;
    for (std::size_t K = k_range.lo; K <= k_range.hi; ++K)
        for (const Parameterization& p : params) cells.emplace_back(K, p);

    SweepResult sweep;
    sweep.entries.resize(cells.size());
    parallel_for(cells.size(), settings.threads, [&](std::size_t c) {
        const auto [K, param] = cells[c];
        SweepEntry entry;
        entry.K = K;
        entry.param = param;
        EmSettings cell = settings;
        cell.threads = 1;
        // seed derived from the grid position, not the task index, so the
        // sweep is reproducible under any scheduling
        cell.seed = Rng::derive_seed(settings.seed,
                                     (static_cast<std::uint64_t>(K) << 8) |
                                         static_cast<std::uint64_t>(param.model_number()));
        try {
            FittedMixture fit = fit_em(X, K, param, cell);
            entry.report = fit_indices(fit, X.rows);
            entry.fit = std::move(fit);
        } catch (const Error& e) {
            entry.error = e.what();
        }
        sweep.entries[c] = std::move(entry);
    });
    return sweep;
}

Selection select_model(const SweepResult& sweep, SelectionStrategy strategy) {
    std::vector<std::size_t> converged;
    for (std::size_t i = 0; i < sweep.entries.size(); ++i) {
        const SweepEntry& e = sweep.entries[i];
        if (e.fit && e.report && e.fit->converged) converged.push_back(i);
    }
    if (converged.empty()) throw NoConvergedModels("no converged entries in sweep");

    auto make_selection = [&](std::size_t idx) {
        const SweepEntry& e = sweep.entries[idx];
        return Selection{e.K, e.param, idx};
    };

    auto tie_break_less = [&](std::size_t a, std::size_t b) {
        const SweepEntry& ea = sweep.entries[a];
        const SweepEntry& eb = sweep.entries[b];
        if (ea.report->bic != eb.report->bic) return ea.report->bic < eb.report->bic;
        if (ea.K != eb.K) return ea.K < eb.K;
        return ea.param.model_number() < eb.param.model_number();
    };

    if (strategy == SelectionStrategy::BestBIC) {
        std::size_t best = converged.front();
        for (std::size_t idx : converged)
            if (tie_break_less(idx, best)) best = idx;
        return make_selection(best);
    }

    // average ranks per criterion; ICL and entropy ranked on negated values
    const std::size_t m = converged.size();
    std::vector<double> rank_sum(m, 0.0);
    auto accumulate_ranks = [&](auto value_of) {
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return value_of(converged[a]) < value_of(converged[b]);
        });
        std::size_t i = 0;
        while (i < m) {
            std::size_t j = i;
            while (j + 1 < m &&
                   value_of(converged[order[j + 1]]) == value_of(converged[order[i]]))
                ++j;
            const double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t t = i; t <= j; ++t) rank_sum[order[t]] += avg_rank;
            i = j + 1;
        }
    };
    accumulate_ranks([&](std::size_t idx) { return sweep.entries[idx].report->aic; });
    accumulate_ranks([&](std::size_t idx) { return sweep.entries[idx].report->bic; });
    accumulate_ranks([&](std::size_t idx) { return sweep.entries[idx].report->kic; });
    accumulate_ranks([&](std::size_t idx) { return sweep.entries[idx].report->sabic; });
    accumulate_ranks([&](std::size_t idx) { return -sweep.entries[idx].report->icl; });
    accumulate_ranks([&](std::size_t idx) { return -sweep.entries[idx].report->entropy; });

    std::size_t best = 0;
    for (std::size_t i = 1; i < m; ++i) {
        if (rank_sum[i] < rank_sum[best] ||
            (rank_sum[i] == rank_sum[best] && tie_break_less(converged[i], converged[best])))
            best = i;
    }
    return make_selection(converged[best]);
}

Classification classify(const FittedMixture& m) {
    Classification c;
    const std::size_t n = m.posteriors.rows;
    c.labels.resize(n);
    c.sizes.assign(m.K, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < m.K; ++k)
            if (m.posteriors.at(i, k) > m.posteriors.at(i, best)) best = k;
        c.labels[i] = static_cast<int>(best) + 1;
        ++c.sizes[best];
    }
    return c;
}

void write_sweep_csv(const SweepResult& sweep, std::ostream& out) {
    out << "model,classes,loglik,aic,bic,kic,sabic,icl,entropy,converged\n";
    for (const SweepEntry& e : sweep.entries) {
        out << e.param.model_number() << ',' << e.K << ',';
        if (e.report) {
            const FitReport& r = *e.report;
            out << format_double(r.loglik) << ',' << format_double(r.aic) << ','
                << format_double(r.bic) << ',' << format_double(r.kic) << ','
                << format_double(r.sabic) << ',' << format_double(r.icl) << ','
                << format_double(r.entropy) << ',' << (e.fit && e.fit->converged ? "true" : "false");
        } else {
            out << ",,,,,,," << "false";
        }
        out << '\n';
    }
}

} // namespace lpanet
