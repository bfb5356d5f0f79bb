#ifndef LPANET_LPA_HPP
#define LPANET_LPA_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lpanet/numerics.hpp"

namespace lpanet {

enum class VarianceMode { Equal, Varying };
enum class CovarianceMode { Zero, Equal, Varying };

/// Constraint regime on the class covariance matrices. The six combinations
/// are numbered M1..M6:
///   M1 = (Equal, Zero)    M2 = (Varying, Zero)
///   M3 = (Equal, Equal)   M4 = (Varying, Equal)
///   M5 = (Equal, Varying) M6 = (Varying, Varying)
struct Parameterization {
    VarianceMode variances = VarianceMode::Equal;
    CovarianceMode covariances = CovarianceMode::Zero;

    int model_number() const;
    std::string name() const; // "M1".."M6"
    static Parameterization from_model_number(int m);
    static std::vector<Parameterization> all_six();

    bool operator==(const Parameterization&) const = default;
};

/// Free-parameter count: (K-1) weights + K*d means + variance terms
/// (d if Equal, K*d if Varying) + covariance terms (0 / d(d-1)/2 / K*d(d-1)/2).
std::size_t n_free_params(Parameterization param, std::size_t K, std::size_t d);

struct EmSettings {
    std::size_t n_starts = 20;
    std::size_t max_iter = 500;
    double tol = 1e-6; // absolute log-likelihood change
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct FittedMixture {
    std::size_t K = 0;
    std::size_t d = 0;
    Parameterization param;
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<SymMatrix> covariances;
    double loglik = 0.0;
    Matrix posteriors; // n x K responsibilities
    std::size_t n_params = 0;
    bool converged = false;
    std::size_t n_iter = 0;
    // diagnostics
    double max_ll_drop = 0.0; // largest LL decrease between iterations, repairs excluded
    std::size_t n_repairs = 0; // degeneracy repairs taken during the winning run
};

/// Log-likelihood of the data under fixed mixture parameters.
double mixture_loglik(const Matrix& X, const std::vector<double>& weights,
                      const std::vector<std::vector<double>>& means,
                      const std::vector<SymMatrix>& covariances);

/// EM estimation: best of n_starts runs (k-means++-style seeding, log-space
/// E-step, constraint-aware M-step). Throws TooFewRows when n <= K*d and
/// AllStartsFailed when every start degenerates beyond repair.
FittedMixture fit_em(const Matrix& X, std::size_t K, Parameterization param,
                     const EmSettings& settings = {});

struct FitReport {
    double loglik = 0.0;
    double aic = 0.0;
    double bic = 0.0;
    double kic = 0.0;
    double sabic = 0.0;
    double icl = 0.0;
    double entropy = 0.0;
    std::size_t K = 0;
    Parameterization param;
    std::size_t n_params = 0;
    std::size_t n = 0;
};

/// Information criteria and relative entropy for one fit. ICL follows the
/// mclust sign convention (larger is better, typically negative).
FitReport fit_indices(const FittedMixture& m, std::size_t n);

struct SweepEntry {
    std::size_t K = 0;
    Parameterization param;
    std::optional<FittedMixture> fit;
    std::optional<FitReport> report;
    std::string error; // non-empty when the cell failed outright
};

struct KRange {
    std::size_t lo = 1;
    std::size_t hi = 1;
};

struct SweepResult {
    std::vector<SweepEntry> entries; // one per grid cell, K-major then model order
};

/// Fits every (K, parameterization) grid cell. Cells that fail are recorded
/// with their error, never dropped. Per-cell seeds are split deterministically
/// from settings.seed, so results do not depend on scheduling.
SweepResult sweep_models(const Matrix& X, KRange k_range,
                         const std::vector<Parameterization>& params,
                         const EmSettings& settings = {});

enum class SelectionStrategy { RankAggregate, BestBIC };

struct Selection {
    std::size_t K = 0;
    Parameterization param;
    std::size_t entry_index = 0;
};

/// RankAggregate ranks converged entries on AIC, BIC, KIC, SABIC (lower is
/// better) and ICL, entropy (higher is better), using average ranks on ties,
/// and picks the smallest rank sum; ties break on lower BIC, then smaller K,
/// then lower model number. BestBIC picks the minimum-BIC converged entry.
Selection select_model(const SweepResult& sweep, SelectionStrategy strategy);

struct Classification {
    std::vector<int> labels; // 1-based, argmax posterior, first index on ties
    std::vector<std::size_t> sizes; // per class 1..K
};

Classification classify(const FittedMixture& m);

/// Annexe-3-style CSV: model, classes, loglik, aic, bic, kic, sabic, icl,
/// entropy, converged. Failed cells keep their row with empty index fields.
void write_sweep_csv(const SweepResult& sweep, std::ostream& out);

} // namespace lpanet

#endif
