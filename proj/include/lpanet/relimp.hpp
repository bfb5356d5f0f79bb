#ifndef LPANET_RELIMP_HPP
#define LPANET_RELIMP_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lpanet/dataset.hpp"
#include "lpanet/numerics.hpp"

namespace lpanet {

struct OLSFit {
    std::vector<double> coefficients; // one per regressor column
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n = 0;
    std::size_t p_cols = 0;
    std::vector<double> residuals;
};

/// Least squares with intercept via normal equations and SPD factorization.
/// Throws RankDeficient on collinear regressors, ZeroVariance on constant y.
OLSFit ols_fit(const std::vector<double>& y, const Matrix& X);

struct ImportanceReport {
    std::string response;
    double full_r_squared = 0.0;
    std::vector<std::string> group_names;
    std::vector<double> shares;    // LMG decomposition, sums to full_r_squared
    std::vector<double> pct_of_r2; // 100 * share / full R^2
};

/// LMG relative importance: averaged sequential R^2 gains over all orderings,
/// computed with subset weights and a bitmask-cached Gram solve per subset.
/// Groups are treated as units (a categorical indicator block enters whole).
ImportanceReport lmg_shares(const std::vector<double>& y,
                            const std::vector<PredictorGroup>& groups, const Dataset& data,
                            const std::string& response_name = "y");

struct DominancePair {
    std::string first;
    std::string second;
    // dominance of `first` over `second` at the three levels
    bool complete_first = false;
    bool complete_second = false;
    bool conditional_first = false;
    bool conditional_second = false;
    bool general_first = false;
    bool general_second = false;
};

struct DominanceReport {
    std::vector<std::string> group_names;
    std::vector<std::vector<double>> conditional_means; // group x subset size
    std::vector<double> general_weights;                // == LMG shares
    std::vector<DominancePair> pairs;
};

DominanceReport dominance_analysis(const std::vector<double>& y,
                                   const std::vector<PredictorGroup>& groups,
                                   const Dataset& data);

struct ResponseColumn {
    std::string name;
    std::vector<double> values;
};

struct ImportanceMatrix {
    std::vector<std::string> group_names;
    std::vector<ImportanceReport> per_response;
    std::vector<double> mean_influence; // unweighted mean pct per group
};

/// One LMG decomposition per response (Tableau-5 shape): rows are predictor
/// groups, columns are responses with their full-model R^2, plus the final
/// mean-influence column.
ImportanceMatrix importance_matrix(const std::vector<ResponseColumn>& responses,
                                   const std::vector<PredictorGroup>& groups,
                                   const Dataset& data);

/// CSV with "R2: <value>" header metadata per response column; negative
/// shares are displayed floored at zero (raw values live in the JSON report).
void write_importance_csv(const ImportanceMatrix& m, std::ostream& out);

} // namespace lpanet

#endif
