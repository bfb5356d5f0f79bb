#ifndef LPANET_PROFILE_DESC_HPP
#define LPANET_PROFILE_DESC_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lpanet/dataset.hpp"
#include "lpanet/numerics.hpp"

namespace lpanet {

/// v-test of a profile mean against the overall mean (catdes convention:
/// overall variance uses ddof = 0, finite-population correction applied).
struct QuantVTest {
    std::string variable;
    int profile = 0;
    double mean_in_profile = 0.0;
    double mean_overall = 0.0;
    double v = 0.0;
    double p = 1.0;
};

/// v-test of a modality frequency inside a profile against the whole sample,
/// under the hypergeometric null.
struct QualVTest {
    std::string variable;
    std::string modality;
    int profile = 0;
    double pct_in_profile = 0.0;
    double pct_overall = 0.0;
    double v = 0.0;
    double p = 1.0;
};

/// Core quantitative v-test. Throws DegenerateGroup when the profile is empty
/// or covers every row, ZeroVariance when the values are constant.
QuantVTest vtest_quantitative(const std::vector<double>& values,
                              const std::vector<bool>& in_profile);

/// Core categorical v-test on counts: N rows total, n_j with the modality,
/// n_k in the profile, n_kj with the modality inside the profile.
QualVTest vtest_categorical(std::int64_t N, std::int64_t n_j, std::int64_t n_k,
                            std::int64_t n_kj);

struct DescRow {
    int profile = 0;
    std::string variable;
    std::string modality; // empty for quantitative rows
    double v = 0.0;
    double p = 1.0;
    double in_profile = 0.0; // mean or percentage
    double overall = 0.0;
    char flag = ' '; // '+', '-' when p <= alpha, blank otherwise
};

struct ProfileDescription {
    std::vector<DescRow> rows; // profile ascending, |v| descending inside
    std::vector<std::string> warnings;
    double alpha = 0.05;
};

/// Tests every profile against every illustrative variable (quantitative
/// columns by mean contrast, categorical columns modality by modality).
/// Degenerate contrasts are skipped with a warning rather than failing the
/// whole report.
ProfileDescription describe_profiles(const Dataset& ds, const std::vector<int>& labels,
                                     const std::vector<std::string>& illustrative,
                                     double alpha = 0.05);

struct MembershipCorrelation {
    int profile = 0;
    std::string variable;
    double r = 0.0;
    std::string stars; // "***", "**", "*" or ""
};

/// Pearson correlations between each posterior column and each numeric
/// variable, starred by the Student t test on n-2 degrees of freedom.
std::vector<MembershipCorrelation> membership_correlations(
    const Matrix& posteriors, const Dataset& ds, const std::vector<std::string>& variables);

void write_description_csv(const ProfileDescription& report, std::ostream& out);
void write_correlations_csv(const std::vector<MembershipCorrelation>& rows, std::ostream& out);

} // namespace lpanet

#endif
