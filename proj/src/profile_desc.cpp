#include "lpanet/profile_desc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <set>

#include "lpanet/csv.hpp"
#include "lpanet/errors.hpp"
#include "lpanet/stats.hpp"

namespace lpanet {

QuantVTest vtest_quantitative(const std::vector<double>& values,
                              const std::vector<bool>& in_profile) {
    if (values.size() != in_profile.size())
        throw LengthMismatch("values and profile mask differ in length");
    const std::size_t N = values.size();
    std::size_t n_k = 0;
    for (bool b : in_profile)
        if (b) ++n_k;
    if (n_k == 0 || n_k == N)
        throw DegenerateGroup("profile covers " + std::to_string(n_k) + " of " +
                              std::to_string(N) + " rows");

    KahanSum all, grp;
    for (std::size_t i = 0; i < N; ++i) {
        all.add(values[i]);
        if (in_profile[i]) grp.add(values[i]);
    }
    const double mean = all.value() / static_cast<double>(N);
    const double mean_k = grp.value() / static_cast<double>(n_k);
    KahanSum sq;
    for (double v : values) sq.add((v - mean) * (v - mean));
    const double var = sq.value() / static_cast<double>(N); // ddof = 0, catdes convention
    if (!(var > 0.0)) throw ZeroVariance("values are constant");

    const double nk = static_cast<double>(n_k), nn = static_cast<double>(N);
    const double se = std::sqrt(var / nk * (nn - nk) / (nn - 1.0));
    QuantVTest t;
    t.mean_in_profile = mean_k;
    t.mean_overall = mean;
    t.v = (mean_k - mean) / se;
    t.p = 2.0 * (1.0 - norm_cdf(std::abs(t.v)));
    return t;
}

QualVTest vtest_categorical(std::int64_t N, std::int64_t n_j, std::int64_t n_k,
                            std::int64_t n_kj) {
    if (N <= 0 || n_j < 0 || n_k < 0 || n_kj < 0 || n_j > N || n_k > N ||
        n_kj > std::min(n_j, n_k) || n_kj < std::max<std::int64_t>(0, n_k + n_j - N))
        throw InvalidCounts("inconsistent hypergeometric counts");

    const double upper = hypergeom_cdf_upper(N, n_j, n_k, n_kj);
    const double lower = hypergeom_cdf_lower(N, n_j, n_k, n_kj);
    const double p = std::min(1.0, 2.0 * std::min(upper, lower));

    QualVTest t;
    t.pct_in_profile = n_k > 0 ? 100.0 * static_cast<double>(n_kj) / static_cast<double>(n_k) : 0.0;
    t.pct_overall = 100.0 * static_cast<double>(n_j) / static_cast<double>(N);
    t.p = p;
    const double diff = (n_k > 0 ? static_cast<double>(n_kj) / static_cast<double>(n_k) : 0.0) -
                        static_cast<double>(n_j) / static_cast<double>(N);
    const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    t.v = sign == 0.0 ? 0.0 : sign * norm_quantile(1.0 - p / 2.0);
    return t;
}

ProfileDescription describe_profiles(const Dataset& ds, const std::vector<int>& labels,
                                     const std::vector<std::string>& illustrative, double alpha) {
    if (labels.size() != ds.n_rows())
        throw LengthMismatch("got " + std::to_string(labels.size()) + " labels for " +
                             std::to_string(ds.n_rows()) + " rows");
    ProfileDescription report;
    report.alpha = alpha;

    std::set<int> profiles(labels.begin(), labels.end());
    const std::int64_t N = static_cast<std::int64_t>(ds.n_rows());

    for (int profile : profiles) {
        std::vector<bool> mask(ds.n_rows());
        std::int64_t n_k = 0;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            mask[i] = labels[i] == profile;
            if (mask[i]) ++n_k;
        }
        std::vector<DescRow> profile_rows;
        for (const std::string& name : illustrative) {
            const Column& col = ds.column(name);
            if (col.spec.kind == ColumnKind::Numeric) {
                try {
                    QuantVTest t = vtest_quantitative(col.nums, mask);
                    DescRow row;
                    row.profile = profile;
                    row.variable = name;
                    row.v = t.v;
                    row.p = t.p;
                    row.in_profile = t.mean_in_profile;
                    row.overall = t.mean_overall;
                    if (t.p <= alpha) row.flag = t.v >= 0.0 ? '+' : '-';
                    profile_rows.push_back(std::move(row));
                } catch (const Error& e) {
                    report.warnings.push_back("profile " + std::to_string(profile) + ", " +
                                              name + ": " + e.what());
                }
            } else {
                std::map<std::string, std::int64_t> total_counts, profile_counts;
                for (std::size_t i = 0; i < col.cats.size(); ++i) {
                    ++total_counts[col.cats[i]];
                    if (mask[i]) ++profile_counts[col.cats[i]];
                }
                for (const auto& [modality, n_j] : total_counts) {
                    const std::int64_t n_kj =
                        profile_counts.count(modality) ? profile_counts.at(modality) : 0;
                    try {
                        if (n_k == 0 || n_k == N)
                            throw DegenerateGroup("profile covers all or no rows");
                        QualVTest t = vtest_categorical(N, n_j, n_k, n_kj);
                        DescRow row;
                        row.profile = profile;
                        row.variable = name;
                        row.modality = modality;
                        row.v = t.v;
                        row.p = t.p;
                        row.in_profile = t.pct_in_profile;
                        row.overall = t.pct_overall;
                        if (t.p <= alpha) row.flag = t.v >= 0.0 ? '+' : '-';
                        profile_rows.push_back(std::move(row));
                    } catch (const Error& e) {
                        report.warnings.push_back("profile " + std::to_string(profile) + ", " +
                                                  name + "=" + modality + ": " + e.what());
                    }
                }
            }
        }
        std::stable_sort(profile_rows.begin(), profile_rows.end(),
                         [](const DescRow& a, const DescRow& b) {
                             if (std::abs(a.v) != std::abs(b.v))
                                 return std::abs(a.v) > std::abs(b.v);
                             if (a.variable != b.variable) return a.variable < b.variable;
                             return a.modality < b.modality;
                         });
        for (DescRow& row : profile_rows) report.rows.push_back(std::move(row));
    }
    return report;
}

std::vector<MembershipCorrelation> membership_correlations(
    const Matrix& posteriors, const Dataset& ds, const std::vector<std::string>& variables) {
    const std::size_t n = posteriors.rows, K = posteriors.cols;
    if (n != ds.n_rows()) throw LengthMismatch("posterior rows do not match dataset rows");
    if (n < 3) throw TooFewRows("correlations need at least 3 rows");

    auto pearson = [&](const std::vector<double>& a, const std::vector<double>& b,
                       const std::string& what) {
        KahanSum sa, sb;
        for (std::size_t i = 0; i < n; ++i) {
            sa.add(a[i]);
            sb.add(b[i]);
        }
        const double ma = sa.value() / static_cast<double>(n);
        const double mb = sb.value() / static_cast<double>(n);
        KahanSum sab, saa, sbb;
        for (std::size_t i = 0; i < n; ++i) {
            sab.add((a[i] - ma) * (b[i] - mb));
            saa.add((a[i] - ma) * (a[i] - ma));
            sbb.add((b[i] - mb) * (b[i] - mb));
        }
        if (!(saa.value() > 0.0) || !(sbb.value() > 0.0))
            throw ZeroVariance(what + " has zero variance");
        double r = sab.value() / std::sqrt(saa.value() * sbb.value());
        return std::min(1.0, std::max(-1.0, r));
    };

    std::vector<MembershipCorrelation> rows;
    std::vector<double> post(n);
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < n; ++i) post[i] = posteriors.at(i, k);
        for (const std::string& name : variables) {
            const Column& col = ds.column(name);
            if (col.spec.kind != ColumnKind::Numeric)
                throw ParseError("column '" + name + "' is not numeric");
            MembershipCorrelation mc;
            mc.profile = static_cast<int>(k) + 1;
            mc.variable = name;
            mc.r = pearson(post, col.nums, "posterior column " + std::to_string(k + 1));
            double p;
            if (std::abs(mc.r) >= 1.0) {
                p = 0.0;
            } else {
                const double df = static_cast<double>(n) - 2.0;
                const double t = mc.r * std::sqrt(df / (1.0 - mc.r * mc.r));
                p = student_t_two_sided_p(t, df);
            }
            if (p < 0.001)
                mc.stars = "***";
            else if (p < 0.01)
                mc.stars = "**";
            else if (p < 0.05)
                mc.stars = "*";
            rows.push_back(std::move(mc));
        }
    }
    return rows;
}

void write_description_csv(const ProfileDescription& report, std::ostream& out) {
    out << "profile,variable,modality,v,p,mean_or_pct_in_profile,mean_or_pct_overall,flag\n";
    for (const DescRow& row : report.rows) {
        out << row.profile << ',' << csv_quote(row.variable) << ',' << csv_quote(row.modality)
            << ',' << format_double(row.v) << ',' << format_double(row.p) << ','
            << format_double(row.in_profile) << ',' << format_double(row.overall) << ','
            << (row.flag == ' ' ? std::string() : std::string(1, row.flag)) << '\n';
    }
}

void write_correlations_csv(const std::vector<MembershipCorrelation>& rows, std::ostream& out) {
    out << "profile,variable,r,significance\n";
    for (const MembershipCorrelation& row : rows)
        out << row.profile << ',' << csv_quote(row.variable) << ',' << format_double(row.r) << ','
            << row.stars << '\n';
}

} // namespace lpanet
