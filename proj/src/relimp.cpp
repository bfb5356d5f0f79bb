#include "lpanet/relimp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "lpanet/csv.hpp"
#include "lpanet/errors.hpp"

namespace lpanet {

OLSFit ols_fit(const std::vector<double>& y, const Matrix& X) {
    const std::size_t n = X.rows, q = X.cols;
    if (y.size() != n) throw LengthMismatch("y and X row counts differ");
    if (n <= q + 1)
        throw TooFewRows("need n > q + 1, got n = " + std::to_string(n) + ", q = " +
                         std::to_string(q));

    std::vector<double> col_mean(q);
    for (std::size_t j = 0; j < q; ++j) {
        KahanSum s;
        for (std::size_t i = 0; i < n; ++i) s.add(X.at(i, j));
        col_mean[j] = s.value() / static_cast<double>(n);
    }
    KahanSum sy;
    for (double v : y) sy.add(v);
    const double y_mean = sy.value() / static_cast<double>(n);

    // centered normal equations; the intercept is recovered afterwards
    SymMatrix gram(q);
    std::vector<double> xy(q);
    for (std::size_t a = 0; a < q; ++a) {
        for (std::size_t b = a; b < q; ++b) {
            KahanSum s;
            for (std::size_t i = 0; i < n; ++i)
                s.add((X.at(i, a) - col_mean[a]) * (X.at(i, b) - col_mean[b]));
            gram.set(a, b, s.value());
        }
        KahanSum s;
        for (std::size_t i = 0; i < n; ++i) s.add((X.at(i, a) - col_mean[a]) * (y[i] - y_mean));
        xy[a] = s.value();
    }
    KahanSum syy;
    for (double v : y) syy.add((v - y_mean) * (v - y_mean));
    const double sst = syy.value();
    if (!(sst > 0.0)) throw ZeroVariance("response is constant");

    OLSFit fit;
    fit.n = n;
    fit.p_cols = q;
    if (q == 0) {
        fit.intercept = y_mean;
        fit.r_squared = 0.0;
        fit.residuals.resize(n);
        for (std::size_t i = 0; i < n; ++i) fit.residuals[i] = y[i] - y_mean;
        return fit;
    }

    SpdFactorization fac;
    try {
        fac = spd_factorize(gram);
    } catch (const NotPositiveDefinite& e) {
        throw RankDeficient(std::string("collinear regressors: ") + e.what());
    }
    fit.coefficients = fac.solve(xy);
    KahanSum b0;
    b0.add(y_mean);
    for (std::size_t j = 0; j < q; ++j) b0.add(-fit.coefficients[j] * col_mean[j]);
    fit.intercept = b0.value();

    fit.residuals.resize(n);
    KahanSum sse;
    for (std::size_t i = 0; i < n; ++i) {
        double pred = fit.intercept;
        for (std::size_t j = 0; j < q; ++j) pred += fit.coefficients[j] * X.at(i, j);
        fit.residuals[i] = y[i] - pred;
        sse.add(fit.residuals[i] * fit.residuals[i]);
    }
    fit.r_squared = 1.0 - sse.value() / sst;
    return fit;
}

namespace {

// Centered cross-products of all predictor columns and the response, built
// once; every subset regression is then a small SPD solve on a slice.
class SubsetR2Engine {
  public:
    SubsetR2Engine(const std::vector<double>& y, const std::vector<PredictorGroup>& groups,
                   const Dataset& data) {
        n_groups_ = groups.size();
        if (n_groups_ == 0) throw ConfigError("no predictor groups");
        if (n_groups_ > 20)
            throw TooManyGroups(std::to_string(n_groups_) + " groups exceed the limit of 20");
        std::set<std::string> seen;
        for (const PredictorGroup& g : groups) {
            if (g.columns.empty())
                throw ConfigError("predictor group '" + g.name + "' has no columns");
            group_cols_.emplace_back();
            for (const std::string& col : g.columns) {
                if (!seen.insert(col).second)
                    throw ConfigError("column '" + col + "' appears in two groups");
                group_cols_.back().push_back(columns_.size());
                columns_.push_back(col);
            }
            names_.push_back(g.name);
        }

        const std::size_t n = data.n_rows();
        if (y.size() != n) throw LengthMismatch("response length does not match dataset");
        const std::size_t q = columns_.size();
        if (n <= q + 1) throw TooFewRows("need n > total predictor columns + 1");
        Matrix X = data.numeric_matrix(columns_);

        std::vector<double> mean(q);
        for (std::size_t j = 0; j < q; ++j) {
            KahanSum s;
            for (std::size_t i = 0; i < n; ++i) s.add(X.at(i, j));
            mean[j] = s.value() / static_cast<double>(n);
        }
        KahanSum sy;
        for (double v : y) sy.add(v);
        const double y_mean = sy.value() / static_cast<double>(n);

        gram_ = SymMatrix(q);
        xy_.resize(q);
        for (std::size_t a = 0; a < q; ++a) {
            for (std::size_t b = a; b < q; ++b) {
                KahanSum s;
                for (std::size_t i = 0; i < n; ++i)
                    s.add((X.at(i, a) - mean[a]) * (X.at(i, b) - mean[b]));
                gram_.set(a, b, s.value());
            }
            KahanSum s;
            for (std::size_t i = 0; i < n; ++i) s.add((X.at(i, a) - mean[a]) * (y[i] - y_mean));
            xy_[a] = s.value();
        }
        KahanSum syy;
        for (double v : y) syy.add((v - y_mean) * (v - y_mean));
        sst_ = syy.value();
        if (!(sst_ > 0.0)) throw ZeroVariance("response is constant");
        cache_.assign(std::size_t(1) << n_groups_, -1.0);
        cache_[0] = 0.0;
    }

    std::size_t n_groups() const { return n_groups_; }
    const std::vector<std::string>& names() const { return names_; }

    double r2(std::uint32_t mask) {
        double& slot = cache_[mask];
        if (slot >= 0.0) return slot;
        std::vector<std::size_t> cols;
        for (std::size_t g = 0; g < n_groups_; ++g)
            if (mask & (1u << g))
                for (std::size_t c : group_cols_[g]) cols.push_back(c);
        const std::size_t m = cols.size();
        SymMatrix sub(m);
        std::vector<double> rhs(m);
        for (std::size_t a = 0; a < m; ++a) {
            for (std::size_t b = a; b < m; ++b) sub.set(a, b, gram_.at(cols[a], cols[b]));
            rhs[a] = xy_[cols[a]];
        }
        SpdFactorization fac;
        try {
            fac = spd_factorize(sub);
        } catch (const NotPositiveDefinite&) {
            throw RankDeficient("rank-deficient subset {" + subset_names(mask) + "}");
        }
        const std::vector<double> beta = fac.solve(rhs);
        KahanSum ssr;
        for (std::size_t a = 0; a < m; ++a) ssr.add(beta[a] * rhs[a]);
        slot = ssr.value() / sst_;
        return slot;
    }

    std::string subset_names(std::uint32_t mask) const {
        std::string out;
        for (std::size_t g = 0; g < n_groups_; ++g) {
            if (!(mask & (1u << g))) continue;
            if (!out.empty()) out += ", ";
            out += names_[g];
        }
        return out;
    }

  private:
    std::size_t n_groups_ = 0;
    std::vector<std::string> names_;
    std::vector<std::string> columns_;
    std::vector<std::vector<std::size_t>> group_cols_;
    SymMatrix gram_;
    std::vector<double> xy_;
    double sst_ = 0.0;
    std::vector<double> cache_;
};

double lmg_weight(std::size_t subset_size, std::size_t g) {
    // s! (g - s - 1)! / g!
    return std::exp(std::lgamma(static_cast<double>(subset_size) + 1.0) +
                    std::lgamma(static_cast<double>(g - subset_size)) -
                    std::lgamma(static_cast<double>(g) + 1.0));
}

} // namespace

ImportanceReport lmg_shares(const std::vector<double>& y,
                            const std::vector<PredictorGroup>& groups, const Dataset& data,
                            const std::string& response_name) {
    SubsetR2Engine engine(y, groups, data);
    const std::size_t g = engine.n_groups();
    const std::uint32_t full = (1u << g) - 1u;

    ImportanceReport report;
    report.response = response_name;
    report.group_names = engine.names();
    report.full_r_squared = engine.r2(full);
    report.shares.assign(g, 0.0);

    std::vector<double> weight(g);
    for (std::size_t s = 0; s < g; ++s) weight[s] = lmg_weight(s, g);

    for (std::size_t j = 0; j < g; ++j) {
        const std::uint32_t bit = 1u << j;
        KahanSum share;
        const std::uint32_t others = full & ~bit;
        // iterate over all subsets of the other groups
        std::uint32_t sub = 0;
        while (true) {
            const std::size_t size = static_cast<std::size_t>(__builtin_popcount(sub));
            share.add(weight[size] * (engine.r2(sub | bit) - engine.r2(sub)));
            if (sub == others) break;
            sub = (sub - others) & others;
        }
        report.shares[j] = share.value();
    }

    report.pct_of_r2.assign(g, 0.0);
    for (std::size_t j = 0; j < g; ++j)
        report.pct_of_r2[j] = 100.0 * report.shares[j] / report.full_r_squared;
    return report;
}

DominanceReport dominance_analysis(const std::vector<double>& y,
                                   const std::vector<PredictorGroup>& groups,
                                   const Dataset& data) {
    SubsetR2Engine engine(y, groups, data);
    const std::size_t g = engine.n_groups();
    const std::uint32_t full = (1u << g) - 1u;

    DominanceReport report;
    report.group_names = engine.names();

    // conditional dominance: mean incremental R^2 by subset size
    report.conditional_means.assign(g, std::vector<double>(g, 0.0));
    std::vector<std::vector<std::size_t>> counts(g, std::vector<std::size_t>(g, 0));
    for (std::size_t j = 0; j < g; ++j) {
        const std::uint32_t bit = 1u << j;
        const std::uint32_t others = full & ~bit;
        std::uint32_t sub = 0;
        std::vector<KahanSum> sums(g);
        while (true) {
            const std::size_t size = static_cast<std::size_t>(__builtin_popcount(sub));
            sums[size].add(engine.r2(sub | bit) - engine.r2(sub));
            ++counts[j][size];
            if (sub == others) break;
            sub = (sub - others) & others;
        }
        for (std::size_t s = 0; s < g; ++s)
            report.conditional_means[j][s] = sums[s].value() / static_cast<double>(counts[j][s]);
    }

    // general dominance: mean of the conditional means over sizes (== LMG)
    report.general_weights.assign(g, 0.0);
    for (std::size_t j = 0; j < g; ++j) {
        KahanSum s;
        for (std::size_t size = 0; size < g; ++size) s.add(report.conditional_means[j][size]);
        report.general_weights[j] = s.value() / static_cast<double>(g);
    }

    for (std::size_t j = 0; j < g; ++j) {
        for (std::size_t k = j + 1; k < g; ++k) {
            DominancePair pair;
            pair.first = report.group_names[j];
            pair.second = report.group_names[k];

            // complete: compare increments on every common subset
            const std::uint32_t bit_j = 1u << j, bit_k = 1u << k;
            const std::uint32_t others = full & ~(bit_j | bit_k);
            bool j_ge = true, k_ge = true, j_strict = false, k_strict = false;
            std::uint32_t sub = 0;
            while (true) {
                const double inc_j = engine.r2(sub | bit_j) - engine.r2(sub);
                const double inc_k = engine.r2(sub | bit_k) - engine.r2(sub);
                if (inc_j < inc_k) j_ge = false;
                if (inc_k < inc_j) k_ge = false;
                if (inc_j > inc_k) j_strict = true;
                if (inc_k > inc_j) k_strict = true;
                if (sub == others) break;
                sub = (sub - others) & others;
            }
            pair.complete_first = j_ge && j_strict;
            pair.complete_second = k_ge && k_strict;

            bool cond_j = true, cond_k = true, cond_j_strict = false, cond_k_strict = false;
            for (std::size_t s = 0; s < g; ++s) {
                const double a = report.conditional_means[j][s];
                const double b = report.conditional_means[k][s];
                if (a < b) cond_j = false;
                if (b < a) cond_k = false;
                if (a > b) cond_j_strict = true;
                if (b > a) cond_k_strict = true;
            }
            pair.conditional_first = cond_j && cond_j_strict;
            pair.conditional_second = cond_k && cond_k_strict;

            pair.general_first = report.general_weights[j] > report.general_weights[k];
            pair.general_second = report.general_weights[k] > report.general_weights[j];
            report.pairs.push_back(std::move(pair));
        }
    }
    return report;
}

ImportanceMatrix importance_matrix(const std::vector<ResponseColumn>& responses,
                                   const std::vector<PredictorGroup>& groups,
                                   const Dataset& data) {
    if (responses.empty()) throw ConfigError("no responses given");
    ImportanceMatrix m;
    for (const ResponseColumn& resp : responses)
        m.per_response.push_back(lmg_shares(resp.values, groups, data, resp.name));
    m.group_names = m.per_response.front().group_names;
    const std::size_t g = m.group_names.size();
    m.mean_influence.assign(g, 0.0);
    for (std::size_t j = 0; j < g; ++j) {
        KahanSum s;
        for (const ImportanceReport& r : m.per_response) s.add(r.pct_of_r2[j]);
        m.mean_influence[j] = s.value() / static_cast<double>(m.per_response.size());
    }
    return m;
}

void write_importance_csv(const ImportanceMatrix& m, std::ostream& out) {
    out << "predictor";
    for (const ImportanceReport& r : m.per_response)
        out << ',' << csv_quote(r.response + " R2: " + format_double(r.full_r_squared));
    out << ",mean_influence\n";
    for (std::size_t j = 0; j < m.group_names.size(); ++j) {
        out << csv_quote(m.group_names[j]);
        for (const ImportanceReport& r : m.per_response)
            out << ',' << format_double(std::max(0.0, r.pct_of_r2[j]));
        out << ',' << format_double(std::max(0.0, m.mean_influence[j])) << '\n';
    }
}

} // namespace lpanet
