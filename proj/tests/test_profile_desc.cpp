#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "lpanet/dataset.hpp"
#include "lpanet/errors.hpp"
#include "lpanet/profile_desc.hpp"
#include "lpanet/rng.hpp"

using namespace lpanet;

TEST_SUITE_BEGIN("profile_desc");

TEST_CASE("quantitative v-test on the hand example") {
    // values [0,0,10,10], profile = last two rows: v = sqrt(3), p ~ 0.0833
    const QuantVTest t =
        vtest_quantitative({0.0, 0.0, 10.0, 10.0}, {false, false, true, true});
    CHECK(t.v == doctest::Approx(std::sqrt(3.0)).epsilon(1e-10));
    CHECK(t.p == doctest::Approx(0.0833).epsilon(1e-2));
    CHECK(t.mean_in_profile == doctest::Approx(10.0));
    CHECK(t.mean_overall == doctest::Approx(5.0));
}

TEST_CASE("quantitative v-test degenerate cases") {
    // profile mean equals the overall mean
    const QuantVTest zero = vtest_quantitative({1.0, 3.0, 1.0, 3.0}, {true, false, false, true});
    CHECK(zero.v == doctest::Approx(0.0));
    CHECK(zero.p == doctest::Approx(1.0));

    CHECK_THROWS_AS(vtest_quantitative({1.0, 2.0}, {true, true}), DegenerateGroup);
    CHECK_THROWS_AS(vtest_quantitative({1.0, 2.0}, {false, false}), DegenerateGroup);
    CHECK_THROWS_AS(vtest_quantitative({2.0, 2.0, 2.0}, {true, false, false}), ZeroVariance);
}

TEST_CASE("quantitative v-test is affine invariant (property)") {
    Rng rng(44);
    std::vector<double> values(60);
    std::vector<bool> mask(60);
    for (std::size_t i = 0; i < 60; ++i) {
        values[i] = rng.normal();
        mask[i] = rng.uniform01() < 0.3;
    }
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) mask[0] = true;
    if (std::all_of(mask.begin(), mask.end(), [](bool b) { return b; })) mask[0] = false;
    const QuantVTest base = vtest_quantitative(values, mask);
    std::vector<double> scaled = values;
    for (double& v : scaled) v = 3.7 * v - 11.0;
    const QuantVTest after = vtest_quantitative(scaled, mask);
    CHECK(std::abs(after.v - base.v) < 1e-10);
}

TEST_CASE("categorical v-test on the hand example") {
    // N=10, n_j=5, n_k=5, n_kj=5: p = 2/252, v ~ +2.655
    const QualVTest t = vtest_categorical(10, 5, 5, 5);
    CHECK(t.p == doctest::Approx(2.0 / 252.0).epsilon(1e-9));
    CHECK(t.v == doctest::Approx(2.655).epsilon(1e-3));
    CHECK(t.pct_in_profile == doctest::Approx(100.0));
    CHECK(t.pct_overall == doctest::Approx(50.0));
}

TEST_CASE("categorical v-test under exact proportionality") {
    // modality spread exactly proportionally: direction 0, p close to 1
    const QualVTest t = vtest_categorical(10, 4, 5, 2);
    CHECK(t.v == 0.0);
    CHECK(t.p > 0.9);
}

TEST_CASE("categorical v-test rejects impossible counts") {
    CHECK_THROWS_AS(vtest_categorical(10, 3, 5, 4), InvalidCounts); // n_kj > n_j
    CHECK_THROWS_AS(vtest_categorical(10, 11, 5, 2), InvalidCounts);
    CHECK_THROWS_AS(vtest_categorical(0, 0, 0, 0), InvalidCounts);
}

TEST_CASE("categorical v-test marked/unmarked symmetry (property)") {
    Rng rng(13);
    for (int rep = 0; rep < 200; ++rep) {
        const std::int64_t N = 5 + static_cast<std::int64_t>(rng.uniform01() * 60);
        const std::int64_t n_j = 1 + static_cast<std::int64_t>(rng.uniform01() * (N - 1));
        const std::int64_t n_k = 1 + static_cast<std::int64_t>(rng.uniform01() * (N - 1));
        const std::int64_t lo = std::max<std::int64_t>(0, n_k + n_j - N);
        const std::int64_t hi = std::min(n_j, n_k);
        const std::int64_t n_kj = lo + static_cast<std::int64_t>(rng.uniform01() *
                                                                 static_cast<double>(hi - lo + 1));
        const QualVTest a = vtest_categorical(N, n_j, n_k, n_kj);
        const QualVTest b = vtest_categorical(N, N - n_j, n_k, n_k - n_kj);
        CHECK(a.p == doctest::Approx(b.p).epsilon(1e-10));
        CHECK(a.v == doctest::Approx(-b.v).epsilon(1e-8));
    }
}

namespace {

Dataset shifted_dataset(std::size_t n, double shift, Rng& rng, std::vector<int>& labels) {
    // profile 1 gets a +shift on variable A; B is pure noise; grp correlates
    std::vector<Column> cols(3);
    cols[0].spec = {"A", ColumnKind::Numeric};
    cols[1].spec = {"B", ColumnKind::Numeric};
    cols[2].spec = {"grp", ColumnKind::Categorical};
    labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = (i % 2 == 0) ? 1 : 2;
        const double bump = labels[i] == 1 ? shift : 0.0;
        cols[0].nums.push_back(rng.normal() + bump);
        cols[1].nums.push_back(rng.normal());
        cols[2].cats.push_back(rng.uniform01() < (labels[i] == 1 ? 0.7 : 0.3) ? "X" : "Y");
    }
    return Dataset(std::move(cols), n);
}

} // namespace

TEST_CASE("describe_profiles flags a shifted variable") {
    Rng rng(888);
    std::vector<int> labels;
    const Dataset ds = shifted_dataset(120, 2.0, rng, labels);
    const ProfileDescription report = describe_profiles(ds, labels, {"A", "B", "grp"}, 0.05);

    bool a_plus_for_1 = false;
    for (const DescRow& row : report.rows) {
        if (row.profile == 1 && row.variable == "A") {
            CHECK(row.flag == '+');
            CHECK(row.v > 0.0);
            a_plus_for_1 = true;
        }
    }
    CHECK(a_plus_for_1);

    // rows are sorted by |v| descending inside each profile
    double last = 1e300;
    int current = -1;
    for (const DescRow& row : report.rows) {
        if (row.profile != current) {
            current = row.profile;
            last = 1e300;
        }
        CHECK(std::abs(row.v) <= last + 1e-12);
        last = std::abs(row.v);
    }
}

TEST_CASE("describe_profiles with a single profile yields an empty report") {
    Rng rng(5);
    std::vector<int> labels;
    const Dataset ds = shifted_dataset(40, 1.0, rng, labels);
    std::fill(labels.begin(), labels.end(), 1);
    const ProfileDescription report = describe_profiles(ds, labels, {"A", "B"}, 0.05);
    CHECK(report.rows.empty());
    CHECK(!report.warnings.empty()); // degenerate contrasts are reported, not fatal
}

TEST_CASE("describe_profiles conserves categorical counts (property)") {
    Rng rng(31);
    std::vector<int> labels;
    const Dataset ds = shifted_dataset(150, 1.0, rng, labels);
    const ProfileDescription report = describe_profiles(ds, labels, {"grp"}, 0.05);
    // for each profile, sum over modalities of pct_in_profile*n_k/100 == n_k
    std::vector<std::size_t> sizes(3, 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int profile : {1, 2}) {
        double total_pct = 0.0;
        for (const DescRow& row : report.rows)
            if (row.profile == profile && row.variable == "grp") total_pct += row.in_profile;
        const double nk = static_cast<double>(sizes[static_cast<std::size_t>(profile)]);
        CHECK(total_pct * nk / 100.0 == doctest::Approx(nk).epsilon(1e-10));
    }
}

TEST_CASE("null labels flag about alpha of the tests (Monte Carlo)") {
    // 200 shuffles of pure-noise data; the flag rate must track alpha
    Rng rng(246);
    const std::size_t n = 80;
    std::size_t tests = 0, flagged = 0;
    for (int rep = 0; rep < 200; ++rep) {
        std::vector<Column> cols(1);
        cols[0].spec = {"x", ColumnKind::Numeric};
        for (std::size_t i = 0; i < n; ++i) cols[0].nums.push_back(rng.normal());
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) labels[i] = rng.uniform01() < 0.5 ? 1 : 2;
        if (std::count(labels.begin(), labels.end(), 1) == 0 ||
            std::count(labels.begin(), labels.end(), 1) == static_cast<long>(n))
            continue;
        const Dataset ds(std::move(cols), n);
        const ProfileDescription report = describe_profiles(ds, labels, {"x"}, 0.05);
        for (const DescRow& row : report.rows) {
            ++tests;
            if (row.flag != ' ') ++flagged;
        }
    }
    const double rate = static_cast<double>(flagged) / static_cast<double>(tests);
    const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(tests));
    CHECK(std::abs(rate - 0.05) <= 2.0 * se + 1e-12);
}

TEST_CASE("membership correlations: exact and published starred case") {
    Rng rng(12);
    const std::size_t n = 850;
    Matrix posteriors(n, 1);
    std::vector<Column> cols(2);
    cols[0].spec = {"same", ColumnKind::Numeric};
    cols[1].spec = {"weak", ColumnKind::Numeric};
    for (std::size_t i = 0; i < n; ++i) {
        const double u = rng.normal();
        posteriors.at(i, 0) = u;
        cols[0].nums.push_back(u); // identical to the posterior column
        cols[1].nums.push_back(0.26 * u + std::sqrt(1.0 - 0.26 * 0.26) * rng.normal());
    }
    const Dataset ds(std::move(cols), n);
    const auto rows = membership_correlations(posteriors, ds, {"same", "weak"});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].r == doctest::Approx(1.0));
    CHECK(rows[0].stars == "***");
    // r near 0.26 with n = 850 is p < .001 (the Annexe-5 Turnover row)
    CHECK(rows[1].r == doctest::Approx(0.26).epsilon(0.25));
    CHECK(rows[1].stars == "***");
}

TEST_CASE("membership correlations on independent noise stay small") {
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        const std::size_t n = 850;
        Matrix posteriors(n, 1);
        std::vector<Column> cols(1);
        cols[0].spec = {"noise", ColumnKind::Numeric};
        for (std::size_t i = 0; i < n; ++i) {
            posteriors.at(i, 0) = rng.normal();
            cols[0].nums.push_back(rng.normal());
        }
        const Dataset ds(std::move(cols), n);
        const auto rows = membership_correlations(posteriors, ds, {"noise"});
        if (std::abs(rows[0].r) < 0.1) ++ok;
    }
    CHECK(ok >= 19);
}

TEST_CASE("membership correlations reject constant input") {
    Matrix posteriors(5, 1, 1.0); // constant column
    std::vector<Column> cols(1);
    cols[0].spec = {"x", ColumnKind::Numeric};
    cols[0].nums = {1.0, 2.0, 3.0, 4.0, 5.0};
    const Dataset ds(std::move(cols), 5);
    CHECK_THROWS_AS(membership_correlations(posteriors, ds, {"x"}), ZeroVariance);
}

TEST_SUITE_END();
