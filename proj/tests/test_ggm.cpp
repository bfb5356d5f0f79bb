#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "lpanet/dataset.hpp"
#include "lpanet/errors.hpp"
#include "lpanet/ggm.hpp"
#include "lpanet/rng.hpp"

using namespace lpanet;

TEST_SUITE_BEGIN("ggm");

namespace {

SymMatrix corr3(double r12, double r13, double r23) {
    SymMatrix S(3);
    for (std::size_t i = 0; i < 3; ++i) S.set(i, i, 1.0);
    S.set(0, 1, r12);
    S.set(0, 2, r13);
    S.set(1, 2, r23);
    return S;
}

Matrix sample_from_precision(const SymMatrix& theta, std::size_t n, std::uint64_t seed,
                             MixtureSpec* spec_out = nullptr) {
    MixtureSpec spec;
    spec.weights = {1.0};
    spec.means = {std::vector<double>(theta.dim, 0.0)};
    spec.covariances = {invert_spd(theta)};
    if (spec_out) *spec_out = spec;
    const SampleResult res = generate_mixture_sample(spec, n, seed);
    return res.dataset.numeric_matrix(res.dataset.column_names());
}

Network network_from_weights(const std::vector<std::string>& names, const SymMatrix& weights) {
    Network net;
    net.node_names = names;
    net.weights = weights;
    net.precision = SymMatrix::identity(weights.dim);
    for (std::size_t i = 0; i < weights.dim; ++i)
        for (std::size_t j = i + 1; j < weights.dim; ++j)
            net.precision.set(i, j, weights.at(i, j) == 0.0 ? 0.0 : -weights.at(i, j));
    net.n = 100;
    return net;
}

} // namespace

TEST_CASE("partial correlations of the identity vanish") {
    const SymMatrix P = partial_correlations(SymMatrix::identity(4));
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) CHECK(P.at(i, j) == doctest::Approx(0.0));
}

TEST_CASE("partial correlations match the three-variable recursion") {
    // r12 = r23 = 0.5, r13 = 0.25: P13 = 0, P12 = 0.4472
    const SymMatrix P = partial_correlations(corr3(0.5, 0.25, 0.5));
    CHECK(P.at(0, 2) == doctest::Approx(0.0).epsilon(1e-12));
    const double expected = (0.5 - 0.25 * 0.5) / std::sqrt((1 - 0.0625) * (1 - 0.25));
    CHECK(P.at(0, 1) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(P.at(0, 1) == doctest::Approx(0.4472).epsilon(1e-4));
}

TEST_CASE("partial correlations reject singular input") {
    CHECK_THROWS_AS(partial_correlations(corr3(1.0, 1.0, 1.0)), NotPositiveDefinite);
}

TEST_CASE("glasso at lambda zero is the plain inverse") {
    Rng rng(5);
    Matrix X(400, 4);
    for (std::size_t i = 0; i < 400; ++i) {
        X.at(i, 0) = rng.normal();
        X.at(i, 1) = 0.6 * X.at(i, 0) + rng.normal();
        X.at(i, 2) = rng.normal() - 0.3 * X.at(i, 1);
        X.at(i, 3) = rng.normal();
    }
    const SymMatrix S = correlation_matrix(X);
    const GlassoResult res = glasso_fit(S, 0.0, 1e-9, 2000);
    CHECK(res.converged);
    const SymMatrix direct = invert_spd(S);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(res.theta.at(i, j) - direct.at(i, j)) < 1e-5);
}

TEST_CASE("glasso at lambda >= lambda_max is diagonal") {
    const SymMatrix S = corr3(0.5, 0.25, 0.4);
    const GlassoResult res = glasso_fit(S, 0.5, 1e-8, 200);
    CHECK(res.converged);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = i + 1; j < 3; ++j) CHECK(res.theta.at(i, j) == 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(res.theta.at(i, i) == doctest::Approx(1.0 / S.at(i, i)).epsilon(1e-8));
}

TEST_CASE("glasso matches an independent proximal-gradient optimizer") {
    const SymMatrix S = corr3(0.5, 0.25, 0.4);
    const double lambda = 0.1;
    const GlassoResult fast = glasso_fit(S, lambda, 1e-9, 2000);
    CHECK(fast.converged);
    const SymMatrix slow = test::glasso_prox_gradient(S, lambda);
    const double obj_fast = test::glasso_objective(fast.theta, S, lambda);
    const double obj_slow = test::glasso_objective(slow, S, lambda);
    CHECK(std::abs(obj_fast - obj_slow) < 1e-4);
    CHECK(obj_fast >= obj_slow - 1e-4); // coordinate descent is no worse
}

TEST_CASE("glasso satisfies the subgradient certificate on zero entries") {
    Rng rng(9);
    Matrix X(600, 5);
    for (std::size_t i = 0; i < 600; ++i) {
        for (std::size_t j = 0; j < 5; ++j) X.at(i, j) = rng.normal();
        X.at(i, 1) += 0.8 * X.at(i, 0);
        X.at(i, 3) += 0.5 * X.at(i, 2);
    }
    const SymMatrix S = correlation_matrix(X);
    for (double lambda : {0.05, 0.15, 0.3}) {
        const GlassoResult res = glasso_fit(S, lambda, 1e-9, 2000);
        const SymMatrix inv = invert_spd(res.theta); // d(log det T - tr(ST))/dT = T^-1 - S
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = i + 1; j < 5; ++j)
                if (res.theta.at(i, j) == 0.0)
                    CHECK(std::abs(inv.at(i, j) - S.at(i, j)) <= lambda + 1e-4);
    }
}

TEST_CASE("ebic reduces to BIC at gamma zero and matches hand arithmetic") {
    // hand-built theta with 2 edges, d=3, n=100
    SymMatrix theta = SymMatrix::identity(3);
    theta.set(0, 1, -0.3);
    theta.set(1, 2, 0.2);
    const SymMatrix S = corr3(0.4, 0.1, -0.25);

    const SpdFactorization fac = spd_factorize(theta);
    double trace = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) trace += S.at(i, j) * theta.at(i, j);
    const double L = 0.5 * 100.0 * (fac.log_det - trace);

    const double gamma0 = ebic_score(theta, S, 100, 0.0);
    CHECK(gamma0 == doctest::Approx(-2.0 * L + 2.0 * std::log(100.0)).epsilon(1e-10));
    const double gamma_half = ebic_score(theta, S, 100, 0.5);
    CHECK(gamma_half ==
          doctest::Approx(-2.0 * L + 2.0 * std::log(100.0) + 4.0 * 0.5 * 2.0 * std::log(3.0))
              .epsilon(1e-10));

    // E = 0 leaves only the likelihood term
    const SymMatrix diag = SymMatrix::identity(3);
    const SpdFactorization fd = spd_factorize(diag);
    double trace_d = 0.0;
    for (std::size_t i = 0; i < 3; ++i) trace_d += S.at(i, i);
    const double Ld = 0.5 * 100.0 * (fd.log_det - trace_d);
    CHECK(ebic_score(diag, S, 100, 0.7) == doctest::Approx(-2.0 * Ld).epsilon(1e-10));
}

TEST_CASE("estimate_network on independent columns stays empty") {
    int clean = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed * 13);
        Matrix X(2000, 5);
        for (double& v : X.data) v = rng.normal();
        const Network net = estimate_network(X);
        if (net.edge_count() <= 1) ++clean;
        // edge count along the grid is monotone in lambda
        for (std::size_t i = 1; i < net.path_edge_counts.size(); ++i)
            CHECK(net.path_edge_counts[i] >= net.path_edge_counts[i - 1]); // grid descends
    }
    CHECK(clean >= 19);
}

TEST_CASE("estimate_network recovers a chain graph") {
    SymMatrix theta = SymMatrix::identity(5);
    for (std::size_t i = 0; i + 1 < 5; ++i) theta.set(i, i + 1, -0.35);
    int recovered = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix X = sample_from_precision(theta, 5000, seed);
        const Network net = estimate_network(X);
        bool ok = true;
        for (std::size_t i = 0; i < 5 && ok; ++i) {
            for (std::size_t j = i + 1; j < 5 && ok; ++j) {
                const bool true_edge = (j == i + 1);
                const double w = net.weights.at(i, j);
                // every true edge present with the right sign (-theta > 0);
                // EBIC may keep a residual spurious edge, but only a weak one
                if (true_edge && !(w > 0.0)) ok = false;
                if (!true_edge && std::abs(w) > 0.05) ok = false;
            }
        }
        if (ok) ++recovered;
    }
    CHECK(recovered >= 18);
}

TEST_CASE("estimate_network is scale invariant") {
    Rng rng(3);
    Matrix X(300, 4);
    for (std::size_t i = 0; i < 300; ++i) {
        X.at(i, 0) = rng.normal();
        X.at(i, 1) = 0.5 * X.at(i, 0) + rng.normal();
        X.at(i, 2) = rng.normal();
        X.at(i, 3) = 0.4 * X.at(i, 2) + rng.normal();
    }
    const Network base = estimate_network(X);
    Matrix Y = X;
    const double scale[4] = {3.0, 0.2, 40.0, 1.5};
    for (std::size_t i = 0; i < 300; ++i)
        for (std::size_t j = 0; j < 4; ++j) Y.at(i, j) = Y.at(i, j) * scale[j] + 2.0;
    const Network scaled = estimate_network(Y);
    CHECK(base.lambda == scaled.lambda);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(std::abs(base.weights.at(i, j) - scaled.weights.at(i, j)) < 1e-8);
}

TEST_CASE("estimate_network enforces the sparsity agreement invariant") {
    Rng rng(7);
    Matrix X(500, 4);
    for (std::size_t i = 0; i < 500; ++i) {
        X.at(i, 0) = rng.normal();
        X.at(i, 1) = 0.7 * X.at(i, 0) + rng.normal();
        X.at(i, 2) = rng.normal();
        X.at(i, 3) = rng.normal();
    }
    const Network net = estimate_network(X);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(net.weights.at(i, i) == 0.0);
        for (std::size_t j = i + 1; j < 4; ++j) {
            CHECK(std::abs(net.weights.at(i, j)) < 1.0);
            CHECK((net.weights.at(i, j) == 0.0) == (net.precision.at(i, j) == 0.0));
        }
    }
    CHECK_THROWS_AS(estimate_network(Matrix(4, 4, 1.0)), TooFewRows);
}

TEST_CASE("strength on hand-built networks") {
    SymMatrix w(3);
    const std::vector<std::string> names = {"A", "B", "C"};
    const Network empty = network_from_weights(names, w);
    for (double s : strength(empty)) CHECK(s == 0.0);

    w.set(0, 1, 0.5);
    w.set(1, 2, 0.5);
    const Network path = network_from_weights(names, w);
    const std::vector<double> s = strength(path);
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(1.0));
    CHECK(s[2] == doctest::Approx(0.5));

    SymMatrix neg(2);
    neg.set(0, 1, -0.4);
    const Network pair = network_from_weights({"A", "B"}, neg);
    CHECK(strength(pair)[0] == doctest::Approx(0.4)); // absolute values
    CHECK(signed_strength(pair)[0] == doctest::Approx(-0.4));
}

TEST_CASE("betweenness on hand-built networks") {
    const std::vector<std::string> names = {"A", "B", "C"};
    SymMatrix w(3);
    w.set(0, 1, 0.5);
    w.set(1, 2, 0.5);
    const std::vector<double> path = betweenness(network_from_weights(names, w));
    CHECK(path[0] == doctest::Approx(0.0));
    CHECK(path[1] == doctest::Approx(1.0));
    CHECK(path[2] == doctest::Approx(0.0));

    SymMatrix tri(3);
    tri.set(0, 1, 0.5);
    tri.set(1, 2, 0.5);
    tri.set(0, 2, 0.5);
    for (double b : betweenness(network_from_weights(names, tri)))
        CHECK(b == doctest::Approx(0.0));

    SymMatrix cyc(4);
    cyc.set(0, 1, 0.3);
    cyc.set(1, 2, 0.3);
    cyc.set(2, 3, 0.3);
    cyc.set(0, 3, 0.3);
    for (double b : betweenness(network_from_weights({"A", "B", "C", "D"}, cyc)))
        CHECK(b == doctest::Approx(0.5));
}

TEST_CASE("centralities are permutation equivariant (property)") {
    Rng rng(64);
    const std::size_t d = 6;
    SymMatrix w(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (rng.uniform01() < 0.5) w.set(i, j, rng.normal() * 0.3);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < d; ++i) names.push_back("n" + std::to_string(i));
    const Network net = network_from_weights(names, w);
    const std::vector<double> s = strength(net);
    const std::vector<double> b = betweenness(net);

    const std::size_t perm[6] = {3, 0, 5, 1, 4, 2};
    SymMatrix pw(d);
    std::vector<std::string> pnames(d);
    for (std::size_t i = 0; i < d; ++i) {
        pnames[i] = names[perm[i]];
        for (std::size_t j = i + 1; j < d; ++j) pw.set(i, j, w.at(perm[i], perm[j]));
    }
    const Network pnet = network_from_weights(pnames, pw);
    const std::vector<double> ps = strength(pnet);
    const std::vector<double> pb = betweenness(pnet);
    for (std::size_t i = 0; i < d; ++i) {
        CHECK(ps[i] == doctest::Approx(s[perm[i]]).epsilon(1e-12));
        CHECK(pb[i] == doctest::Approx(b[perm[i]]).epsilon(1e-12));
    }
}

TEST_CASE("conditional independence shows up as small partial correlations") {
    SymMatrix theta = SymMatrix::identity(4);
    theta.set(0, 1, -0.4);
    theta.set(2, 3, -0.3);
    int ok = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix X = sample_from_precision(theta, 5000, seed + 100);
        const SymMatrix P = partial_correlations(correlation_matrix(X));
        bool small = true;
        // (0,2), (0,3), (1,2), (1,3) are conditionally independent
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 2; j < 4; ++j)
                if (std::abs(P.at(i, j)) > 0.05) small = false;
        if (small) ++ok;
    }
    CHECK(ok >= 19);
}

TEST_CASE("bootstrap basics: degenerate B, determinism, strong edge") {
    SymMatrix theta = SymMatrix::identity(3);
    theta.set(0, 1, -0.6);
    const Matrix X = sample_from_precision(theta, 2000, 42);
    const std::vector<std::string> names = {"a", "b", "c"};
    NetworkSettings settings;
    settings.grid_size = 40;

    const BootstrapReport one = bootstrap_network(X, names, 1, settings, 7);
    CHECK(one.B == 1);
    for (const EdgeInterval& e : one.edges) CHECK(e.lo == e.hi);

    const BootstrapReport a = bootstrap_network(X, names, 25, settings, 9);
    const BootstrapReport b = bootstrap_network(X, names, 25, settings, 9);
    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t i = 0; i < a.edges.size(); ++i) {
        CHECK(a.edges[i].lo == b.edges[i].lo);
        CHECK(a.edges[i].hi == b.edges[i].hi);
        CHECK(a.edges[i].lo <= a.edges[i].hi);
    }

    const BootstrapReport strong = bootstrap_network(X, names, 200, settings, 11);
    const EdgeInterval& ab = strong.edges[0]; // pair (0,1)
    CHECK(ab.a == 0);
    CHECK(ab.b == 1);
    CHECK(ab.lo > 0.0); // CI excludes zero for the 0.6 partial correlation
}

TEST_CASE("bootstrap flags clearly different edge pairs") {
    SymMatrix theta = SymMatrix::identity(3);
    theta.set(0, 1, -0.6);
    theta.set(1, 2, -0.1);
    const Matrix X = sample_from_precision(theta, 2000, 17);
    NetworkSettings settings;
    settings.grid_size = 40;
    const BootstrapReport rep = bootstrap_network(X, {"a", "b", "c"}, 150, settings, 3);
    // edge (0,1) vs edge (0,2): |0.6| vs ~0 must be significantly different
    std::size_t e01 = 0, e02 = 0;
    for (std::size_t e = 0; e < rep.edges.size(); ++e) {
        if (rep.edges[e].a == 0 && rep.edges[e].b == 1) e01 = e;
        if (rep.edges[e].a == 0 && rep.edges[e].b == 2) e02 = e;
    }
    bool found = false;
    for (const EdgePairTest& t : rep.pair_tests) {
        if ((t.edge1 == e01 && t.edge2 == e02) || (t.edge1 == e02 && t.edge2 == e01)) {
            CHECK(t.significant);
            found = true;
        }
    }
    CHECK(found);
}

TEST_CASE("compare_networks patterns") {
    SymMatrix wa(3), wb(3);
    wa.set(0, 1, 0.5);
    wa.set(1, 2, -0.2);
    wb.set(0, 1, 0.3);
    const std::vector<std::string> names = {"A", "B", "C"};
    const Network na = network_from_weights(names, wa);
    const Network nb = network_from_weights(names, wb);

    const auto same = compare_networks(na, na);
    for (const EdgeComparison& e : same) {
        CHECK(e.difference == 0.0);
        CHECK((e.presence == EdgePresence::Both || e.presence == EdgePresence::Neither));
    }

    const auto diff = compare_networks(na, nb);
    for (const EdgeComparison& e : diff) {
        if (e.a == 0 && e.b == 1) {
            CHECK(e.presence == EdgePresence::Both);
            CHECK(e.difference == doctest::Approx(0.2));
        }
        if (e.a == 1 && e.b == 2) CHECK(e.presence == EdgePresence::OnlyA);
        if (e.a == 0 && e.b == 2) CHECK(e.presence == EdgePresence::Neither);
    }

    const Network other = network_from_weights({"A", "B", "X"}, wa);
    CHECK_THROWS_AS(compare_networks(na, other), NodeMismatch);
}

TEST_SUITE_END();
