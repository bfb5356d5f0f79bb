#include "lpanet/ggm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>

#include "lpanet/csv.hpp"
#include "lpanet/errors.hpp"
#include "lpanet/parallel.hpp"
#include "lpanet/rng.hpp"

namespace lpanet {

namespace {
constexpr double kEdgeSnapTol = 1e-10; // |partial correlation| below this is exactly 0
}

std::size_t Network::edge_count() const {
    std::size_t count = 0;
    for (std::size_t i = 0; i < weights.dim; ++i)
        for (std::size_t j = i + 1; j < weights.dim; ++j)
            if (weights.at(i, j) != 0.0) ++count;
    return count;
}

SymMatrix partial_correlations(const SymMatrix& S) {
    const SymMatrix theta = invert_spd(S);
    const std::size_t d = S.dim;
    SymMatrix P(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            P.set(i, j, -theta.at(i, j) / std::sqrt(theta.at(i, i) * theta.at(j, j)));
    return P;
}

GlassoResult glasso_fit(const SymMatrix& S, double lambda, double tol, std::size_t max_iter) {
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    const std::size_t d = S.dim;
    GlassoResult out;
    if (d == 1) {
        out.theta = SymMatrix(1);
        out.theta.set(0, 0, 1.0 / S.at(0, 0));
        out.converged = true;
        return out;
    }

    // W tracks the working covariance estimate; the penalty applies to
    // off-diagonal entries only, so the diagonal stays at S's diagonal.
    SymMatrix W = S;
    Matrix beta(d, d, 0.0); // column j holds the lasso coefficients for node j

    std::vector<std::size_t> rest(d - 1);
    std::vector<double> s12(d - 1), w_new(d - 1);
    bool converged = false;
    std::size_t sweep = 0;
    for (sweep = 1; sweep <= max_iter; ++sweep) {
        double max_change = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < d; ++i)
                if (i != j) rest[idx++] = i;
            for (std::size_t a = 0; a < d - 1; ++a) s12[a] = S.at(rest[a], j);

            // coordinate-wise soft thresholding on the lasso subproblem
            //   min 0.5 b' W11 b - b' s12 + lambda |b|_1
            for (std::size_t inner = 0; inner < 400; ++inner) {
                double inner_change = 0.0;
                for (std::size_t a = 0; a < d - 1; ++a) {
                    double resid = s12[a];
                    for (std::size_t b = 0; b < d - 1; ++b) {
                        if (b == a) continue;
                        resid -= W.at(rest[a], rest[b]) * beta.at(rest[b], j);
                    }
                    const double denom = W.at(rest[a], rest[a]);
                    double value = 0.0;
                    if (resid > lambda)
                        value = (resid - lambda) / denom;
                    else if (resid < -lambda)
                        value = (resid + lambda) / denom;
                    const double old = beta.at(rest[a], j);
                    if (value != old) {
                        inner_change = std::max(inner_change, std::abs(value - old));
                        beta.at(rest[a], j) = value;
                    }
                }
                if (inner_change < 0.1 * tol) break;
            }

            for (std::size_t a = 0; a < d - 1; ++a) {
                double w = 0.0;
                for (std::size_t b = 0; b < d - 1; ++b)
                    w += W.at(rest[a], rest[b]) * beta.at(rest[b], j);
                w_new[a] = w;
            }
            for (std::size_t a = 0; a < d - 1; ++a) {
                max_change = std::max(max_change, std::abs(W.at(rest[a], j) - w_new[a]));
                W.set(rest[a], j, w_new[a]);
            }
        }
        if (max_change < tol) {
            converged = true;
            break;
        }
    }

    // recover the precision matrix column by column, then average the two
    // per-column solutions for each off-diagonal pair
    Matrix raw(d, d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        double quad = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            if (i != j) quad += W.at(i, j) * beta.at(i, j);
        raw.at(j, j) = 1.0 / (W.at(j, j) - quad);
        for (std::size_t i = 0; i < d; ++i)
            if (i != j) raw.at(i, j) = -beta.at(i, j) * raw.at(j, j);
    }
    SymMatrix theta(d);
    for (std::size_t j = 0; j < d; ++j) theta.set(j, j, raw.at(j, j));
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            theta.set(i, j, 0.5 * (raw.at(i, j) + raw.at(j, i)));

    out.theta = std::move(theta);
    out.converged = converged;
    out.n_iter = std::min(sweep, max_iter);
    return out;
}

double ebic_score(const SymMatrix& theta, const SymMatrix& S, std::size_t n, double gamma) {
    const std::size_t d = theta.dim;
    const SpdFactorization fac = spd_factorize(theta);
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) trace += S.at(i, j) * theta.at(i, j);
    const double loglik = 0.5 * static_cast<double>(n) * (fac.log_det - trace);
    std::size_t edges = 0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (theta.at(i, j) != 0.0) ++edges;
    const double E = static_cast<double>(edges);
    return -2.0 * loglik + E * std::log(static_cast<double>(n)) +
           4.0 * gamma * E * std::log(static_cast<double>(d));
}

namespace {

void snap_small_edges(SymMatrix& weights, SymMatrix& theta) {
    for (std::size_t i = 0; i < weights.dim; ++i) {
        for (std::size_t j = i + 1; j < weights.dim; ++j) {
            if (std::abs(weights.at(i, j)) < kEdgeSnapTol) {
                weights.set(i, j, 0.0);
                theta.set(i, j, 0.0);
            }
        }
    }
}

} // namespace

Network estimate_network(const Matrix& X, const std::vector<std::string>& node_names,
                         const NetworkSettings& settings) {
    const std::size_t n = X.rows, d = X.cols;
    if (node_names.size() != d) throw LengthMismatch("node names do not match column count");
    if (n < d + 10)
        throw TooFewRows("network estimation needs n >= d + 10, got n = " + std::to_string(n));
    if (settings.grid_size < 1) throw ConfigError("grid_size must be >= 1");

    const SymMatrix S = correlation_matrix(X);

    double lambda_max = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            lambda_max = std::max(lambda_max, std::abs(S.at(i, j)));

    Network net;
    net.node_names = node_names;
    net.n = n;

    std::vector<double> grid;
    if (lambda_max < 1e-12) {
        grid.push_back(0.0);
    } else {
        const double lo = std::log(0.01 * lambda_max), hi = std::log(lambda_max);
        grid.resize(settings.grid_size);
        if (settings.grid_size == 1) {
            grid[0] = lambda_max;
        } else {
            for (std::size_t i = 0; i < settings.grid_size; ++i) {
                const double t = static_cast<double>(i) /
                                 static_cast<double>(settings.grid_size - 1);
                grid[i] = std::exp(hi + (lo - hi) * t); // descending: sparse to dense
            }
        }
    }

    double best_ebic = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    SymMatrix best_theta;
    bool best_converged = true;

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const GlassoResult res = glasso_fit(S, grid[i], settings.glasso_tol,
                                            settings.glasso_max_iter);
        SymMatrix theta = res.theta;
        SymMatrix weights(d);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b)
                weights.set(a, b, -theta.at(a, b) / std::sqrt(theta.at(a, a) * theta.at(b, b)));
        snap_small_edges(weights, theta);

        std::size_t edges = 0;
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = a + 1; b < d; ++b)
                if (theta.at(a, b) != 0.0) ++edges;

        const double score = ebic_score(theta, S, n, settings.gamma);
        net.lambda_grid.push_back(grid[i]);
        net.path_edge_counts.push_back(edges);
        net.path_ebic.push_back(score);
        if (score < best_ebic) {
            best_ebic = score;
            best_idx = i;
            best_theta = std::move(theta);
            best_converged = res.converged;
        }
    }

    net.lambda = grid[best_idx];
    net.precision = best_theta;
    net.glasso_converged = best_converged;
    net.weights = SymMatrix(d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a + 1; b < d; ++b)
            net.weights.set(a, b, -best_theta.at(a, b) /
                                      std::sqrt(best_theta.at(a, a) * best_theta.at(b, b)));
    snap_small_edges(net.weights, net.precision);
    return net;
}

Network estimate_network(const Matrix& X, const NetworkSettings& settings) {
    std::vector<std::string> names;
    names.reserve(X.cols);
    for (std::size_t j = 0; j < X.cols; ++j) names.push_back("v" + std::to_string(j + 1));
    return estimate_network(X, names, settings);
}

std::vector<double> strength(const Network& net) {
    const std::size_t d = net.n_nodes();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        KahanSum s;
        for (std::size_t j = 0; j < d; ++j)
            if (j != i) s.add(std::abs(net.weights.at(i, j)));
        out[i] = s.value();
    }
    return out;
}

std::vector<double> signed_strength(const Network& net) {
    const std::size_t d = net.n_nodes();
    std::vector<double> out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
        KahanSum s;
        for (std::size_t j = 0; j < d; ++j)
            if (j != i) s.add(net.weights.at(i, j));
        out[i] = s.value();
    }
    return out;
}

std::vector<double> betweenness(const Network& net) {
    const std::size_t d = net.n_nodes();
    std::vector<double> score(d, 0.0);

    // adjacency with distances 1/|w|; zero edges are absent
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (net.weights.at(i, j) != 0.0) {
                const double dist = 1.0 / std::abs(net.weights.at(i, j));
                adj[i].emplace_back(j, dist);
                adj[j].emplace_back(i, dist);
            }

    // Brandes accumulation with Dijkstra
    for (std::size_t s = 0; s < d; ++s) {
        std::vector<double> dist(d, std::numeric_limits<double>::infinity());
        std::vector<double> sigma(d, 0.0);
        std::vector<std::vector<std::size_t>> preds(d);
        std::vector<std::size_t> order;
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
        std::vector<bool> done(d, false);

        dist[s] = 0.0;
        sigma[s] = 1.0;
        queue.emplace(0.0, s);
        while (!queue.empty()) {
            const auto [du, u] = queue.top();
            queue.pop();
            if (done[u]) continue;
            done[u] = true;
            order.push_back(u);
            for (const auto& [v, w] : adj[u]) {
                const double cand = dist[u] + w;
                const double tol = 1e-12 * (1.0 + std::abs(cand));
                if (cand < dist[v] - tol) {
                    dist[v] = cand;
                    sigma[v] = sigma[u];
                    preds[v].assign(1, u);
                    queue.emplace(cand, v);
                } else if (std::abs(cand - dist[v]) <= tol && !done[v]) {
                    sigma[v] += sigma[u];
                    preds[v].push_back(u);
                }
            }
        }
        std::vector<double> delta(d, 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::size_t w = *it;
            for (std::size_t u : preds[w])
                delta[u] += sigma[u] / sigma[w] * (1.0 + delta[w]);
            if (w != s) score[w] += delta[w];
        }
    }
    // undirected graph: every pair was counted from both endpoints
    for (double& v : score) v /= 2.0;
    return score;
}

BootstrapReport bootstrap_network(const Matrix& X, const std::vector<std::string>& node_names,
                                  std::size_t B, const NetworkSettings& settings,
                                  std::uint64_t seed, unsigned threads) {
    if (B < 1) throw ConfigError("bootstrap needs B >= 1");
    const std::size_t n = X.rows, d = X.cols;

    const Network point = estimate_network(X, node_names, settings);

    struct Replicate {
        bool ok = false;
        SymMatrix weights;
    };
    std::vector<Replicate> reps(B);
    const Rng master(seed);
    parallel_for(B, threads, [&](std::size_t b) {
        Rng rng = master.child(b);
        Matrix Xb(n, d);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src =
                static_cast<std::size_t>(rng.uniform01() * static_cast<double>(n)) % n;
            for (std::size_t j = 0; j < d; ++j) Xb.at(i, j) = X.at(src, j);
        }
        try {
            Network net = estimate_network(Xb, node_names, settings);
            reps[b].weights = std::move(net.weights);
            reps[b].ok = true;
        } catch (const Error&) {
            reps[b].ok = false; // degenerate resample; recorded below
        }
    });

    BootstrapReport report;
    report.B = B;
    report.node_names = node_names;
    for (const Replicate& r : reps)
        if (!r.ok) ++report.n_failed;
    const std::size_t good = B - report.n_failed;
    if (good == 0) throw AllStartsFailed("every bootstrap replicate failed");

    // percentile bounds (linear interpolation between order statistics)
    auto percentile = [](std::vector<double>& sorted, double q) {
        const std::size_t m = sorted.size();
        if (m == 1) return sorted[0];
        const double h = q * static_cast<double>(m - 1);
        const std::size_t lo = static_cast<std::size_t>(h);
        const std::size_t hi = std::min(lo + 1, m - 1);
        const double frac = h - static_cast<double>(lo);
        return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
    };

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) pairs.emplace_back(i, j);

    std::vector<std::vector<double>> samples(pairs.size());
    for (std::size_t e = 0; e < pairs.size(); ++e) {
        samples[e].reserve(good);
        for (const Replicate& r : reps)
            if (r.ok) samples[e].push_back(r.weights.at(pairs[e].first, pairs[e].second));
    }

    for (std::size_t e = 0; e < pairs.size(); ++e) {
        EdgeInterval ei;
        ei.a = pairs[e].first;
        ei.b = pairs[e].second;
        ei.estimate = point.weights.at(ei.a, ei.b);
        std::vector<double> sorted = samples[e];
        std::sort(sorted.begin(), sorted.end());
        ei.lo = percentile(sorted, 0.025);
        ei.hi = percentile(sorted, 0.975);
        report.edges.push_back(ei);
    }

    for (std::size_t e1 = 0; e1 < pairs.size(); ++e1) {
        for (std::size_t e2 = e1 + 1; e2 < pairs.size(); ++e2) {
            std::vector<double> diff(samples[e1].size());
            for (std::size_t b = 0; b < diff.size(); ++b) diff[b] = samples[e1][b] - samples[e2][b];
            std::sort(diff.begin(), diff.end());
            EdgePairTest test;
            test.edge1 = e1;
            test.edge2 = e2;
            const double lo = percentile(diff, 0.025);
            const double hi = percentile(diff, 0.975);
            test.significant = (lo > 0.0) || (hi < 0.0);
            report.pair_tests.push_back(test);
        }
    }
    return report;
}

std::vector<EdgeComparison> compare_networks(const Network& a, const Network& b) {
    if (a.node_names != b.node_names)
        throw NodeMismatch("networks are defined over different node sets");
    std::vector<EdgeComparison> out;
    const std::size_t d = a.n_nodes();
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = i + 1; j < d; ++j) {
            EdgeComparison ec;
            ec.a = i;
            ec.b = j;
            ec.weight_a = a.weights.at(i, j);
            ec.weight_b = b.weights.at(i, j);
            ec.difference = ec.weight_a - ec.weight_b;
            const bool in_a = ec.weight_a != 0.0, in_b = ec.weight_b != 0.0;
            ec.presence = in_a ? (in_b ? EdgePresence::Both : EdgePresence::OnlyA)
                               : (in_b ? EdgePresence::OnlyB : EdgePresence::Neither);
            out.push_back(ec);
        }
    }
    return out;
}

void write_network_csv(const Network& net, std::ostream& out) {
    out << "node_a,node_b,weight\n";
    const std::size_t d = net.n_nodes();
    std::vector<std::pair<std::pair<std::string, std::string>, double>> edges;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
            if (net.weights.at(i, j) != 0.0) {
                auto key = std::minmax(net.node_names[i], net.node_names[j]);
                edges.push_back({{key.first, key.second}, net.weights.at(i, j)});
            }
    std::sort(edges.begin(), edges.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (const auto& [key, w] : edges)
        out << csv_quote(key.first) << ',' << csv_quote(key.second) << ',' << format_double(w)
            << '\n';
}

} // namespace lpanet
