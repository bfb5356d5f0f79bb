#ifndef LPANET_GGM_HPP
#define LPANET_GGM_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lpanet/numerics.hpp"

namespace lpanet {

/// Gaussian graphical model: partial-correlation weights plus the precision
/// matrix and penalty that produced them. weights[i][j] is exactly zero
/// whenever precision[i][j] is (entries under 1e-10 are snapped).
struct Network {
    std::vector<std::string> node_names;
    SymMatrix weights;   // partial correlations, zero diagonal
    SymMatrix precision; // penalized precision estimate
    double lambda = 0.0;
    std::size_t n = 0;
    // regularization-path diagnostics from estimate_network
    std::vector<double> lambda_grid;
    std::vector<std::size_t> path_edge_counts;
    std::vector<double> path_ebic;
    bool glasso_converged = true;

    std::size_t n_nodes() const { return node_names.size(); }
    std::size_t edge_count() const;
};

/// Partial correlations from a correlation matrix: with T = S^-1,
/// P[i][j] = -T[i][j] / sqrt(T[i][i] T[j][j]), zero diagonal.
SymMatrix partial_correlations(const SymMatrix& S);

struct GlassoResult {
    SymMatrix theta;
    bool converged = false;
    std::size_t n_iter = 0;
};

/// Graphical lasso, Friedman-style block coordinate descent with the L1
/// penalty on off-diagonal entries only (so lambda = 0 reproduces S^-1).
GlassoResult glasso_fit(const SymMatrix& S, double lambda, double tol = 1e-7,
                        std::size_t max_iter = 200);

/// Extended BIC of a precision estimate: -2 L + E log n + 4 gamma E log d,
/// with L the unpenalized Gaussian log-likelihood term and E the edge count.
double ebic_score(const SymMatrix& theta, const SymMatrix& S, std::size_t n, double gamma);

struct NetworkSettings {
    double gamma = 0.5;
    std::size_t grid_size = 100;
    double glasso_tol = 1e-7;
    std::size_t glasso_max_iter = 400;
};

/// EBIC-glasso network: correlation input, log-spaced lambda grid from
/// lambda_max down to 0.01 lambda_max, minimum-EBIC winner.
Network estimate_network(const Matrix& X, const std::vector<std::string>& node_names,
                         const NetworkSettings& settings = {});
Network estimate_network(const Matrix& X, const NetworkSettings& settings = {});

/// Node strength: sum of absolute incident edge weights. The signed variant
/// is exposed separately.
std::vector<double> strength(const Network& net);
std::vector<double> signed_strength(const Network& net);

/// Brandes betweenness on distances 1/|w|, endpoints excluded, fractional
/// credit across equal-length geodesics.
std::vector<double> betweenness(const Network& net);

struct EdgeInterval {
    std::size_t a = 0;
    std::size_t b = 0; // node indices, a < b
    double estimate = 0.0; // from the original sample
    double lo = 0.0; // 2.5% bootstrap percentile
    double hi = 0.0; // 97.5% bootstrap percentile
};

struct EdgePairTest {
    std::size_t edge1 = 0; // indices into the edge interval list
    std::size_t edge2 = 0;
    bool significant = false; // percentile CI of the difference excludes zero
};

struct BootstrapReport {
    std::size_t B = 0;
    std::size_t n_failed = 0; // replicates that failed and were excluded
    std::vector<std::string> node_names;
    std::vector<EdgeInterval> edges; // every node pair, lexicographic
    std::vector<EdgePairTest> pair_tests;
};

/// Case-resampling bootstrap: B row resamples, the full EBIC-glasso pipeline
/// re-run on each (lambda re-selected per replicate). Deterministic given the
/// seed; replicates run independently so threads do not change the result.
BootstrapReport bootstrap_network(const Matrix& X, const std::vector<std::string>& node_names,
                                  std::size_t B, const NetworkSettings& settings,
                                  std::uint64_t seed, unsigned threads = 1);

enum class EdgePresence { Both, OnlyA, OnlyB, Neither };

struct EdgeComparison {
    std::size_t a = 0;
    std::size_t b = 0;
    double weight_a = 0.0;
    double weight_b = 0.0;
    double difference = 0.0;
    EdgePresence presence = EdgePresence::Neither;
};

/// Edge-by-edge difference table of two networks over identical node sets.
std::vector<EdgeComparison> compare_networks(const Network& a, const Network& b);

/// Edge list (node_a, node_b, weight), lexicographic by node pair.
void write_network_csv(const Network& net, std::ostream& out);

} // namespace lpanet

#endif
