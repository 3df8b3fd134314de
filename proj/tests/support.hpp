#pragma once

// Test-only helpers: random graphs and dense linear-algebra oracles (Eigen).

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "fluidrank/graph.hpp"

namespace fluidrank::testutil {

/// Random graph on n nodes. Roughly `dangling_fraction` of the nodes get no out-links;
/// the others get between 1 and max_out distinct children.
inline SparseGraph random_graph(std::size_t n, double dangling_fraction, std::size_t max_out, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution dangle(dangling_fraction);
    std::uniform_int_distribution<std::size_t> deg(1, std::max<std::size_t>(1, std::min(max_out, n - 1)));
    std::uniform_int_distribution<node_t> pick(0, static_cast<node_t>(n - 1));
    std::vector<Edge> edges;
    for (node_t j = 0; j < n; ++j) {
        if (n < 2 || dangle(rng)) continue;
        const std::size_t k = deg(rng);
        std::size_t placed = 0;
        while (placed < k) {
            node_t i = pick(rng);
            if (i == j) continue;
            edges.push_back({j, i});
            ++placed;
        }
    }
    return SparseGraph::from_edges(n, std::move(edges));
}

/// Graph where every node has at least one out-link.
inline SparseGraph random_closed_graph(std::size_t n, std::size_t max_out, std::uint64_t seed) {
    return random_graph(n, 0.0, max_out, seed);
}

/// Dense P (column j = column of the stored, uncompleted matrix).
inline Eigen::MatrixXd dense_p(const SparseGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (node_t j = 0; j < g.size(); ++j) {
        for (auto [i, w] : g.column(j)) p(i, j) = w;
    }
    return p;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> from_eigen(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// Solves X = d P X + (1 - d) V with the uncompleted P: the limit of the history vector.
inline std::vector<double> dense_history_limit(const SparseGraph& g, double d, const std::vector<double>& v) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - d * dense_p(g);
    return from_eigen(a.fullPivLu().solve((1.0 - d) * to_eigen(v)));
}

/// PageRank of the matrix completed by V at dangling columns, normalized to sum 1.
inline std::vector<double> dense_pagerank(const SparseGraph& g, double d, const std::vector<double>& v) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd p = dense_p(g);
    const Eigen::VectorXd ve = to_eigen(v);
    for (node_t j = 0; j < g.size(); ++j) {
        if (g.is_dangling(j)) p.col(j) = ve;
    }
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - d * p;
    Eigen::VectorXd x = a.fullPivLu().solve((1.0 - d) * ve);
    x /= x.sum();
    return from_eigen(x);
}

inline std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

}  // namespace fluidrank::testutil
