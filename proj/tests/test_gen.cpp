#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fluidrank/gen.hpp"

using namespace fluidrank;

namespace {

/// Average ranks (ties share the mean rank).
std::vector<double> ranks_of(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t k = 0; k < idx.size();) {
        std::size_t e = k;
        while (e + 1 < idx.size() && x[idx[e + 1]] == x[idx[k]]) ++e;
        const double mean = 0.5 * static_cast<double>(k + e);
        for (std::size_t t = k; t <= e; ++t) r[idx[t]] = mean;
        k = e + 1;
    }
    return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    auto ra = ranks_of(a), rb = ranks_of(b);
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Spearman correlation between node index and out-degree.
double index_bias(const SparseGraph& g) {
    std::vector<double> idx(g.size()), deg(g.size());
    for (node_t i = 0; i < g.size(); ++i) {
        idx[i] = i;
        deg[i] = static_cast<double>(g.out_degree(i) + g.in_degree(i));
    }
    return spearman(idx, deg);
}

}  // namespace

TEST(Generate, SeedDeterminism) {
    GenConfig c = GenConfig::parse("n=500,l=1500,alpha=1.5,seed=3");
    Generated a = generate(c), b = generate(c);
    EXPECT_EQ(a.graph.edges(), b.graph.edges());
    c.seed = 4;
    EXPECT_NE(generate(c).graph.edges(), a.graph.edges());
}

TEST(Generate, DistinctLinksNoSelfLoops) {
    for (double alpha : {1.5, 2.0}) {
        Generated g = generate({1000, 3000, alpha, std::nullopt, 7});
        EXPECT_EQ(g.graph.num_links(), 3000u);
        EXPECT_EQ(g.report.links, 3000u);
        EXPECT_EQ(g.report.requested_links, 3000u);
        EXPECT_GE(g.report.attempts, 3000u);
        EXPECT_EQ(g.report.dangling, g.graph.dangling().size());
        for (const Edge& e : g.graph.edges()) EXPECT_NE(e.source, e.target);
        auto edges = g.graph.edges();
        EXPECT_TRUE(std::adjacent_find(edges.begin(), edges.end()) == edges.end());
    }
}

TEST(Generate, FixedDrawCount) {
    GenConfig c = GenConfig::parse("n=10000,alpha=2.0,draws=100000,seed=42");
    Generated g = generate(c);
    EXPECT_EQ(g.report.attempts, 100000u);
    EXPECT_EQ(g.report.requested_links, 0u);
    EXPECT_LT(g.report.links, 100000u);
    // a fixed draw count of 1e5 lands in the sparse alpha = 2 regime: about 2 thousand links,
    // over 90% of the nodes dangling
    EXPECT_GT(g.report.links, 1500u);
    EXPECT_LT(g.report.links, 3000u);
    EXPECT_GT(g.report.dangling, 9300u);
}

TEST(Generate, DegenerateExponentHitsCap) {
    // nearly all mass on one source and one destination: only a handful of distinct links exist
    GenConfig c{100, 50, 60.0, 0, 1};
    EXPECT_THROW(generate(c), GenerationError);
    EXPECT_THROW(generate({1, 1, 2.0}), std::invalid_argument);
    EXPECT_THROW(generate({10, 0, 2.0}), std::invalid_argument);
    EXPECT_THROW(generate({10, 5, 0.0}), std::invalid_argument);
    EXPECT_THROW(generate({3, 7, 2.0}), std::invalid_argument);
}

TEST(Generate, ScenarioShapes) {
    Generated sparse = generate({10000, 2172, 2.0, std::nullopt, 42});
    const double dn = static_cast<double>(sparse.report.dangling) / 10000.0;
    EXPECT_GT(dn, 0.85);
    EXPECT_LT(dn, 1.0);

    Generated dense = generate({10000, 265245, 1.5, std::nullopt, 42});
    EXPECT_EQ(dense.report.links, 265245u);
    EXPECT_LT(static_cast<double>(dense.report.dangling) / 10000.0, 0.03);
}

TEST(DegreeReport, Examples) {
    SparseGraph cycle = SparseGraph::from_edges(2, {{0, 1}, {1, 0}});
    auto r = degree_report(cycle);
    EXPECT_EQ(r.out, (std::map<std::size_t, std::size_t>{{1, 2}}));
    EXPECT_EQ(r.in, (std::map<std::size_t, std::size_t>{{1, 2}}));

    std::vector<Edge> spokes;
    for (node_t i = 1; i < 10; ++i) spokes.push_back({0, i});
    auto s = degree_report(SparseGraph::from_edges(10, spokes));
    EXPECT_EQ(s.out, (std::map<std::size_t, std::size_t>{{0, 9}, {9, 1}}));
    EXPECT_EQ(s.in, (std::map<std::size_t, std::size_t>{{0, 1}, {1, 9}}));
}

TEST(DegreeReport, HeavyTail) {
    Generated g = generate({10000, 8081, 2.0, std::nullopt, 5});
    std::vector<std::size_t> out;
    for (node_t i = 0; i < g.graph.size(); ++i) {
        if (g.graph.out_degree(i) > 0) out.push_back(g.graph.out_degree(i));
    }
    std::sort(out.begin(), out.end());
    EXPECT_GT(out.back(), 50 * out[out.size() / 2]);
}

TEST(Generate, PermutationsRemoveIndexBias) {
    const int seeds = 20;
    auto biases = [&](std::optional<std::size_t> perms) {
        std::vector<double> out;
        for (int s = 0; s < seeds; ++s)
            out.push_back(index_bias(generate({2000, 6000, 1.5, perms, static_cast<std::uint64_t>(s)}).graph));
        return out;
    };
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };

    const double plain = mean(biases(0));
    EXPECT_LT(plain, -0.5);

    // n transpositions leave about e^-2 of the nodes on their original rank
    const double by_default = mean(biases(std::nullopt));
    EXPECT_LT(std::abs(by_default), std::abs(plain) / 3);

    auto many = biases(20000);
    const double m = mean(many);
    double var = 0.0;
    for (double b : many) var += (b - m) * (b - m);
    const double se = std::sqrt(var / (seeds - 1) / seeds);
    EXPECT_LE(std::abs(m), 3 * se) << "mean " << m << " se " << se;
}

TEST(GenConfig, Parse) {
    GenConfig c = GenConfig::parse("n=100,l=300,alpha=1.5,perms=7,seed=9");
    EXPECT_EQ(c.n, 100u);
    EXPECT_EQ(c.l, 300u);
    EXPECT_EQ(c.alpha, 1.5);
    EXPECT_EQ(c.permutations, 7u);
    EXPECT_EQ(c.seed, 9u);
    EXPECT_FALSE(c.draws.has_value());
    EXPECT_EQ(GenConfig::parse("draws=5").draws, 5u);
    EXPECT_THROW(GenConfig::parse("n=abc"), std::invalid_argument);
    EXPECT_THROW(GenConfig::parse("n=10,beta=2"), std::invalid_argument);
    EXPECT_THROW(GenConfig::parse("alpha=2x"), std::invalid_argument);
    EXPECT_THROW(GenConfig::parse("n"), std::invalid_argument);
}
