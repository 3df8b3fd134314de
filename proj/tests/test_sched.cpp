#include <gtest/gtest.h>

#include <cmath>

#include "fluidrank/engine.hpp"
#include "fluidrank/sched.hpp"
#include "support.hpp"

using namespace fluidrank;
using fluidrank::testutil::random_graph;

namespace {

node_t brute_argmax(const std::vector<double>& scores) {
    node_t best = 0;
    for (node_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) best = i;
    }
    return best;
}

}  // namespace

TEST(Max, PicksLargestLowestIndexOnTies) {
    SparseGraph g = SparseGraph::from_edges(3, {{0, 1}, {1, 2}, {2, 0}});
    Scheduler a(SchedulerKind::Max, g);
    std::vector<double> f{0.2, 0.5, 0.3};
    EXPECT_EQ(a.next(f), 1u);

    SparseGraph two = SparseGraph::from_edges(2, {{0, 1}, {1, 0}});
    Scheduler b(SchedulerKind::Max, two);
    std::vector<double> tie{0.4, 0.4};
    EXPECT_EQ(b.next(tie), 0u);
    EXPECT_EQ(b.score_table(f), f);
}

TEST(Op, DegreeNormalizedScore) {
    // out = (3, 0, 0, 0), in = (0, 1, 1, 1)
    SparseGraph g = SparseGraph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    std::vector<double> f{0.4, 0.4, 0.0, 0.0};
    Scheduler op(SchedulerKind::Op, g);
    auto s = op.score_table(f);
    EXPECT_DOUBLE_EQ(s[0], 0.4 / 4.0);
    EXPECT_DOUBLE_EQ(s[1], 0.4 / 2.0);
    EXPECT_EQ(op.next(f), 1u);
}

TEST(Op2, ScoreTable) {
    SparseGraph g = SparseGraph::from_edges(3, {{0, 1}, {1, 0}, {1, 2}});
    Scheduler op2(SchedulerKind::Op2, g);
    std::vector<double> f{0.6, 0.6, 0.0};
    auto s = op2.score_table(f);
    EXPECT_DOUBLE_EQ(s[0], 0.3);
    EXPECT_DOUBLE_EQ(s[1], 0.2);
    EXPECT_EQ(op2.next(f), 0u);
}

TEST(Op, ScoresUnaffectedByAddingEmptyNode) {
    SparseGraph g = random_graph(20, 0.2, 4, 3);
    std::vector<Edge> edges = g.edges();
    SparseGraph bigger = SparseGraph::from_edges(21, edges);
    std::vector<double> f(20);
    for (std::size_t i = 0; i < 20; ++i) f[i] = 0.01 * static_cast<double>(i % 7);
    std::vector<double> f2 = f;
    f2.push_back(0.0);
    auto a = Scheduler(SchedulerKind::Op, g).score_table(f);
    auto b = Scheduler(SchedulerKind::Op, bigger).score_table(f2);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_EQ(b[20], 0.0);
}

TEST(Per, CyclesThroughNodes) {
    SparseGraph g = random_graph(5, 0.0, 2, 1);
    Scheduler per(SchedulerKind::Per, g);
    std::vector<double> f(5, 1.0);
    for (int k = 0; k < 12; ++k) EXPECT_EQ(per.next(f), static_cast<node_t>(k % 5));
    EXPECT_EQ(per.score_table(f), std::vector<double>(5, 1.0));
}

TEST(Rand, SeededAndReproducible) {
    SparseGraph g = random_graph(50, 0.0, 3, 1);
    std::vector<double> f(50, 1.0);
    Scheduler a(SchedulerKind::Rand, g, {7}), b(SchedulerKind::Rand, g, {7}), c(SchedulerKind::Rand, g, {8});
    std::vector<node_t> sa, sb, sc;
    std::vector<int> hits(50, 0);
    for (int k = 0; k < 5000; ++k) {
        sa.push_back(a.next(f));
        sb.push_back(b.next(f));
        sc.push_back(c.next(f));
        ++hits[sa.back()];
    }
    EXPECT_EQ(sa, sb);
    EXPECT_NE(sa, sc);
    for (int h : hits) EXPECT_GT(h, 0);
}

TEST(Heap, AgreesWithBruteForceArgmax) {
    for (SchedulerKind kind : {SchedulerKind::Max, SchedulerKind::Op, SchedulerKind::Op2}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            SparseGraph g = random_graph(40, 0.25, 6, seed);
            auto p = DiffusionParams::uniform(40, 0.85, 1e-9);
            DiffusionState s = init(g, p);
            Scheduler sched(kind, g);
            for (int k = 0; k < 2000 && error_bound(s, p) > p.target_error; ++k) {
                const node_t i = sched.next(s.f);
                ASSERT_EQ(i, brute_argmax(sched.score_table(s.f))) << to_string(kind) << " step " << k;
                diffuse(s, i, g, p);
                sched.observe(i, s.f);
            }
        }
    }
}

TEST(Heap, SignedFluidUsesMagnitude) {
    SparseGraph g = SparseGraph::from_edges(3, {{0, 1}, {1, 2}, {2, 0}});
    Scheduler sched(SchedulerKind::Max, g);
    std::vector<double> f{0.1, -0.7, 0.3};
    EXPECT_EQ(sched.next(f), 1u);
}

TEST(Sweep, ThresholdNonincreasingAndRespected) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SparseGraph g = random_graph(60, 0.2, 5, seed + 10);
        auto p = DiffusionParams::uniform(60, 0.85, 1e-9);
        DiffusionState s = init(g, p);
        Scheduler sched(SchedulerKind::Sweep, g);
        double last = std::numeric_limits<double>::infinity();
        while (error_bound(s, p) > p.target_error) {
            const node_t i = sched.next(s.f);
            const double theta = sched.threshold();
            EXPECT_LE(theta, last);
            EXPECT_GE(s.f[i], theta);
            EXPECT_GT(s.f[i], 0.0);
            last = theta;
            diffuse(s, i, g, p);
        }
    }
    SparseGraph g = random_graph(5, 0.0, 2, 1);
    EXPECT_THROW(Scheduler(SchedulerKind::Sweep, g, {42, 1.0}), std::invalid_argument);
}

TEST(Sweep, DecaysByConfiguredFactor) {
    SparseGraph g = SparseGraph::from_edges(3, {{0, 1}, {1, 2}, {2, 0}});
    Scheduler sched(SchedulerKind::Sweep, g, {42, 0.5});
    std::vector<double> f{1.0, 0.3, 0.0};
    EXPECT_EQ(sched.next(f), 0u);
    EXPECT_EQ(sched.threshold(), 1.0);
    f[0] = 0.0;
    // 1.0 -> 0.5 -> 0.25: the first threshold at or below the largest fluid
    EXPECT_EQ(sched.next(f), 1u);
    EXPECT_EQ(sched.threshold(), 0.25);
}

TEST(Names, RoundTrip) {
    for (SchedulerKind k : kAllSchedulers) EXPECT_EQ(parse_scheduler(to_string(k)), k);
    EXPECT_FALSE(parse_scheduler("argmax").has_value());
}

TEST(Determinism, SequencesRepeat) {
    SparseGraph g = random_graph(30, 0.2, 4, 5);
    auto p = DiffusionParams::uniform(30, 0.85, 1e-7);
    for (SchedulerKind k : kAllSchedulers) {
        std::vector<node_t> seq[2];
        for (auto& out : seq) {
            Scheduler sched(k, g, {3});
            RunOptions opts;
            opts.on_diffuse = [&](node_t i, double) { out.push_back(i); };
            run(g, p, sched, opts);
        }
        EXPECT_EQ(seq[0], seq[1]) << to_string(k);
    }
}
