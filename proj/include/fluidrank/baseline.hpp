#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidrank/engine.hpp"
#include "fluidrank/graph.hpp"
#include "fluidrank/sched.hpp"
#include "fluidrank/trace.hpp"

namespace fluidrank {

// ---------------------------------------------------------------------------
// Power iteration (MAT-ITER)
// ---------------------------------------------------------------------------

struct PowerIterState {
    std::vector<double> x;
    std::uint64_t iterations = 0;
    std::uint64_t elementary_steps = 0;
};

struct PowerIterOptions {
    std::uint64_t max_iterations = 1'000'000;
    std::span<const double> reference;
};

struct PowerIterResult {
    std::vector<double> rank;
    PowerIterState state;
    ConvergenceTrace trace;
    bool converged = false;
};

/// One product X <- d P X + (1 - d) V, with the mass lost at dangling columns put back along V.
/// Returns |X_new - X_old|_1. Each product costs L elementary steps.
inline double power_step(PowerIterState& s, const SparseGraph& graph, const DiffusionParams& params) {
    const std::size_t n = graph.size();
    const double d = params.damping;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = (1.0 - d) * params.personalization[i];
    for (node_t j = 0; j < n; ++j) {
        auto kids = graph.children(j);
        if (kids.empty()) continue;
        const double share = d * s.x[j] / static_cast<double>(kids.size());
        for (node_t i : kids) y[i] += share;
    }
    double total = 0.0;
    for (double v : y) total += v;
    const double missing = 1.0 - total;
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += missing * params.personalization[i];
        diff += std::abs(y[i] - s.x[i]);
    }
    s.x = std::move(y);
    ++s.iterations;
    s.elementary_steps += graph.num_links();
    return diff;
}

/// Iterates from X_0 = V until |X_n - X_{n-1}|_1 d / (1 - d) <= target_error.
inline PowerIterResult power_iterate(const SparseGraph& graph, const DiffusionParams& params, double target_error,
                                     const PowerIterOptions& options = {}) {
    params.validate(graph.size());
    if (!(target_error > 0.0)) throw std::invalid_argument("target error must be positive");
    const double d = params.damping;
    PowerIterResult out;
    out.state.x = params.personalization;
    auto sample = [&](double diff) {
        TraceRow row{out.state.elementary_steps, out.state.iterations, diff, diff * d / (1.0 - d), std::nullopt};
        if (!options.reference.empty()) row.true_error = l1_distance(out.state.x, options.reference);
        out.trace.append(row);
    };
    sample(1.0);
    while (out.state.iterations < options.max_iterations) {
        const double diff = power_step(out.state, graph, params);
        sample(diff);
        if (diff * d / (1.0 - d) <= target_error) {
            out.converged = true;
            break;
        }
    }
    out.rank = out.state.x;
    return out;
}

// ---------------------------------------------------------------------------
// OPIC
// ---------------------------------------------------------------------------

/// Cash/credit state of on-line page importance computation.
///
/// With damping 1 a visited node hands all of its cash to its children. With damping d < 1
/// the share (1 - d) is teleported along V, as is the whole cash of a dangling node.
/// Teleported cash is kept in a lazy pool: node i holds stored[i] + (pool - seen[i]) V[i],
/// so a step stays O(out_degree). Total cash is constant.
struct OpicState {
    std::vector<double> stored;
    std::vector<double> seen;
    std::vector<double> credit;
    std::vector<double> v;
    double pool = 0.0;
    double damping = 1.0;
    double credit_total = 0.0;
    std::uint64_t steps = 0;
    std::uint64_t elementary_steps = 0;
};

inline OpicState opic_init(const SparseGraph& graph, std::span<const double> v, double damping = 1.0) {
    if (v.size() != graph.size()) throw std::invalid_argument("opic_init: personalization length mismatch");
    if (!(damping > 0.0 && damping <= 1.0)) throw std::invalid_argument("opic_init: damping must lie in (0, 1]");
    OpicState s;
    s.stored.assign(v.begin(), v.end());
    s.seen.assign(v.size(), 0.0);
    s.credit.assign(v.size(), 0.0);
    s.v.assign(v.begin(), v.end());
    s.damping = damping;
    return s;
}

inline double opic_cash(const OpicState& s, node_t i) { return s.stored[i] + (s.pool - s.seen[i]) * s.v[i]; }

inline std::vector<double> opic_cash_vector(const OpicState& s) {
    std::vector<double> c(s.stored.size());
    for (node_t i = 0; i < c.size(); ++i) c[i] = opic_cash(s, i);
    return c;
}

namespace detail {

inline void opic_rebase(OpicState& s) {
    for (node_t i = 0; i < s.stored.size(); ++i) {
        s.stored[i] = opic_cash(s, i);
        s.seen[i] = 0.0;
    }
    s.pool = 0.0;
}

}  // namespace detail

/// Visits node i: credits its cash and distributes it. Returns the cash moved.
inline double opic_step(OpicState& s, node_t i, const SparseGraph& graph) {
    auto kids = graph.children(i);
    const double cash = opic_cash(s, i);
    ++s.steps;
    if (cash == 0.0) return 0.0;
    s.stored[i] = 0.0;
    s.seen[i] = s.pool;
    s.credit[i] += cash;
    s.credit_total += cash;
    if (kids.empty()) {
        s.pool += cash;
    } else {
        const double share = s.damping * cash / static_cast<double>(kids.size());
        for (node_t j : kids) s.stored[j] += share;
        s.pool += (1.0 - s.damping) * cash;
        s.elementary_steps += kids.size();
    }
    if (s.pool > 1.0) detail::opic_rebase(s);
    return cash;
}

/// (credit + cash) / (sum credit + sum cash).
inline std::vector<double> opic_estimate(const OpicState& s) {
    std::vector<double> e(s.stored.size());
    double total = 0.0;
    for (node_t i = 0; i < e.size(); ++i) {
        e[i] = s.credit[i] + opic_cash(s, i);
        total += e[i];
    }
    for (double& x : e) x /= total;
    return e;
}

inline double opic_error(const OpicState& s, std::span<const double> reference) {
    if (reference.size() != s.stored.size()) throw std::invalid_argument("opic_error: dimension mismatch");
    return l1_distance(opic_estimate(s), reference);
}

struct OpicOptions {
    std::uint64_t step_budget = 0;  // elementary steps; required
    std::uint64_t trace_every = 0;  // visits; 0: every N
    std::span<const double> reference;
};

struct OpicResult {
    std::vector<double> rank;
    OpicState state;
    ConvergenceTrace trace;
};

/// Runs OPIC until the elementary-step budget is spent. There is no stopping rule, so the
/// trace residual column holds the total cash (always 1) and the bound column is inf.
/// RAND and PER never look at the cash; SWEEP gets a fresh cash vector per visit, at O(N)
/// each. The heap-backed kinds cannot track teleported cash and are rejected.
inline OpicResult run_opic(const SparseGraph& graph, const DiffusionParams& params, Scheduler& scheduler,
                           const OpicOptions& options) {
    params.validate(graph.size(), true);
    if (options.step_budget == 0) throw std::invalid_argument("OPIC needs an elementary-step budget");
    const std::uint64_t n = graph.size();
    const std::uint64_t every = options.trace_every ? options.trace_every : n;
    const std::uint64_t idle_limit = 64 * n + 64;
    const bool blind = scheduler.kind() == SchedulerKind::Rand || scheduler.kind() == SchedulerKind::Per;
    if (!blind && scheduler.kind() != SchedulerKind::Sweep)
        throw std::invalid_argument("OPIC runs with the rand, per or sweep scheduler");
    OpicResult out;
    out.state = opic_init(graph, params.personalization, params.damping);
    auto sample = [&] {
        TraceRow row{out.state.elementary_steps, out.state.steps, 1.0, std::numeric_limits<double>::infinity(),
                     std::nullopt};
        if (!options.reference.empty()) row.true_error = opic_error(out.state, options.reference);
        out.trace.append(row);
    };
    sample();
    std::vector<double> cash = opic_cash_vector(out.state);
    std::uint64_t idle = 0;
    while (out.state.elementary_steps < options.step_budget) {
        if (!blind) cash = opic_cash_vector(out.state);
        const node_t i = scheduler.next(std::span<const double>(cash));
        if (opic_step(out.state, i, graph) == 0.0) {
            if (++idle > idle_limit) throw StarvationError("OPIC scheduler made no progress");
            continue;
        }
        idle = 0;
        if (out.state.steps % every == 0) sample();
    }
    if (out.trace.back().diffusions != out.state.steps) sample();
    out.rank = opic_estimate(out.state);
    return out;
}

}  // namespace fluidrank
