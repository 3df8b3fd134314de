#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidrank/graph.hpp"
#include "fluidrank/trace.hpp"

namespace fluidrank {

/// Damping d, personalization V and the stopping threshold on R / (1 - d).
struct DiffusionParams {
    double damping = 0.85;
    std::vector<double> personalization;
    double target_error = 1e-8;

    static DiffusionParams uniform(std::size_t n, double damping = 0.85, double target_error = 1e-8) {
        DiffusionParams p;
        p.damping = damping;
        p.personalization.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
        p.target_error = target_error;
        return p;
    }

    /// d = 1 is only accepted when `allow_unit_damping` is set (step-budget runs).
    void validate(std::size_t n, bool allow_unit_damping = false) const {
        if (personalization.size() != n)
            throw std::invalid_argument("personalization length " + std::to_string(personalization.size()) +
                                        " does not match node count " + std::to_string(n));
        const bool unit = damping == 1.0 && allow_unit_damping;
        if (!(damping > 0.0 && (damping < 1.0 || unit))) throw std::invalid_argument("damping must lie in (0, 1)");
        if (!(target_error > 0.0)) throw std::invalid_argument("target error must be positive");
        double s = 0.0;
        for (double v : personalization) {
            if (!(v >= 0.0)) throw std::invalid_argument("personalization must be nonnegative");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("personalization must sum to 1");
    }
};

/// F_0: (1 - d) V, or V itself in the d = 1 diagnostic mode.
inline std::vector<double> initial_fluid(const DiffusionParams& params) {
    std::vector<double> f = params.personalization;
    if (params.damping < 1.0) {
        for (double& v : f) v *= 1.0 - params.damping;
    }
    return f;
}

/// Fluid F_n, history H_n and residual R of one diffusion run.
struct DiffusionState {
    std::vector<double> f;
    std::vector<double> h;
    double r = 0.0;
    double damping = 0.85;
    std::uint64_t diffusions = 0;
    std::uint64_t elementary_steps = 0;
};

inline DiffusionState init(const SparseGraph& graph, const DiffusionParams& params) {
    params.validate(graph.size(), true);
    DiffusionState s;
    s.f = initial_fluid(params);
    s.h.assign(graph.size(), 0.0);
    s.damping = params.damping;
    for (double v : s.f) s.r += v;
    return s;
}

/// Diffuses node i: its fluid moves to H[i] and d / out_degree(i) of it goes to each child.
/// R drops by (1 - d) sent, or by all of it at a dangling node. Returns the amount sent;
/// a node without fluid is left alone and costs nothing.
inline double diffuse(DiffusionState& s, node_t i, const SparseGraph& graph, const DiffusionParams& params) {
    auto kids = graph.children(i);
    const double sent = s.f[i];
    if (sent == 0.0) return 0.0;
    const double d = params.damping;
    s.f[i] = 0.0;
    s.h[i] += sent;
    if (kids.empty()) {
        s.r -= sent;
    } else {
        const double share = d * sent / static_cast<double>(kids.size());
        for (node_t j : kids) s.f[j] += share;
        s.r -= sent * (1.0 - d);
        s.elementary_steps += kids.size();
    }
    ++s.diffusions;
    // R is |F|_1 in exact arithmetic; resync to cancel subtraction drift.
    if (s.diffusions % graph.size() == 0) {
        double sum = 0.0;
        for (double v : s.f) sum += v;
        s.r = sum;
    }
    return sent;
}

/// R / (1 - d): exactly |S_inf - H_n|_1 without dangling nodes, an upper bound otherwise.
inline double error_bound(const DiffusionState& s, const DiffusionParams& params) {
    if (params.damping >= 1.0) return std::numeric_limits<double>::infinity();
    return s.r / (1.0 - params.damping);
}

/// Pull-style update of one history entry: h[i] = F_0[i] + d (P h)_i.
inline void h_only_step(std::vector<double>& h, node_t i, const SparseGraph& graph, const DiffusionParams& params) {
    if (h.size() != graph.size()) throw std::invalid_argument("h_only_step: dimension mismatch");
    double pulled = 0.0;
    for (node_t j : graph.parents(i)) pulled += h[j] / static_cast<double>(graph.out_degree(j));
    const double f0 = params.damping < 1.0 ? (1.0 - params.damping) * params.personalization[i]
                                           : params.personalization[i];
    h[i] = f0 + params.damping * pulled;
}

/// max_i |(H + F - F_0 - d P H)_i| with P the stored (uncompleted) matrix.
inline double conservation_violation(std::span<const double> h, std::span<const double> f,
                                     std::span<const double> f0, const SparseGraph& graph, double damping) {
    const std::size_t n = graph.size();
    if (h.size() != n || f.size() != n || f0.size() != n)
        throw std::invalid_argument("conservation_violation: dimension mismatch");
    std::vector<double> lhs(n);
    for (std::size_t i = 0; i < n; ++i) lhs[i] = h[i] + f[i] - f0[i];
    for (node_t j = 0; j < n; ++j) {
        auto kids = graph.children(j);
        if (kids.empty() || h[j] == 0.0) continue;
        const double share = damping * h[j] / static_cast<double>(kids.size());
        for (node_t i : kids) lhs[i] -= share;
    }
    double worst = 0.0;
    for (double v : lhs) worst = std::max(worst, std::abs(v));
    return worst;
}

/// Raised when the run loop detects a scheduler that stopped moving fluid.
class StarvationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class S>
concept NodeScheduler = requires(S s, std::span<const double> f, node_t i) {
    { s.next(f) } -> std::convertible_to<node_t>;
    s.observe(i, f);
};

struct RunOptions {
    std::uint64_t max_diffusions = 0;  // 0: no budget; required when d = 1
    std::uint64_t trace_every = 0;     // 0: every N diffusions
    std::span<const double> reference; // optional normalized limit for the true-error column
    std::function<void(node_t, double)> on_diffuse;
};

struct RunResult {
    std::vector<double> rank;
    DiffusionState state;
    ConvergenceTrace trace;
    bool converged = false;
    std::uint64_t selections = 0;
};

namespace detail {

inline TraceRow sample(const DiffusionState& s, const DiffusionParams& params, std::span<const double> reference) {
    TraceRow row{s.elementary_steps, s.diffusions, s.r, error_bound(s, params), std::nullopt};
    if (!reference.empty()) row.true_error = normalized_error(s.h, reference);
    return row;
}

}  // namespace detail

/// Continues diffusing `state` until R / (1 - d) <= target_error (or the budget runs out).
/// The returned rank is H / |H|_1.
template <NodeScheduler S>
RunResult run_from(DiffusionState state, const SparseGraph& graph, const DiffusionParams& params, S& scheduler,
                   const RunOptions& options = {}) {
    params.validate(graph.size(), true);
    if (params.damping >= 1.0 && options.max_diffusions == 0)
        throw std::invalid_argument("d = 1 has no stopping rule; a diffusion budget is required");
    if (state.f.size() != graph.size() || state.h.size() != graph.size())
        throw std::invalid_argument("state does not match graph size");
    if (!options.reference.empty() && options.reference.size() != graph.size())
        throw std::invalid_argument("reference does not match graph size");

    const std::uint64_t n = graph.size();
    const std::uint64_t every = options.trace_every ? options.trace_every : n;
    const std::uint64_t idle_limit = 64 * n + 64;
    RunResult out;
    out.trace.append(detail::sample(state, params, options.reference));
    std::uint64_t idle = 0;
    while (error_bound(state, params) > params.target_error) {
        if (options.max_diffusions && state.diffusions >= options.max_diffusions) break;
        const node_t i = scheduler.next(std::span<const double>(state.f));
        ++out.selections;
        const double sent = diffuse(state, i, graph, params);
        if (sent == 0.0) {
            if (++idle > idle_limit)
                throw StarvationError("scheduler made no progress in " + std::to_string(idle_limit) +
                                      " selections with bound " + std::to_string(error_bound(state, params)));
            continue;
        }
        idle = 0;
        scheduler.observe(i, std::span<const double>(state.f));
        if (options.on_diffuse) options.on_diffuse(i, sent);
        if (state.diffusions % every == 0) out.trace.append(detail::sample(state, params, options.reference));
    }
    out.converged = error_bound(state, params) <= params.target_error;
    if (out.trace.back().diffusions != state.diffusions)
        out.trace.append(detail::sample(state, params, options.reference));
    out.rank = normalized(state.h);
    out.state = std::move(state);
    return out;
}

template <NodeScheduler S>
RunResult run(const SparseGraph& graph, const DiffusionParams& params, S& scheduler, const RunOptions& options = {}) {
    return run_from(init(graph, params), graph, params, scheduler, options);
}

}  // namespace fluidrank
