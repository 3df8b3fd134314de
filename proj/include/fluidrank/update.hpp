#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidrank/engine.hpp"
#include "fluidrank/graph.hpp"
#include "fluidrank/sched.hpp"
#include "fluidrank/trace.hpp"

namespace fluidrank {

/// A signed fluid vector held as two nonnegative parts, pos - neg.
struct SignedFluid {
    std::vector<double> pos;
    std::vector<double> neg;

    explicit SignedFluid(std::size_t n = 0) : pos(n, 0.0), neg(n, 0.0) {}

    std::vector<double> net() const {
        std::vector<double> out(pos.size());
        for (std::size_t i = 0; i < pos.size(); ++i) out[i] = pos[i] - neg[i];
        return out;
    }

    /// Cancels positive against negative fluid at the same node.
    void compact() {
        for (std::size_t i = 0; i < pos.size(); ++i) {
            const double m = std::min(pos[i], neg[i]);
            pos[i] -= m;
            neg[i] -= m;
        }
    }

    double pos_mass() const { return l1_norm(pos); }
    double neg_mass() const { return l1_norm(neg); }
};

/// d (P' - P) h over the columns that differ between the graphs, compacted.
inline SignedFluid delta_fluid(const SparseGraph& g, const SparseGraph& g2, std::span<const double> h, double damping) {
    if (g.size() != g2.size() || h.size() != g.size()) throw std::invalid_argument("delta_fluid: size mismatch");
    SignedFluid out(g.size());
    for (node_t j : delta_columns(g, g2)) {
        if (h[j] == 0.0) continue;
        auto before = g.children(j);
        auto after = g2.children(j);
        if (!before.empty()) {
            const double w = damping * h[j] / static_cast<double>(before.size());
            for (node_t i : before) out.neg[i] += w;
        }
        if (!after.empty()) {
            const double w = damping * h[j] / static_cast<double>(after.size());
            for (node_t i : after) out.pos[i] += w;
        }
    }
    out.compact();
    return out;
}

/// Diffusion step for signed fluid. R is kept equal to |F|_1, updated from the exact change
/// of each touched entry, so R / (1 - d) still bounds the remaining L1 error.
inline double diffuse_signed(DiffusionState& s, node_t i, const SparseGraph& graph, const DiffusionParams& params) {
    auto kids = graph.children(i);
    const double sent = s.f[i];
    if (sent == 0.0) return 0.0;
    s.f[i] = 0.0;
    s.h[i] += sent;
    s.r -= std::abs(sent);
    if (!kids.empty()) {
        const double share = params.damping * sent / static_cast<double>(kids.size());
        for (node_t j : kids) {
            const double old = s.f[j];
            s.f[j] = old + share;
            s.r += std::abs(s.f[j]) - std::abs(old);
        }
        s.elementary_steps += kids.size();
    }
    ++s.diffusions;
    if (s.diffusions % graph.size() == 0) s.r = l1_norm(s.f);
    return sent;
}

enum class SignedMode { Joint, Separate };

struct ResumeOptions {
    SignedMode mode = SignedMode::Joint;
    SchedulerOptions scheduler;
    std::uint64_t trace_every = 0;
    std::span<const double> reference;  // limit on g2, for the true-error column (joint mode)
};

struct ResumeResult {
    std::vector<double> rank;     // normalized H_{n0} + H'
    std::vector<double> h_total;  // H_{n0} + H'
    std::vector<double> h_delta;  // H' alone
    SignedFluid injected;
    ConvergenceTrace trace;
    std::uint64_t diffusions = 0;
    std::uint64_t elementary_steps = 0;
    double bound = 0.0;
};

/// Switches a run on g (stopped after n0 diffusions) over to g2: the fluid becomes
/// F_{n0} + d (P' - P) H_{n0} and diffusion continues on g2. H_{n0} + H' converges to
/// the solution on g2. The state must be quiesced (no fluid in transit).
inline ResumeResult resume(const DiffusionState& old, const SparseGraph& g, const SparseGraph& g2,
                           const DiffusionParams& params, SchedulerKind kind, const ResumeOptions& options = {}) {
    params.validate(g2.size());
    if (old.damping != params.damping) throw std::invalid_argument("resume: damping differs from the original run");
    if (old.f.size() != g.size() || old.h.size() != g.size() || g.size() != g2.size())
        throw std::invalid_argument("resume: state and graphs differ in size");

    ResumeResult out;
    out.injected = delta_fluid(g, g2, old.h, params.damping);
    const std::size_t n = g2.size();

    if (options.mode == SignedMode::Separate) {
        DiffusionParams half = params;
        half.target_error = params.target_error / 2.0;
        auto part = [&](std::vector<double> fluid) {
            DiffusionState s;
            s.f = std::move(fluid);
            s.h.assign(n, 0.0);
            s.r = l1_norm(s.f);
            s.damping = params.damping;
            Scheduler sched(kind, g2, options.scheduler);
            return run_from(std::move(s), g2, half, sched);
        };
        std::vector<double> pos(n);
        for (std::size_t i = 0; i < n; ++i) pos[i] = old.f[i] + out.injected.pos[i];
        RunResult p = part(std::move(pos));
        RunResult m = part(out.injected.neg);
        out.h_delta.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.h_delta[i] = p.state.h[i] - m.state.h[i];
        for (TraceRow row : p.trace.rows()) out.trace.append(row);
        for (TraceRow row : m.trace.rows()) {
            row.elementary_steps += p.state.elementary_steps;
            row.diffusions += p.state.diffusions;
            out.trace.append(row);
        }
        out.diffusions = p.state.diffusions + m.state.diffusions;
        out.elementary_steps = p.state.elementary_steps + m.state.elementary_steps;
        out.bound = error_bound(p.state, params) + error_bound(m.state, params);
    } else {
        DiffusionState s;
        s.f.resize(n);
        for (std::size_t i = 0; i < n; ++i) s.f[i] = old.f[i] + out.injected.pos[i] - out.injected.neg[i];
        s.h.assign(n, 0.0);
        s.r = l1_norm(s.f);
        s.damping = params.damping;
        Scheduler sched(kind, g2, options.scheduler);
        const std::uint64_t every = options.trace_every ? options.trace_every : n;
        auto sample = [&] {
            TraceRow row{s.elementary_steps, s.diffusions, s.r, error_bound(s, params), std::nullopt};
            if (!options.reference.empty()) {
                std::vector<double> total(n);
                for (std::size_t i = 0; i < n; ++i) total[i] = old.h[i] + s.h[i];
                row.true_error = normalized_error(total, options.reference);
            }
            out.trace.append(row);
        };
        sample();
        const std::uint64_t idle_limit = 64 * n + 64;
        std::uint64_t idle = 0;
        while (error_bound(s, params) > params.target_error) {
            const node_t i = sched.next(std::span<const double>(s.f));
            if (diffuse_signed(s, i, g2, params) == 0.0) {
                if (++idle > idle_limit) throw StarvationError("resume: scheduler made no progress");
                continue;
            }
            idle = 0;
            sched.observe(i, std::span<const double>(s.f));
            if (s.diffusions % every == 0) sample();
        }
        if (out.trace.back().diffusions != s.diffusions) sample();
        out.h_delta = std::move(s.h);
        out.diffusions = s.diffusions;
        out.elementary_steps = s.elementary_steps;
        out.bound = error_bound(s, params);
    }

    out.h_total.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.h_total[i] = old.h[i] + out.h_delta[i];
    out.rank = normalized(out.h_total);
    return out;
}

}  // namespace fluidrank
