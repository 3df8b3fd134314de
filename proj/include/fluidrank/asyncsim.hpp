#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <functional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluidrank/engine.hpp"
#include "fluidrank/graph.hpp"
#include "fluidrank/trace.hpp"

namespace fluidrank {

/// Fluid pushed by one diffusion of `source` towards the children of `source` owned by
/// `target_worker`; each such child receives `amount`.
struct FluidMessage {
    std::uint64_t id = 0;
    node_t source = 0;
    std::uint32_t target_worker = 0;
    double amount = 0.0;
    std::uint32_t epoch = 0;
};

/// One simulated worker owning the contiguous node range [begin, end).
struct WorkerPartition {
    std::uint32_t id = 0;
    node_t begin = 0;
    node_t end = 0;
    std::vector<double> f;  // indexed by node - begin
    std::vector<double> h;
    std::deque<FluidMessage> inbox;

    bool owns(node_t i) const noexcept { return i >= begin && i < end; }
    std::size_t size() const noexcept { return end - begin; }
};

/// Splits 0..N-1 into ceil(N / m) contiguous ranges of size m and seeds each with (1 - d) V.
inline std::vector<WorkerPartition> partition(const SparseGraph& graph, const DiffusionParams& params,
                                              std::size_t part_size) {
    const std::size_t n = graph.size();
    if (part_size < 1 || part_size > n) throw std::invalid_argument("partition size must lie in [1, N]");
    params.validate(n);
    const std::vector<double> f0 = initial_fluid(params);
    std::vector<WorkerPartition> parts;
    for (std::size_t begin = 0; begin < n; begin += part_size) {
        WorkerPartition w;
        w.id = static_cast<std::uint32_t>(parts.size());
        w.begin = static_cast<node_t>(begin);
        w.end = static_cast<node_t>(std::min(n, begin + part_size));
        w.f.assign(f0.begin() + w.begin, f0.begin() + w.end);
        w.h.assign(w.size(), 0.0);
        parts.push_back(std::move(w));
    }
    return parts;
}

namespace detail {

inline std::uint32_t owner_of(std::span<const WorkerPartition> parts, node_t i) {
    // contiguous equal-size ranges except possibly the last
    const std::size_t m = parts.front().size();
    return static_cast<std::uint32_t>(i / m);
}

/// Adds each message's per-child amounts to the fluid of its destination nodes.
inline void add_message_fluid(std::vector<double>& f, const FluidMessage& msg, std::span<const WorkerPartition> parts,
                              const SparseGraph& graph) {
    const WorkerPartition& w = parts[msg.target_worker];
    for (node_t c : graph.children(msg.source)) {
        if (w.owns(c)) f[c] += msg.amount;
    }
}

inline double message_mass(const FluidMessage& msg, std::span<const WorkerPartition> parts, const SparseGraph& graph) {
    const WorkerPartition& w = parts[msg.target_worker];
    std::size_t count = 0;
    for (node_t c : graph.children(msg.source)) count += w.owns(c) ? 1 : 0;
    return msg.amount * static_cast<double>(count);
}

}  // namespace detail

/// max_i |(H + F + in-flight - F_0 - d P H)_i|, with undelivered and queued messages counted
/// as fluid at their destination nodes.
inline double global_invariant_check(std::span<const WorkerPartition> parts, std::span<const FluidMessage> in_flight,
                                     const SparseGraph& graph, const DiffusionParams& params) {
    const std::size_t n = graph.size();
    std::vector<double> h(n, 0.0), f(n, 0.0);
    for (const WorkerPartition& w : parts) {
        for (node_t i = w.begin; i < w.end; ++i) {
            h[i] = w.h[i - w.begin];
            f[i] = w.f[i - w.begin];
        }
        for (const FluidMessage& m : w.inbox) detail::add_message_fluid(f, m, parts, graph);
    }
    for (const FluidMessage& m : in_flight) detail::add_message_fluid(f, m, parts, graph);
    return conservation_violation(h, f, initial_fluid(params), graph, params.damping);
}

enum class Interleaving {
    Fifo,        // round-robin activations, every message delivered right after it is sent
    RandomDelay  // each event is drawn uniformly from {deliver message k} and {activate worker w}
};

struct SimOptions {
    Interleaving policy = Interleaving::RandomDelay;
    std::uint64_t seed = 42;
    std::uint64_t max_events = 0;  // 0: unbounded
    bool duplicate_first_message = false;  // fault injection, tests only
};

struct StepLogRow {
    enum class Kind { Diffuse, Deliver, Idle };
    std::uint64_t event = 0;
    std::uint32_t worker = 0;
    Kind kind = Kind::Idle;
    std::uint64_t item = 0;  // node for Diffuse, message id for Deliver
    double residual = 0.0;
};

inline void write_step_log(std::span<const StepLogRow> rows, std::ostream& out) {
    out << "event,worker,kind,item,residual\n";
    char buf[128];
    for (const StepLogRow& r : rows) {
        const char* kind = r.kind == StepLogRow::Kind::Diffuse ? "diffuse"
                           : r.kind == StepLogRow::Kind::Deliver ? "deliver"
                                                                 : "idle";
        int len = std::snprintf(buf, sizeof buf, "%llu,%u,%s,%llu,%.12e\n", static_cast<unsigned long long>(r.event),
                                r.worker, kind, static_cast<unsigned long long>(r.item), r.residual);
        out.write(buf, len);
    }
}

struct SimResult {
    std::vector<double> rank;
    std::vector<double> h;
    std::vector<node_t> sequence;  // diffused nodes in order
    std::vector<StepLogRow> log;
    std::uint64_t events = 0;
    std::uint64_t messages = 0;
    double residual = 0.0;
};

/// Deterministic event loop over simulated workers. Each event either delivers one message
/// into a worker's inbox or activates a worker, which drains its inbox, diffuses its largest
/// owned fluid entry, keeps pushes to its own nodes local and sends one message per remote
/// partition touched. A coordinator keeps the global residual R like the single-threaded run,
/// resynchronizing it to local fluid plus in-flight mass every N diffusions.
class Simulator {
public:
    Simulator(const SparseGraph& graph, DiffusionParams params, std::vector<WorkerPartition> parts,
              SimOptions options = {})
        : graph_(&graph), params_(std::move(params)), parts_(std::move(parts)), options_(options),
          rng_(options.seed) {
        params_.validate(graph.size());
        if (parts_.empty()) throw std::invalid_argument("no partitions");
        node_t expect = 0;
        for (std::size_t k = 0; k < parts_.size(); ++k) {
            const WorkerPartition& w = parts_[k];
            if (w.id != k || w.begin != expect || w.end <= w.begin || w.f.size() != w.size() || w.h.size() != w.size())
                throw std::invalid_argument("partitions must be contiguous, ordered and cover all nodes");
            if (k + 1 < parts_.size() && w.size() != parts_.front().size())
                throw std::invalid_argument("partitions must have equal size except the last");
            expect = w.end;
        }
        if (expect != graph.size()) throw std::invalid_argument("partitions do not cover all nodes");
        for (const WorkerPartition& w : parts_) {
            for (double v : w.f) r_ += v;
        }
        idle_limit_ = 1000 * parts_.size() + 1000;
    }

    bool done() const { return r_ / (1.0 - params_.damping) <= params_.target_error; }
    double residual() const noexcept { return r_; }
    std::uint64_t events() const noexcept { return events_; }
    const std::vector<WorkerPartition>& partitions() const noexcept { return parts_; }
    std::span<const FluidMessage> in_flight() const noexcept { return in_flight_; }
    const std::vector<StepLogRow>& log() const noexcept { return log_; }
    const std::vector<node_t>& sequence() const noexcept { return sequence_; }

    double invariant_violation() const { return global_invariant_check(parts_, in_flight_, *graph_, params_); }

    /// Runs one event. Throws StarvationError when the policy stops making progress.
    void step() {
        ++events_;
        bool progressed = false;
        if (options_.policy == Interleaving::Fifo) {
            const auto w = static_cast<std::uint32_t>(rr_++ % parts_.size());
            progressed = activate(w);
            std::reverse(in_flight_.begin(), in_flight_.end());
            while (!in_flight_.empty()) {
                deliver(in_flight_.size() - 1);
                progressed = true;
            }
        } else {
            // a backlog of messages gets delivered proportionally more often, so it stays bounded
            std::uniform_int_distribution<std::size_t> pick(0, in_flight_.size() + parts_.size() - 1);
            const std::size_t k = pick(rng_);
            if (k < in_flight_.size()) {
                deliver(k);
                progressed = true;
            } else {
                progressed = activate(static_cast<std::uint32_t>(k - in_flight_.size()));
            }
        }
        idle_ = progressed ? 0 : idle_ + 1;
        if (idle_ > idle_limit_) throw StarvationError("interleaving policy made no progress");
    }

    SimResult run() {
        while (!done()) {
            if (options_.max_events && events_ >= options_.max_events) break;
            step();
        }
        return result();
    }

    SimResult result() const {
        SimResult out;
        out.h.resize(graph_->size());
        for (const WorkerPartition& w : parts_) {
            for (node_t i = w.begin; i < w.end; ++i) out.h[i] = w.h[i - w.begin];
        }
        out.rank = normalized(out.h);
        out.sequence = sequence_;
        out.log = log_;
        out.events = events_;
        out.messages = next_message_id_;
        out.residual = r_;
        return out;
    }

private:
    void deliver(std::size_t index) {
        FluidMessage msg = in_flight_[index];
        in_flight_[index] = in_flight_.back();
        in_flight_.pop_back();
        parts_[msg.target_worker].inbox.push_back(msg);
        log_.push_back({events_, msg.target_worker, StepLogRow::Kind::Deliver, msg.id, r_});
    }

    bool activate(std::uint32_t wid) {
        WorkerPartition& w = parts_[wid];
        const bool drained = !w.inbox.empty();
        while (!w.inbox.empty()) {
            const FluidMessage msg = w.inbox.front();
            w.inbox.pop_front();
            for (node_t c : graph_->children(msg.source)) {
                if (w.owns(c)) w.f[c - w.begin] += msg.amount;
            }
        }
        std::size_t best = 0;
        for (std::size_t k = 1; k < w.size(); ++k) {
            if (w.f[k] > w.f[best]) best = k;
        }
        const double sent = w.f[best];
        if (sent == 0.0) {
            log_.push_back({events_, wid, StepLogRow::Kind::Idle, 0, r_});
            return drained;
        }
        const node_t i = w.begin + static_cast<node_t>(best);
        const double d = params_.damping;
        auto kids = graph_->children(i);
        w.f[best] = 0.0;
        w.h[best] += sent;
        if (kids.empty()) {
            r_ -= sent;
        } else {
            const double share = d * sent / static_cast<double>(kids.size());
            std::uint32_t pending = UINT32_MAX;
            for (node_t c : kids) {
                if (w.owns(c)) {
                    w.f[c - w.begin] += share;
                    continue;
                }
                const std::uint32_t target = detail::owner_of(parts_, c);
                if (target != pending) {
                    emit(i, target, share);
                    pending = target;
                }
            }
            r_ -= sent * (1.0 - d);
        }
        ++diffusions_;
        sequence_.push_back(i);
        if (diffusions_ % graph_->size() == 0) resync();
        log_.push_back({events_, wid, StepLogRow::Kind::Diffuse, i, r_});
        return true;
    }

    void emit(node_t source, std::uint32_t target, double amount) {
        FluidMessage msg{next_message_id_++, source, target, amount, 0};
        in_flight_.push_back(msg);
        if (options_.duplicate_first_message && msg.id == 0) {
            msg.id = next_message_id_++;
            in_flight_.push_back(msg);
        }
    }

    void resync() {
        double sum = 0.0;
        for (const WorkerPartition& w : parts_) {
            for (double v : w.f) sum += v;
        }
        double moving = 0.0;
        for (const WorkerPartition& w : parts_) {
            for (const FluidMessage& m : w.inbox) moving += detail::message_mass(m, parts_, *graph_);
        }
        for (const FluidMessage& m : in_flight_) moving += detail::message_mass(m, parts_, *graph_);
        r_ = sum + moving;
    }

    const SparseGraph* graph_;
    DiffusionParams params_;
    std::vector<WorkerPartition> parts_;
    SimOptions options_;
    std::mt19937_64 rng_;
    std::vector<FluidMessage> in_flight_;
    std::vector<StepLogRow> log_;
    std::vector<node_t> sequence_;
    double r_ = 0.0;
    std::uint64_t events_ = 0;
    std::uint64_t diffusions_ = 0;
    std::uint64_t rr_ = 0;
    std::uint64_t idle_ = 0;
    std::uint64_t idle_limit_ = 0;
    std::uint64_t next_message_id_ = 0;
};

inline SimResult simulate(const SparseGraph& graph, const DiffusionParams& params, std::vector<WorkerPartition> parts,
                          const SimOptions& options = {}) {
    Simulator sim(graph, params, std::move(parts), options);
    return sim.run();
}

}  // namespace fluidrank
