#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "fluidrank/graph.hpp"

namespace fluidrank {

enum class SchedulerKind { Max, Rand, Per, Sweep, Op, Op2 };

inline std::string_view to_string(SchedulerKind kind) {
    switch (kind) {
        case SchedulerKind::Max: return "max";
        case SchedulerKind::Rand: return "rand";
        case SchedulerKind::Per: return "per";
        case SchedulerKind::Sweep: return "sweep";
        case SchedulerKind::Op: return "op";
        case SchedulerKind::Op2: return "op2";
    }
    return "?";
}

inline std::optional<SchedulerKind> parse_scheduler(std::string_view name) {
    for (auto k : {SchedulerKind::Max, SchedulerKind::Rand, SchedulerKind::Per, SchedulerKind::Sweep,
                   SchedulerKind::Op, SchedulerKind::Op2}) {
        if (to_string(k) == name) return k;
    }
    return std::nullopt;
}

inline constexpr SchedulerKind kAllSchedulers[] = {SchedulerKind::Max, SchedulerKind::Rand, SchedulerKind::Per,
                                                   SchedulerKind::Sweep, SchedulerKind::Op, SchedulerKind::Op2};

struct SchedulerOptions {
    std::uint64_t seed = 42;
    double sweep_decay = 0.5;
};

/// Produces the diffusion sequence for one run. Scores use |f| so the same
/// strategies drive signed fluid during incremental updates.
///
/// MAX, OP and OP2 keep a lazy max-heap: the run loop must call observe(i, f)
/// after diffusing i so the changed entries (i and its children) get re-queued.
/// Stale heap entries are detected by comparing against the current score.
class Scheduler {
public:
    Scheduler(SchedulerKind kind, const SparseGraph& graph, SchedulerOptions options = {})
        : kind_(kind), graph_(&graph), options_(options), rng_(options.seed) {
        if (!(options.sweep_decay > 0.0 && options.sweep_decay < 1.0))
            throw std::invalid_argument("sweep decay must lie in (0, 1)");
        if (kind == SchedulerKind::Op || kind == SchedulerKind::Op2) {
            denom_.resize(graph.size());
            for (node_t i = 0; i < graph.size(); ++i) {
                double out = static_cast<double>(graph.out_degree(i)) + 1.0;
                denom_[i] = kind == SchedulerKind::Op ? (static_cast<double>(graph.in_degree(i)) + 1.0) * out : out;
            }
        }
    }

    SchedulerKind kind() const noexcept { return kind_; }

    /// Current SWEEP threshold; NaN before the first call.
    double threshold() const noexcept { return theta_; }

    node_t next(std::span<const double> fluid) {
        const std::size_t n = graph_->size();
        if (n == 0) throw std::logic_error("scheduler on empty graph");
        switch (kind_) {
            case SchedulerKind::Per: return static_cast<node_t>(counter_++ % n);
            case SchedulerKind::Rand: {
                std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
                return static_cast<node_t>(pick(rng_));
            }
            case SchedulerKind::Sweep: return next_sweep(fluid);
            default: return next_heap(fluid);
        }
    }

    void observe(node_t i, std::span<const double> fluid) {
        if (!heap_built_) return;
        if (heap_.size() > 4 * graph_->size() + 64) {
            rebuild(fluid);
            return;
        }
        push(i, fluid[i]);
        for (node_t j : graph_->children(i)) push(j, fluid[j]);
    }

    /// The scores next() maximizes. PER and RAND ignore fluid and report 1.
    std::vector<double> score_table(std::span<const double> fluid) const {
        std::vector<double> s(fluid.size(), 1.0);
        if (kind_ == SchedulerKind::Per || kind_ == SchedulerKind::Rand) return s;
        for (node_t i = 0; i < fluid.size(); ++i) s[i] = score(i, fluid[i]);
        return s;
    }

private:
    struct Entry {
        double score;
        node_t node;
    };
    // max score first, lowest index among ties
    static bool heap_less(const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.node > b.node;
    }

    double score(node_t i, double f) const {
        double a = std::abs(f);
        return denom_.empty() ? a : a / denom_[i];
    }

    void push(node_t i, double f) {
        double s = score(i, f);
        if (s <= 0.0) return;
        heap_.push_back({s, i});
        std::push_heap(heap_.begin(), heap_.end(), heap_less);
    }

    void rebuild(std::span<const double> fluid) {
        heap_.clear();
        for (node_t i = 0; i < fluid.size(); ++i) {
            double s = score(i, fluid[i]);
            if (s > 0.0) heap_.push_back({s, i});
        }
        std::make_heap(heap_.begin(), heap_.end(), heap_less);
        heap_built_ = true;
    }

    node_t next_heap(std::span<const double> fluid) {
        if (!heap_built_) rebuild(fluid);
        while (!heap_.empty()) {
            const Entry& top = heap_.front();
            if (score(top.node, fluid[top.node]) == top.score) return top.node;
            std::pop_heap(heap_.begin(), heap_.end(), heap_less);
            heap_.pop_back();
        }
        return 0;
    }

    node_t next_sweep(std::span<const double> fluid) {
        const std::size_t n = fluid.size();
        if (std::isnan(theta_)) {
            double m = max_abs(fluid);
            if (m == 0.0) return 0;
            theta_ = m;
        }
        for (;;) {
            while (cursor_ < n) {
                node_t i = static_cast<node_t>(cursor_++);
                double a = std::abs(fluid[i]);
                if (a > 0.0 && a >= theta_) {
                    found_in_pass_ = true;
                    return i;
                }
            }
            cursor_ = 0;
            if (found_in_pass_) {
                found_in_pass_ = false;
                continue;
            }
            // Skips the passes that would come up empty.
            double m = max_abs(fluid);
            if (m == 0.0) return 0;
            do {
                theta_ *= options_.sweep_decay;
            } while (theta_ > m);
        }
    }

    static double max_abs(std::span<const double> fluid) {
        double m = 0.0;
        for (double v : fluid) m = std::max(m, std::abs(v));
        return m;
    }

    SchedulerKind kind_;
    const SparseGraph* graph_;
    SchedulerOptions options_;
    std::mt19937_64 rng_;
    std::uint64_t counter_ = 0;
    std::vector<double> denom_;
    std::vector<Entry> heap_;
    bool heap_built_ = false;
    double theta_ = std::numeric_limits<double>::quiet_NaN();
    std::size_t cursor_ = 0;
    bool found_in_pass_ = false;
};

}  // namespace fluidrank
