#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fluidrank {

struct TraceRow {
    std::uint64_t elementary_steps = 0;
    std::uint64_t diffusions = 0;  // iterations for power iteration, steps for OPIC
    double residual = 0.0;
    double bound = 0.0;
    std::optional<double> true_error;
};

/// Sampled convergence history of one solver run.
class ConvergenceTrace {
public:
    void append(TraceRow row) { rows_.push_back(row); }

    const std::vector<TraceRow>& rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }
    const TraceRow& back() const { return rows_.back(); }

    /// First sampled step count at which the true error is at or below `error`.
    std::optional<std::uint64_t> steps_to_reach(double error) const {
        for (const TraceRow& r : rows_) {
            if (r.true_error && *r.true_error <= error) return r.elementary_steps;
        }
        return std::nullopt;
    }

    void write_csv(std::ostream& out) const {
        out << "elementary_steps,diffusions,residual,bound,true_error\n";
        char buf[160];
        for (const TraceRow& r : rows_) {
            int len = std::snprintf(buf, sizeof buf, "%llu,%llu,%.12e,%.12e,",
                                    static_cast<unsigned long long>(r.elementary_steps),
                                    static_cast<unsigned long long>(r.diffusions), r.residual, r.bound);
            out.write(buf, len);
            if (r.true_error) {
                len = std::snprintf(buf, sizeof buf, "%.12e", *r.true_error);
                out.write(buf, len);
            }
            out << '\n';
        }
    }

private:
    std::vector<TraceRow> rows_;
};

inline double l1_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += std::abs(v);
    return s;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("l1_distance: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

/// x / sum(x). A zero vector is returned unchanged.
inline std::vector<double> normalized(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v;
    std::vector<double> out(x.begin(), x.end());
    if (s != 0.0) {
        for (double& v : out) v /= s;
    }
    return out;
}

/// L1 distance between normalize(x) and a reference, without materializing the copy.
inline double normalized_error(std::span<const double> x, std::span<const double> reference) {
    if (x.size() != reference.size()) throw std::invalid_argument("normalized_error: dimension mismatch");
    double s = 0.0;
    for (double v : x) s += v;
    if (s == 0.0) return l1_norm(reference);
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) e += std::abs(x[i] / s - reference[i]);
    return e;
}

}  // namespace fluidrank
