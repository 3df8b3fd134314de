#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "fluidrank/graph.hpp"

namespace fluidrank {

/// Power-law link generator settings. `permutations` defaults to n.
/// With `draws` set, exactly that many pairs are drawn and the distinct links kept
/// (l is then ignored); otherwise pairs are drawn until l distinct links exist.
struct GenConfig {
    std::size_t n = 10000;
    std::size_t l = 10000;
    double alpha = 2.0;
    std::optional<std::size_t> permutations;
    std::uint64_t seed = 42;
    std::size_t max_attempts = 0;  // 0: 1000 l + 100000
    std::optional<std::size_t> draws;

    void validate() const {
        if (n < 2) throw std::invalid_argument("generator needs n >= 2");
        if (!(alpha > 0.0)) throw std::invalid_argument("generator needs alpha > 0");
        if (draws) return;
        if (l < 1) throw std::invalid_argument("generator needs l >= 1");
        if (l > n * (n - 1)) throw std::invalid_argument("l exceeds the number of possible links");
    }

    std::size_t attempt_cap() const { return max_attempts ? max_attempts : 1000 * l + 100000; }

    /// Parses "n=...,l=...,alpha=...,perms=...,seed=...,draws=...". Unknown keys are rejected.
    static GenConfig parse(std::string_view text) {
        GenConfig c;
        while (!text.empty()) {
            auto comma = text.find(',');
            std::string_view item = text.substr(0, comma);
            text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
            auto eq = item.find('=');
            if (eq == std::string_view::npos) throw std::invalid_argument("expected key=value in '" + std::string(item) + "'");
            std::string_view key = item.substr(0, eq);
            std::string value(item.substr(eq + 1));
            auto as_size = [&] {
                std::size_t v = 0;
                auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
                if (ec != std::errc() || p != value.data() + value.size())
                    throw std::invalid_argument("bad integer for " + std::string(key));
                return v;
            };
            if (key == "n") c.n = as_size();
            else if (key == "l") c.l = as_size();
            else if (key == "perms") c.permutations = as_size();
            else if (key == "seed") c.seed = as_size();
            else if (key == "draws") c.draws = as_size();
            else if (key == "alpha") {
                std::size_t used = 0;
                try {
                    c.alpha = std::stod(value, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != value.size() || value.empty()) throw std::invalid_argument("bad value for alpha");
            } else {
                throw std::invalid_argument("unknown generator key '" + std::string(key) + "'");
            }
        }
        return c;
    }
};

struct GenReport {
    std::size_t requested_links = 0;
    std::size_t links = 0;
    std::size_t dangling = 0;
    std::size_t attempts = 0;
    std::uint64_t seed = 0;
};

struct Generated {
    SparseGraph graph;
    GenReport report;
};

/// Raised when the generator cannot find enough distinct links within its attempt cap.
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Cumulative weights of node i, where node i holds rank perm[i] + 1 with weight 1/rank^alpha.
/// The rank assignment starts as the identity and receives `swaps` random transpositions.
inline std::vector<double> powerlaw_cdf(std::size_t n, double alpha, std::size_t swaps, std::mt19937_64& rng) {
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = i;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t s = 0; s < swaps; ++s) {
        const std::size_t a = pick(rng);
        const std::size_t b = pick(rng);
        std::swap(rank[a], rank[b]);
    }
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += std::pow(static_cast<double>(rank[i] + 1), -alpha);
        cdf[i] = acc;
    }
    return cdf;
}

inline node_t sample_cdf(const std::vector<double>& cdf, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, cdf.back());
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u(rng));
    if (it == cdf.end()) --it;
    return static_cast<node_t>(it - cdf.begin());
}

}  // namespace detail

/// Draws distinct links whose sources and destinations follow independent, randomly
/// permuted 1/k^alpha laws. Self-loops and repeats are rejected and redrawn.
inline Generated generate(const GenConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const std::size_t swaps = config.permutations.value_or(config.n);
    const std::vector<double> src = detail::powerlaw_cdf(config.n, config.alpha, swaps, rng);
    const std::vector<double> dst = detail::powerlaw_cdf(config.n, config.alpha, swaps, rng);

    std::unordered_set<std::uint64_t> seen;
    std::vector<Edge> edges;
    const std::size_t want = config.draws ? SIZE_MAX : config.l;
    const std::size_t cap = config.draws ? *config.draws : config.attempt_cap();
    if (!config.draws) {
        seen.reserve(config.l * 2);
        edges.reserve(config.l);
    }
    std::size_t attempts = 0;
    while (edges.size() < want) {
        if (attempts == cap && config.draws) break;
        if (attempts == cap)
            throw GenerationError("generator gave up after " + std::to_string(cap) + " attempts with " +
                                  std::to_string(edges.size()) + " of " + std::to_string(config.l) + " links");
        ++attempts;
        const node_t s = detail::sample_cdf(src, rng);
        const node_t t = detail::sample_cdf(dst, rng);
        if (s == t) continue;
        if (!seen.insert((static_cast<std::uint64_t>(s) << 32) | t).second) continue;
        edges.push_back({s, t});
    }
    Generated out;
    out.graph = SparseGraph::from_edges(config.n, std::move(edges));
    out.report = {config.draws ? 0 : config.l, out.graph.num_links(), out.graph.dangling().size(), attempts,
                  config.seed};
    return out;
}

struct DegreeReport {
    std::map<std::size_t, std::size_t> out;  // degree -> node count
    std::map<std::size_t, std::size_t> in;
};

inline DegreeReport degree_report(const SparseGraph& g) {
    DegreeReport r;
    for (node_t i = 0; i < g.size(); ++i) {
        ++r.out[g.out_degree(i)];
        ++r.in[g.in_degree(i)];
    }
    return r;
}

}  // namespace fluidrank
