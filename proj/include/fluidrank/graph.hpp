#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace fluidrank {

using node_t = std::uint32_t;

/// Raised by the loaders and by graph edits that do not match the graph.
/// `line()` is the 1-based input line for parse errors, 0 otherwise.
class GraphError : public std::runtime_error {
public:
    explicit GraphError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct Edge {
    node_t source = 0;
    node_t target = 0;

    auto operator<=>(const Edge&) const = default;
};

/// Maps dense node indices back to the ids (and optional labels) of the input.
class IdMap {
public:
    IdMap() = default;

    static IdMap identity(std::size_t n) {
        IdMap m;
        for (std::size_t i = 0; i < n; ++i) m.add(i);
        return m;
    }

    node_t add(std::uint64_t original, std::string label = {}) {
        auto [it, inserted] = index_.try_emplace(original, static_cast<node_t>(original_.size()));
        if (inserted) {
            original_.push_back(original);
            labels_.push_back(std::move(label));
        }
        return it->second;
    }

    std::optional<node_t> find(std::uint64_t original) const {
        auto it = index_.find(original);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const noexcept { return original_.size(); }
    std::uint64_t original(node_t i) const { return original_.at(i); }
    const std::string& label(node_t i) const { return labels_.at(i); }

private:
    std::vector<std::uint64_t> original_;
    std::vector<std::string> labels_;
    std::unordered_map<std::uint64_t, node_t> index_;
};

/// Counts reported while building a graph from raw edges.
struct BuildStats {
    std::size_t raw_edges = 0;
    std::size_t duplicates = 0;
    std::size_t self_loops = 0;
};

/// Link structure of a column-substochastic matrix P with uniform weights:
/// p(i, j) = 1 / out_degree(j) for every child i of j. Dangling columns stay empty.
/// Immutable once built; children and parents are stored sorted in CSR form.
class SparseGraph {
public:
    SparseGraph() = default;

    static SparseGraph from_edges(std::size_t n, std::vector<Edge> edges, IdMap ids = {},
                                  BuildStats* stats = nullptr) {
        if (n >= std::numeric_limits<node_t>::max()) throw GraphError("node count overflows node index type");
        if (ids.size() == 0) ids = IdMap::identity(n);
        if (ids.size() != n) throw GraphError("id map size does not match node count");

        BuildStats local;
        local.raw_edges = edges.size();
        for (const Edge& e : edges) {
            if (e.source >= n || e.target >= n) throw GraphError("edge endpoint out of range");
        }
        auto loops = std::remove_if(edges.begin(), edges.end(), [](const Edge& e) { return e.source == e.target; });
        local.self_loops = static_cast<std::size_t>(edges.end() - loops);
        edges.erase(loops, edges.end());
        std::sort(edges.begin(), edges.end());
        auto dups = std::unique(edges.begin(), edges.end());
        local.duplicates = static_cast<std::size_t>(edges.end() - dups);
        edges.erase(dups, edges.end());
        if (stats) *stats = local;

        SparseGraph g;
        g.n_ = n;
        g.ids_ = std::move(ids);
        g.out_offsets_.assign(n + 1, 0);
        g.in_offsets_.assign(n + 1, 0);
        for (const Edge& e : edges) {
            ++g.out_offsets_[e.source + 1];
            ++g.in_offsets_[e.target + 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            g.out_offsets_[i + 1] += g.out_offsets_[i];
            g.in_offsets_[i + 1] += g.in_offsets_[i];
        }
        g.targets_.resize(edges.size());
        g.sources_.resize(edges.size());
        // edges are sorted by (source, target), so children land sorted
        for (std::size_t k = 0; k < edges.size(); ++k) g.targets_[k] = edges[k].target;
        std::vector<std::size_t> cursor(g.in_offsets_.begin(), g.in_offsets_.end() - 1);
        for (const Edge& e : edges) g.sources_[cursor[e.target]++] = e.source;
        for (node_t j = 0; j < n; ++j) {
            if (g.out_offsets_[j] == g.out_offsets_[j + 1]) g.dangling_.push_back(j);
        }
        return g;
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t num_links() const noexcept { return targets_.size(); }

    std::span<const node_t> children(node_t j) const {
        check(j);
        return {targets_.data() + out_offsets_[j], out_offsets_[j + 1] - out_offsets_[j]};
    }

    std::span<const node_t> parents(node_t i) const {
        check(i);
        return {sources_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
    }

    std::size_t out_degree(node_t j) const { return children(j).size(); }
    std::size_t in_degree(node_t i) const { return parents(i).size(); }
    bool is_dangling(node_t j) const { return out_degree(j) == 0; }
    const std::vector<node_t>& dangling() const noexcept { return dangling_; }

    /// Column j of P as (child, weight) pairs; empty iff j is dangling.
    std::vector<std::pair<node_t, double>> column(node_t j) const {
        auto kids = children(j);
        std::vector<std::pair<node_t, double>> col;
        col.reserve(kids.size());
        const double w = kids.empty() ? 0.0 : 1.0 / static_cast<double>(kids.size());
        for (node_t i : kids) col.emplace_back(i, w);
        return col;
    }

    bool has_edge(node_t source, node_t target) const {
        auto kids = children(source);
        return std::binary_search(kids.begin(), kids.end(), target);
    }

    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        out.reserve(num_links());
        for (node_t j = 0; j < n_; ++j) {
            for (node_t i : children(j)) out.push_back({j, i});
        }
        return out;
    }

    const IdMap& ids() const noexcept { return ids_; }

private:
    void check(node_t j) const {
        if (j >= n_) throw std::out_of_range("node " + std::to_string(j) + " out of range");
    }

    std::size_t n_ = 0;
    std::vector<std::size_t> out_offsets_{0};
    std::vector<node_t> targets_;
    std::vector<std::size_t> in_offsets_{0};
    std::vector<node_t> sources_;
    std::vector<node_t> dangling_;
    IdMap ids_;
};

/// Edge edits between two versions of a graph, in dense node indices.
struct GraphDelta {
    std::vector<Edge> added;
    std::vector<Edge> removed;

    bool empty() const noexcept { return added.empty() && removed.empty(); }
};

inline GraphDelta inverse(const GraphDelta& delta) { return {delta.removed, delta.added}; }

/// Applies a delta, rejecting stale edits (removing a missing edge or adding a present one).
inline SparseGraph apply_delta(const SparseGraph& g, const GraphDelta& delta) {
    const std::size_t n = g.size();
    auto in_range = [n](const Edge& e) { return e.source < n && e.target < n; };
    std::vector<Edge> removed = delta.removed;
    std::sort(removed.begin(), removed.end());
    if (std::adjacent_find(removed.begin(), removed.end()) != removed.end())
        throw GraphError("delta removes the same edge twice");
    for (const Edge& e : removed) {
        if (!in_range(e)) throw GraphError("delta edge endpoint out of range");
        if (!g.has_edge(e.source, e.target))
            throw GraphError("delta removes missing edge " + std::to_string(e.source) + "->" + std::to_string(e.target));
    }
    for (const Edge& e : delta.added) {
        if (!in_range(e)) throw GraphError("delta edge endpoint out of range");
        if (e.source == e.target) throw GraphError("delta adds a self-loop");
        if (g.has_edge(e.source, e.target))
            throw GraphError("delta adds existing edge " + std::to_string(e.source) + "->" + std::to_string(e.target));
        if (std::binary_search(removed.begin(), removed.end(), e))
            throw GraphError("delta both adds and removes an edge");
    }
    std::vector<Edge> edges;
    edges.reserve(g.num_links() + delta.added.size());
    for (const Edge& e : g.edges()) {
        if (!std::binary_search(removed.begin(), removed.end(), e)) edges.push_back(e);
    }
    edges.insert(edges.end(), delta.added.begin(), delta.added.end());
    BuildStats stats;
    SparseGraph out = SparseGraph::from_edges(n, std::move(edges), g.ids(), &stats);
    if (stats.duplicates != 0) throw GraphError("delta adds the same edge twice");
    return out;
}

/// Source nodes whose column of P differs between the two graphs, ascending.
inline std::vector<node_t> delta_columns(const SparseGraph& g, const SparseGraph& g2) {
    if (g.size() != g2.size()) throw std::invalid_argument("delta_columns: node counts differ");
    std::vector<node_t> changed;
    for (node_t j = 0; j < g.size(); ++j) {
        auto a = g.children(j);
        auto b = g2.children(j);
        if (!std::equal(a.begin(), a.end(), b.begin(), b.end())) changed.push_back(j);
    }
    return changed;
}

enum class EdgeFormat { Auto, Plain, Prefixed };

struct LoadReport {
    EdgeFormat format = EdgeFormat::Auto;
    std::size_t lines = 0;
    std::size_t nodes = 0;
    std::size_t links = 0;
    BuildStats build;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        if (i >= s.size()) break;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::uint64_t parse_id(std::string_view tok, std::size_t line) {
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec == std::errc::result_out_of_range) throw GraphError("node id overflow: " + std::string(tok), line);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw GraphError("malformed node id '" + std::string(tok) + "'", line);
    return value;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

}  // namespace detail

/// Reads either plain "src dst" pairs or the prefixed "n id label" / "e src dst" format.
/// Ids are compacted to 0..N-1 in order of first appearance; duplicates and self-loops dropped.
inline SparseGraph load_edge_list(std::istream& in, EdgeFormat format = EdgeFormat::Auto,
                                  LoadReport* report = nullptr) {
    IdMap ids;
    std::vector<Edge> edges;
    std::string buf;
    std::size_t line_no = 0;
    auto intern = [&](std::uint64_t id, std::size_t line, std::string label = {}) {
        if (ids.size() >= std::numeric_limits<node_t>::max() - 1 && !ids.find(id))
            throw GraphError("node id overflow: too many distinct nodes", line);
        return ids.add(id, std::move(label));
    };
    while (std::getline(in, buf)) {
        ++line_no;
        std::string_view line = detail::trim(buf);
        if (line.empty() || line.front() == '#' || line.front() == '%') continue;
        auto tok = detail::split_ws(line);
        if (format == EdgeFormat::Auto)
            format = (tok[0] == "n" || tok[0] == "e") ? EdgeFormat::Prefixed : EdgeFormat::Plain;
        if (format == EdgeFormat::Plain) {
            if (tok.size() != 2) throw GraphError("expected 'src dst'", line_no);
            node_t s = intern(detail::parse_id(tok[0], line_no), line_no);
            node_t t = intern(detail::parse_id(tok[1], line_no), line_no);
            edges.push_back({s, t});
        } else if (tok[0] == "n") {
            if (tok.size() < 2) throw GraphError("expected 'n <id> <label>'", line_no);
            std::string label;
            if (tok.size() > 2) {
                auto start = static_cast<std::size_t>(tok[2].data() - line.data());
                label = std::string(line.substr(start));
            }
            intern(detail::parse_id(tok[1], line_no), line_no, std::move(label));
        } else if (tok[0] == "e") {
            if (tok.size() != 3) throw GraphError("expected 'e <src> <dst>'", line_no);
            node_t s = intern(detail::parse_id(tok[1], line_no), line_no);
            node_t t = intern(detail::parse_id(tok[2], line_no), line_no);
            edges.push_back({s, t});
        } else {
            throw GraphError("unknown record type '" + std::string(tok[0]) + "'", line_no);
        }
    }
    if (ids.size() == 0) throw GraphError("empty input");
    const std::size_t n = ids.size();
    LoadReport local;
    local.format = format;
    local.lines = line_no;
    SparseGraph g = SparseGraph::from_edges(n, std::move(edges), std::move(ids), &local.build);
    local.nodes = g.size();
    local.links = g.num_links();
    if (report) *report = local;
    return g;
}

/// Writes the plain pair format using original ids.
inline void dump_edge_list(const SparseGraph& g, std::ostream& out) {
    for (node_t j = 0; j < g.size(); ++j) {
        for (node_t i : g.children(j)) out << g.ids().original(j) << ' ' << g.ids().original(i) << '\n';
    }
}

/// Parses "+ src dst" / "- src dst" lines, ids given in the graph's original numbering.
inline GraphDelta load_delta(std::istream& in, const SparseGraph& g) {
    GraphDelta delta;
    std::string buf;
    std::size_t line_no = 0;
    auto lookup = [&](std::string_view tok) {
        auto id = g.ids().find(detail::parse_id(tok, line_no));
        if (!id) throw GraphError("unknown node id " + std::string(tok), line_no);
        return *id;
    };
    while (std::getline(in, buf)) {
        ++line_no;
        std::string_view line = detail::trim(buf);
        if (line.empty() || line.front() == '#') continue;
        auto tok = detail::split_ws(line);
        if (tok.size() != 3 || (tok[0] != "+" && tok[0] != "-")) throw GraphError("expected '+|- src dst'", line_no);
        Edge e{lookup(tok[1]), lookup(tok[2])};
        (tok[0] == "+" ? delta.added : delta.removed).push_back(e);
    }
    return delta;
}

/// FNV-1a over node count, edges and original ids.
inline std::uint64_t fingerprint(const SparseGraph& g) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffu;
            h *= 1099511628211ull;
        }
    };
    mix(g.size());
    for (node_t i = 0; i < g.size(); ++i) mix(g.ids().original(i));
    for (node_t j = 0; j < g.size(); ++j) {
        mix(g.out_degree(j));
        for (node_t i : g.children(j)) mix(i);
    }
    return h;
}

}  // namespace fluidrank
