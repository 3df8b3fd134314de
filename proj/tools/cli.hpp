#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fluidrank/engine.hpp"
#include "fluidrank/gen.hpp"
#include "fluidrank/graph.hpp"
#include "fluidrank/sched.hpp"

namespace fluidrank::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kBadInput = 2,      // unreadable or malformed graph/delta/state file
    kSolverFailure = 3, // starvation guard, generator cap
    kMismatch = 4,      // state or delta inconsistent with the graph
};

/// One invocation's settings, shared by all subcommands.
struct ExperimentSpec {
    std::string graph_path;
    EdgeFormat format = EdgeFormat::Auto;
    std::optional<GenConfig> gen;
    std::vector<std::string> solvers;
    SchedulerKind scheduler = SchedulerKind::Max;
    double damping = 0.85;
    double target_error = 1e-8;
    std::uint64_t seed = 42;
    std::string trace_path;
    std::uint64_t trace_every = 0;
    std::string out_path;
    std::uint64_t budget = 0;  // OPIC elementary-step budget, 0: automatic
};

struct LoadedGraph {
    SparseGraph graph;
    LoadReport report;
    std::optional<GenReport> gen_report;
};

LoadedGraph load_graph(const ExperimentSpec& spec);

/// Writes "original_id<TAB>rank" lines sorted by descending rank, ties by node index.
void write_ranks(const SparseGraph& g, const std::vector<double>& rank, std::ostream& out);

/// Versioned text snapshot of a diffusion state (hex floats, so it round-trips exactly).
struct Snapshot {
    std::uint64_t graph_hash = 0;
    double damping = 0.85;
    double target_error = 1e-8;
    DiffusionState state;
};

void write_snapshot(const Snapshot& snap, std::ostream& out);
Snapshot read_snapshot(std::istream& in);

int cmd_rank(const ExperimentSpec& spec, const std::string& save_state, std::ostream& log);
int cmd_bench(const ExperimentSpec& spec, std::ostream& log);
int cmd_generate(const ExperimentSpec& spec, const std::string& report_path, std::ostream& log);
int cmd_update(const ExperimentSpec& spec, const std::string& state_path, const std::string& delta_path, bool fresh,
               bool damping_given, std::ostream& log);
int cmd_simulate(const ExperimentSpec& spec, std::size_t workers, std::size_t part_size, const std::string& policy,
                 std::ostream& log);

/// Parses argv (without the program name) and dispatches to a subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fluidrank::cli
