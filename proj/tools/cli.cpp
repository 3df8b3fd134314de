#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "fluidrank/asyncsim.hpp"
#include "fluidrank/baseline.hpp"
#include "fluidrank/update.hpp"

namespace fluidrank::cli {
namespace {

/// Input files that cannot be opened or parsed.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs that parse but do not fit together (state vs graph, stale delta).
class MismatchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

DiffusionParams params_for(const ExperimentSpec& spec, std::size_t n) {
    DiffusionParams p = DiffusionParams::uniform(n, spec.damping, spec.target_error);
    p.validate(n);
    return p;
}

struct SolverChoice {
    enum class Kind { Diffusion, MatIter, Opic } kind = Kind::Diffusion;
    SchedulerKind scheduler = SchedulerKind::Max;
    std::string name;
};

SolverChoice parse_solver(const std::string& text, SchedulerKind default_scheduler) {
    SolverChoice c;
    auto colon = text.find(':');
    std::string head = text.substr(0, colon);
    std::optional<std::string> tail;
    if (colon != std::string::npos) tail = text.substr(colon + 1);
    if (head == "mat-iter" && !tail) {
        c.kind = SolverChoice::Kind::MatIter;
        c.name = "mat-iter";
        return c;
    }
    if (head == "diffusion" || head == "opic") {
        c.kind = head == "opic" ? SolverChoice::Kind::Opic : SolverChoice::Kind::Diffusion;
        c.scheduler = head == "opic" ? SchedulerKind::Rand : default_scheduler;
        if (tail) {
            auto k = parse_scheduler(*tail);
            if (!k) throw std::invalid_argument("unknown scheduler '" + *tail + "'");
            c.scheduler = *k;
        }
        c.name = head + "-" + std::string(to_string(c.scheduler));
        return c;
    }
    if (auto k = parse_scheduler(text)) {
        c.scheduler = *k;
        c.name = "diffusion-" + text;
        return c;
    }
    throw std::invalid_argument("unknown solver '" + text + "'");
}

struct SolverRun {
    std::string name;
    std::vector<double> rank;
    ConvergenceTrace trace;
    std::uint64_t elementary_steps = 0;
    std::uint64_t iterations = 0;
    double bound = 0.0;
    std::optional<DiffusionState> state;
};

SolverRun run_solver(const SolverChoice& choice, const SparseGraph& g, const DiffusionParams& params,
                     const ExperimentSpec& spec, std::span<const double> reference, std::uint64_t opic_budget) {
    SolverRun out;
    out.name = choice.name;
    SchedulerOptions so;
    so.seed = spec.seed;
    switch (choice.kind) {
        case SolverChoice::Kind::Diffusion: {
            Scheduler sched(choice.scheduler, g, so);
            RunOptions ro;
            ro.trace_every = spec.trace_every;
            ro.reference = reference;
            RunResult r = run(g, params, sched, ro);
            out.rank = std::move(r.rank);
            out.trace = std::move(r.trace);
            out.elementary_steps = r.state.elementary_steps;
            out.iterations = r.state.diffusions;
            out.bound = error_bound(r.state, params);
            out.state = std::move(r.state);
            break;
        }
        case SolverChoice::Kind::MatIter: {
            PowerIterOptions po;
            po.reference = reference;
            PowerIterResult r = power_iterate(g, params, params.target_error, po);
            out.rank = std::move(r.rank);
            out.trace = std::move(r.trace);
            out.elementary_steps = r.state.elementary_steps;
            out.iterations = r.state.iterations;
            out.bound = out.trace.back().bound;
            break;
        }
        case SolverChoice::Kind::Opic: {
            Scheduler sched(choice.scheduler, g, so);
            OpicOptions oo;
            oo.step_budget = opic_budget;
            oo.trace_every = spec.trace_every;
            oo.reference = reference;
            OpicResult r = run_opic(g, params, sched, oo);
            out.rank = std::move(r.rank);
            out.trace = std::move(r.trace);
            out.elementary_steps = r.state.elementary_steps;
            out.iterations = r.state.steps;
            out.bound = std::numeric_limits<double>::infinity();
            break;
        }
    }
    return out;
}

template <class F>
int guarded(std::ostream& log, F&& body) {
    try {
        return body();
    } catch (const InputError& e) {
        log << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const GraphError& e) {
        log << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const std::filesystem::filesystem_error& e) {
        log << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const MismatchError& e) {
        log << "error: " << e.what() << '\n';
        return kMismatch;
    } catch (const StarvationError& e) {
        log << "error: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const GenerationError& e) {
        log << "error: " << e.what() << '\n';
        return kSolverFailure;
    } catch (const std::invalid_argument& e) {
        log << "error: " << e.what() << '\n';
        return kUsage;
    }
}

}  // namespace

LoadedGraph load_graph(const ExperimentSpec& spec) {
    LoadedGraph out;
    if (spec.gen) {
        Generated gen = generate(*spec.gen);
        out.graph = std::move(gen.graph);
        out.gen_report = gen.report;
        out.report.nodes = out.graph.size();
        out.report.links = out.graph.num_links();
        return out;
    }
    if (spec.graph_path.empty()) throw std::invalid_argument("one of --graph or --gen is required");
    std::ifstream in = open_in(spec.graph_path);
    out.graph = load_edge_list(in, spec.format, &out.report);
    return out;
}

void write_ranks(const SparseGraph& g, const std::vector<double>& rank, std::ostream& out) {
    std::vector<node_t> order(rank.size());
    std::iota(order.begin(), order.end(), node_t{0});
    std::stable_sort(order.begin(), order.end(), [&](node_t a, node_t b) { return rank[a] > rank[b]; });
    char buf[64];
    for (node_t i : order) {
        int len = std::snprintf(buf, sizeof buf, "%llu\t%.12g\n",
                                static_cast<unsigned long long>(g.ids().original(i)), rank[i]);
        out.write(buf, len);
    }
}

void write_snapshot(const Snapshot& snap, std::ostream& out) {
    const DiffusionState& s = snap.state;
    char buf[128];
    out << "fluidrank-state 1\n";
    std::snprintf(buf, sizeof buf, "graph %016llx\n", static_cast<unsigned long long>(snap.graph_hash));
    out << buf;
    out << "n " << s.f.size() << '\n';
    out << "damping " << fmt("%a", snap.damping) << '\n';
    out << "target_error " << fmt("%a", snap.target_error) << '\n';
    out << "diffusions " << s.diffusions << '\n';
    out << "elementary_steps " << s.elementary_steps << '\n';
    out << "r " << fmt("%a", s.r) << '\n';
    for (std::size_t i = 0; i < s.f.size(); ++i) out << fmt("%a", s.f[i]) << ' ' << fmt("%a", s.h[i]) << '\n';
}

Snapshot read_snapshot(std::istream& in) {
    auto fail = [](const std::string& why) -> Snapshot { throw InputError("bad state file: " + why); };
    std::string tag;
    int version = 0;
    if (!(in >> tag >> version) || tag != "fluidrank-state") return fail("missing header");
    if (version != 1) return fail("unsupported version " + std::to_string(version));
    auto number = [&](const char* key) {
        std::string k, v;
        if (!(in >> k >> v) || k != key) throw InputError(std::string("bad state file: expected ") + key);
        return v;
    };
    Snapshot snap;
    snap.graph_hash = std::strtoull(number("graph").c_str(), nullptr, 16);
    const std::size_t n = std::strtoull(number("n").c_str(), nullptr, 10);
    snap.damping = std::strtod(number("damping").c_str(), nullptr);
    snap.target_error = std::strtod(number("target_error").c_str(), nullptr);
    snap.state.diffusions = std::strtoull(number("diffusions").c_str(), nullptr, 10);
    snap.state.elementary_steps = std::strtoull(number("elementary_steps").c_str(), nullptr, 10);
    snap.state.r = std::strtod(number("r").c_str(), nullptr);
    snap.state.damping = snap.damping;
    snap.state.f.resize(n);
    snap.state.h.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::string f, h;
        if (!(in >> f >> h)) return fail("truncated vectors");
        snap.state.f[i] = std::strtod(f.c_str(), nullptr);
        snap.state.h[i] = std::strtod(h.c_str(), nullptr);
    }
    return snap;
}

int cmd_rank(const ExperimentSpec& spec, const std::string& save_state, std::ostream& log) {
    return guarded(log, [&] {
        if (spec.out_path.empty()) throw std::invalid_argument("rank needs --out");
        if (spec.solvers.size() > 1) throw std::invalid_argument("rank takes a single --solver");
        const SolverChoice choice = parse_solver(spec.solvers.empty() ? "diffusion" : spec.solvers.front(),
                                                 spec.scheduler);
        LoadedGraph lg = load_graph(spec);
        const SparseGraph& g = lg.graph;
        const DiffusionParams params = params_for(spec, g.size());
        const std::uint64_t budget = spec.budget ? spec.budget : 100 * std::max<std::uint64_t>(g.num_links(), 1);
        SolverRun r = run_solver(choice, g, params, spec, {}, budget);

        std::ofstream out = open_out(spec.out_path);
        write_ranks(g, r.rank, out);
        if (!spec.trace_path.empty()) {
            std::ofstream tr = open_out(spec.trace_path);
            r.trace.write_csv(tr);
        }
        if (!save_state.empty()) {
            if (!r.state) throw std::invalid_argument("--save-state needs the diffusion solver");
            std::ofstream st = open_out(save_state);
            write_snapshot({fingerprint(g), params.damping, params.target_error, *r.state}, st);
        }
        log << "solver=" << r.name << " nodes=" << g.size() << " links=" << g.num_links()
            << " dangling=" << g.dangling().size() << " elementary_steps=" << r.elementary_steps
            << " diffusions=" << r.iterations << " bound=" << fmt("%.6e", r.bound) << '\n';
        return kOk;
    });
}

int cmd_bench(const ExperimentSpec& spec, std::ostream& log) {
    return guarded(log, [&] {
        if (spec.solvers.size() < 2) throw std::invalid_argument("bench needs at least two --solver entries");
        if (spec.out_path.empty()) throw std::invalid_argument("bench needs --out DIR");
        std::vector<SolverChoice> choices;
        for (const std::string& s : spec.solvers) choices.push_back(parse_solver(s, spec.scheduler));
        LoadedGraph lg = load_graph(spec);
        const SparseGraph& g = lg.graph;
        const DiffusionParams params = params_for(spec, g.size());

        PowerIterResult ref = power_iterate(g, params, params.target_error / 100.0);
        if (!ref.converged) throw StarvationError("reference power iteration did not converge");

        std::filesystem::create_directories(spec.out_path);
        std::vector<SolverRun> runs(choices.size());
        std::uint64_t budget = spec.budget;
        // budget OPIC by the work the other solvers needed
        for (std::size_t k = 0; k < choices.size(); ++k) {
            if (choices[k].kind == SolverChoice::Kind::Opic) continue;
            runs[k] = run_solver(choices[k], g, params, spec, ref.rank, 0);
            if (!spec.budget) budget = std::max(budget, runs[k].elementary_steps);
        }
        if (budget == 0) budget = 100 * std::max<std::uint64_t>(g.num_links(), 1);
        for (std::size_t k = 0; k < choices.size(); ++k) {
            if (choices[k].kind == SolverChoice::Kind::Opic) runs[k] = run_solver(choices[k], g, params, spec, ref.rank, budget);
        }

        int decades = std::max(1, static_cast<int>(std::floor(-std::log10(params.target_error) + 1e-9)));
        std::ostringstream table;
        table << "solver,elementary_steps,final_error";
        for (int e = 1; e <= decades; ++e) table << ",steps_to_1e-" << e;
        table << '\n';
        for (const SolverRun& r : runs) {
            std::ofstream tr = open_out((std::filesystem::path(spec.out_path) / (r.name + ".csv")).string());
            r.trace.write_csv(tr);
            const double final_error = r.trace.back().true_error.value_or(l1_distance(r.rank, ref.rank));
            table << r.name << ',' << r.elementary_steps << ',' << fmt("%.6e", final_error);
            for (int e = 1; e <= decades; ++e) {
                auto steps = r.trace.steps_to_reach(std::pow(10.0, -e));
                table << ',';
                if (steps) table << *steps; else table << '-';
            }
            table << '\n';
        }
        std::ofstream summary = open_out((std::filesystem::path(spec.out_path) / "summary.csv").string());
        summary << table.str();
        log << "nodes=" << g.size() << " links=" << g.num_links() << " dangling=" << g.dangling().size()
            << " reference_iterations=" << ref.state.iterations << '\n'
            << table.str();
        return kOk;
    });
}

int cmd_generate(const ExperimentSpec& spec, const std::string& report_path, std::ostream& log) {
    return guarded(log, [&] {
        if (!spec.gen) throw std::invalid_argument("generate needs --gen");
        if (spec.out_path.empty()) throw std::invalid_argument("generate needs --out");
        Generated gen = generate(*spec.gen);
        std::ofstream out = open_out(spec.out_path);
        dump_edge_list(gen.graph, out);
        std::ostringstream report;
        report << "n=" << gen.graph.size() << " requested_links=" << gen.report.requested_links
               << " links=" << gen.report.links << " dangling=" << gen.report.dangling
               << " attempts=" << gen.report.attempts << " seed=" << gen.report.seed << '\n';
        if (!report_path.empty()) {
            std::ofstream rep = open_out(report_path);
            rep << report.str();
        }
        log << report.str();
        return kOk;
    });
}

int cmd_update(const ExperimentSpec& spec, const std::string& state_path, const std::string& delta_path, bool fresh,
               bool damping_given, std::ostream& log) {
    return guarded(log, [&] {
        if (spec.out_path.empty()) throw std::invalid_argument("update needs --out");
        if (state_path.empty() || delta_path.empty()) throw std::invalid_argument("update needs --state and --delta");
        LoadedGraph lg = load_graph(spec);
        const SparseGraph& g = lg.graph;
        std::ifstream st = open_in(state_path);
        Snapshot snap = read_snapshot(st);
        if (snap.graph_hash != fingerprint(g) || snap.state.f.size() != g.size())
            throw MismatchError("state file was written for a different graph");
        if (damping_given && spec.damping != snap.damping)
            throw MismatchError("--damping differs from the damping stored in the state");

        std::ifstream din = open_in(delta_path);
        GraphDelta delta;
        SparseGraph g2;
        try {
            delta = load_delta(din, g);
            g2 = apply_delta(g, delta);
        } catch (const GraphError& e) {
            throw MismatchError(std::string("delta does not apply: ") + e.what());
        }
        DiffusionParams params = DiffusionParams::uniform(g.size(), snap.damping, snap.target_error);
        ResumeOptions ro;
        ro.scheduler.seed = spec.seed;
        ro.trace_every = spec.trace_every;
        ResumeResult r = resume(snap.state, g, g2, params, spec.scheduler, ro);

        std::ofstream out = open_out(spec.out_path);
        write_ranks(g2, r.rank, out);
        if (!spec.trace_path.empty()) {
            std::ofstream tr = open_out(spec.trace_path);
            r.trace.write_csv(tr);
        }
        log << "added=" << delta.added.size() << " removed=" << delta.removed.size()
            << " changed_columns=" << delta_columns(g, g2).size() << " resume_elementary_steps=" << r.elementary_steps
            << " resume_diffusions=" << r.diffusions << " bound=" << fmt("%.6e", r.bound);
        if (fresh) {
            Scheduler sched(spec.scheduler, g2, SchedulerOptions{spec.seed});
            RunResult f = run(g2, params, sched);
            log << " fresh_elementary_steps=" << f.state.elementary_steps
                << " agreement=" << fmt("%.6e", l1_distance(r.rank, f.rank));
        }
        log << '\n';
        return kOk;
    });
}

int cmd_simulate(const ExperimentSpec& spec, std::size_t workers, std::size_t part_size, const std::string& policy,
                 std::ostream& log) {
    return guarded(log, [&] {
        if (spec.out_path.empty()) throw std::invalid_argument("simulate needs --out");
        LoadedGraph lg = load_graph(spec);
        const SparseGraph& g = lg.graph;
        const DiffusionParams params = params_for(spec, g.size());
        if (part_size == 0) {
            if (workers == 0 || workers > g.size()) throw std::invalid_argument("--workers must lie in [1, N]");
            part_size = (g.size() + workers - 1) / workers;
        }
        SimOptions so;
        so.seed = spec.seed;
        if (policy == "fifo") so.policy = Interleaving::Fifo;
        else if (policy == "random") so.policy = Interleaving::RandomDelay;
        else throw std::invalid_argument("unknown policy '" + policy + "'");
        auto parts = partition(g, params, part_size);
        const std::size_t count = parts.size();
        SimResult r = simulate(g, params, std::move(parts), so);
        std::ofstream out = open_out(spec.out_path);
        write_ranks(g, r.rank, out);
        if (!spec.trace_path.empty()) {
            std::ofstream tr = open_out(spec.trace_path);
            write_step_log(r.log, tr);
        }
        log << "workers=" << count << " events=" << r.events << " diffusions=" << r.sequence.size()
            << " messages=" << r.messages << " bound=" << fmt("%.6e", r.residual / (1.0 - params.damping)) << '\n';
        return kOk;
    });
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"fluidrank: PageRank by fluid diffusion"};
    app.require_subcommand(1);
    ExperimentSpec spec;
    std::string gen_text;
    std::string format = "auto";
    std::string scheduler = "max";
    std::string solver;
    std::string save_state, report_path, state_path, delta_path, policy = "random";
    std::size_t workers = 4, part_size = 0;
    bool fresh = false;
    CLI::Option* damping_opt = nullptr;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--graph", spec.graph_path, "edge list file");
        sub->add_option("--format", format, "edge list format")->check(CLI::IsMember({"auto", "plain", "prefixed"}));
        sub->add_option("--gen", gen_text, "generator config n=...,l=...,alpha=...,perms=...");
        auto* d = sub->add_option("--damping", spec.damping, "damping factor d");
        if (sub->get_name() == "update") damping_opt = d;
        sub->add_option("--target-error", spec.target_error, "stopping threshold on R/(1-d)");
        sub->add_option("--scheduler", scheduler, "node selection")
            ->check(CLI::IsMember({"max", "rand", "per", "sweep", "op", "op2"}));
        sub->add_option("--seed", spec.seed, "random seed");
        sub->add_option("--trace", spec.trace_path, "trace CSV output");
        sub->add_option("--trace-every", spec.trace_every, "trace sampling cadence");
        sub->add_option("--out", spec.out_path, "output path");
    };

    auto* rank = app.add_subcommand("rank", "compute ranks with one solver");
    common(rank);
    rank->add_option("--solver", solver, "diffusion[:sched] | mat-iter | opic[:sched]");
    rank->add_option("--budget", spec.budget, "OPIC elementary-step budget");
    rank->add_option("--save-state", save_state, "write the final diffusion state");

    auto* bench = app.add_subcommand("bench", "compare solvers against a tight reference");
    common(bench);
    bench->add_option("--solver", spec.solvers, "solver (repeat)")->take_all();
    bench->add_option("--budget", spec.budget, "OPIC elementary-step budget");

    auto* gen = app.add_subcommand("generate", "generate a power-law graph");
    common(gen);
    gen->add_option("--report", report_path, "write the generation report");

    auto* upd = app.add_subcommand("update", "resume a saved run after graph edits");
    common(upd);
    upd->add_option("--state", state_path, "state written by rank --save-state");
    upd->add_option("--delta", delta_path, "edit file with '+ src dst' / '- src dst' lines");
    upd->add_flag("--fresh", fresh, "also solve from scratch and report agreement");

    auto* sim = app.add_subcommand("simulate", "asynchronous multi-worker simulation");
    common(sim);
    sim->add_option("--workers", workers, "number of workers");
    sim->add_option("--partition-size", part_size, "nodes per worker (overrides --workers)");
    sim->add_option("--policy", policy, "interleaving")->check(CLI::IsMember({"fifo", "random"}));

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        spec.format = format == "plain" ? EdgeFormat::Plain : format == "prefixed" ? EdgeFormat::Prefixed : EdgeFormat::Auto;
        spec.scheduler = *parse_scheduler(scheduler);
        if (!gen_text.empty()) {
            spec.gen = GenConfig::parse(gen_text);
            if (gen_text.find("seed=") == std::string::npos) spec.gen->seed = spec.seed;
        }
        if (!solver.empty()) spec.solvers = {solver};
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    if (rank->parsed()) return cmd_rank(spec, save_state, out);
    if (bench->parsed()) return cmd_bench(spec, out);
    if (gen->parsed()) return cmd_generate(spec, report_path, out);
    if (upd->parsed()) return cmd_update(spec, state_path, delta_path, fresh, damping_opt && damping_opt->count() > 0, out);
    if (sim->parsed()) return cmd_simulate(spec, workers, part_size, policy, out);
    return kUsage;
}

}  // namespace fluidrank::cli
