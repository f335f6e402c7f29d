#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sharp/bench.hpp"
#include "sharp/features.hpp"
#include "sharp/graph.hpp"
#include "sharp/model_gen.hpp"
#include "sharp/model_io.hpp"
#include "sharp/oracle.hpp"
#include "sharp/report.hpp"

namespace fs = std::filesystem;
using namespace sharp;

namespace {

struct ModelArgs {
    std::string model;
    std::string features;
    std::string gen;
    std::string objective;
    std::string goal;
};

struct EngineArgs {
    std::string engine = "sharp";
    bool pre = false;
    std::string partition = "grid:8x8";
    std::size_t depth = 1;
    std::optional<double> theta;
    double epsilon = 1e-6;
    std::optional<double> eta_thr;
    double beta = 1e-6;
    double unsolved_cost = 1e6;
    std::string spread = "absolute";
    std::size_t max_local_iters = 0;
    std::size_t max_passes = 10'000;
    bool parallel_leaves = false;
};

struct Loaded {
    Mdp mdp;
    StateFeatures features;
    Objective objective;
};

void add_model_options(CLI::App* cmd, ModelArgs& a, bool allow_gen) {
    cmd->add_option("--model", a.model, "Model file in the explicit format");
    cmd->add_option("--features", a.features, "Feature sidecar (defaults to <model>.features when present)");
    if (allow_gen) cmd->add_option("--gen", a.gen, "Generator string, e.g. warehouse:n=64:layout=nw:variant=rmin");
    cmd->add_option("--objective", a.objective, "pmax or rmin")->check(CLI::IsMember({"pmax", "rmin"}));
    cmd->add_option("--goal", a.goal, "Goal label");
}

void add_engine_options(CLI::App* cmd, EngineArgs& e) {
    cmd->add_option("--engine", e.engine, "flat-vi, flat-gs or sharp")
        ->check(CLI::IsMember({"flat-vi", "flat-gs", "sharp"}));
    cmd->add_flag("--pre,!--nopre", e.pre, "Graph precomputation before flat iteration");
    cmd->add_option("--partition", e.partition, "grid:<nx>x<ny>, scc, or counter:<feature>:<width>");
    cmd->add_option("--depth", e.depth, "Maximum hierarchy depth D");
    cmd->add_option("--theta", e.theta, "Refinement threshold");
    cmd->add_option("--epsilon", e.epsilon, "Convergence tolerance");
    cmd->add_option("--eta-thr", e.eta_thr, "Boundary change threshold");
    cmd->add_option("--beta", e.beta, "Stabiliser for normalized spread");
    cmd->add_option("--unsolved-cost", e.unsolved_cost, "RMin boundary value of states not yet solved");
    cmd->add_option("--spread", e.spread, "absolute or normalized")->check(CLI::IsMember({"absolute", "normalized"}));
    cmd->add_option("--max-local-iters", e.max_local_iters, "Cap on sweeps per local solve (0 = none)");
    cmd->add_option("--max-passes", e.max_passes, "Cap on SHARP passes");
    cmd->add_flag("--parallel-leaves", e.parallel_leaves, "Solve the leaves of a pass concurrently");
}

std::string features_path_for(const std::string& model) {
    return fs::path(model).replace_extension(".features").string();
}

Loaded load(const ModelArgs& a) {
    if (a.model.empty() == a.gen.empty()) throw std::invalid_argument("give exactly one of --model and --gen");
    Loaded out;
    if (!a.gen.empty()) {
        auto g = generate_from_string(a.gen);
        out.mdp = std::move(g.mdp);
        out.features = std::move(g.features);
        out.objective = g.objective;
    } else {
        out.mdp = load_model(a.model);
        std::string fpath = a.features.empty() ? features_path_for(a.model) : a.features;
        if (!a.features.empty() || fs::exists(fpath)) {
            std::ifstream in(fpath);
            if (!in) throw std::runtime_error("cannot read features file '" + fpath + "'");
            out.features = read_features(in, out.mdp.num_states());
        } else {
            out.features = StateFeatures(out.mdp.num_states());
        }
        if (a.objective.empty()) throw std::invalid_argument("--objective is required with --model");
    }
    if (!a.objective.empty()) out.objective.kind = parse_objective_kind(a.objective);
    if (!a.goal.empty()) out.objective.goal_label = a.goal;
    return out;
}

EngineConfig engine_config(const EngineArgs& e) {
    EngineConfig c;
    c.engine = parse_engine(e.engine);
    c.epsilon = e.epsilon;
    c.precomputation = e.pre;
    c.theta = e.theta;
    c.sharp.strategy = PartitionStrategy::parse(e.partition);
    c.sharp.max_depth = e.depth;
    c.sharp.eta_thr = e.eta_thr;
    c.sharp.beta = e.beta;
    c.sharp.unsolved_cost = e.unsolved_cost;
    c.sharp.spread_mode = parse_spread_mode(e.spread);
    c.sharp.max_local_iters = e.max_local_iters;
    c.sharp.max_passes = e.max_passes;
    c.sharp.parallel = e.parallel_leaves;
    return c;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
    return out;
}

int run_gen(const std::string& kind, const WarehouseSpec& ws, const ArenaSpec& as, const std::string& out_path) {
    GeneratedModel g = kind == "warehouse" ? generate_warehouse(ws) : generate_arenas(as);
    auto out = open_out(out_path);
    serialize_model(g.mdp, out);
    auto fout = open_out(features_path_for(out_path));
    write_features(g.features, fout);
    std::cout << "states " << g.mdp.num_states() << " choices " << g.mdp.num_choices() << " transitions "
              << g.mdp.num_transitions() << '\n';
    return 0;
}

int run_solve(const ModelArgs& ma, const EngineArgs& ea, std::size_t repeats, const std::string& out_dir,
              bool timings) {
    Loaded m = load(ma);
    const EngineConfig config = engine_config(ea);
    if (repeats < 1) throw std::invalid_argument("--repeats must be at least 1");
    SolveReport report;
    std::vector<double> times;
    for (std::size_t r = 0; r < repeats; ++r) {
        report = run_engine(m.mdp, m.features, m.objective, config);
        times.push_back(report.seconds);
    }
    fs::create_directories(out_dir);
    {
        auto out = open_out(fs::path(out_dir) / "values.csv");
        write_values_csv(out, report.values);
    }
    {
        auto out = open_out(fs::path(out_dir) / "policy.csv");
        write_policy_csv(out, report.policy);
    }
    auto j = report_to_json(report, m.mdp, timings);
    j["engine"] = ea.engine;
    j["objective"] = to_string(m.objective.kind);
    j["goal"] = m.objective.goal_label;
    if (timings) j["repeat_seconds"] = times;
    {
        auto out = open_out(fs::path(out_dir) / "report.json");
        out << j.dump(2) << '\n';
    }
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    std::cout << "value(" << m.mdp.initial() << ") = " << format_value(report.values[m.mdp.initial()])
              << (report.converged ? "" : " (not converged)") << '\n';
    return report.converged ? 0 : 2;
}

int run_bench(const std::string& suite_path, bool full, bool parallel, const std::string& out_dir) {
    Suite suite;
    if (suite_path.empty()) {
        suite = builtin_suite(full);
    } else {
        std::ifstream in(suite_path);
        if (!in) throw std::runtime_error("cannot read suite '" + suite_path + "'");
        suite = parse_suite(nlohmann::json::parse(in));
    }
    const auto rows = run_suite(suite, parallel);
    fs::create_directories(out_dir);
    {
        auto out = open_out(fs::path(out_dir) / "bench.csv");
        write_bench_csv(out, rows);
    }
    {
        auto out = open_out(fs::path(out_dir) / "gap.csv");
        write_gap_csv(out, rows, suite.reference);
    }
    std::size_t failed = 0;
    for (const auto& r : rows) {
        if (!r.error.empty()) ++failed;
        std::cout << r.instance << ' ' << to_string(r.config.engine) << ' '
                  << (r.error.empty() ? format_value(r.value) : "failed: " + r.error) << '\n';
    }
    std::cout << rows.size() << " rows, " << failed << " failed\n";
    return failed == 0 ? 0 : 2;
}

int run_oracle(const ModelArgs& ma, const std::string& out_path) {
    Loaded m = load(ma);
    const auto res = enumerate_policies(m.mdp, m.objective);
    std::ofstream file;
    if (!out_path.empty()) file = open_out(out_path);
    std::ostream& out = out_path.empty() ? std::cout : file;
    out << "state,value,optimal_actions\n";
    for (std::size_t s = 0; s < res.values.size(); ++s) {
        out << s << ',' << format_value(res.values[s]) << ',';
        for (std::size_t i = 0; i < res.optimal_actions[s].size(); ++i) {
            if (i) out << ';';
            out << res.optimal_actions[s][i];
        }
        out << '\n';
    }
    std::cerr << res.enumeration_count << " policies enumerated\n";
    return 0;
}

int run_validate(const ModelArgs& ma) {
    Loaded m = load(ma);
    std::cout << "states " << m.mdp.num_states() << " choices " << m.mdp.num_choices() << " transitions "
              << m.mdp.num_transitions() << '\n';
    const auto check = check_ssp_assumptions(m.mdp, m.objective);
    for (const auto& v : check.violations) std::cout << "state " << v.state << ": " << v.reason << '\n';
    if (check.alpha) std::cout << "alpha " << format_value(*check.alpha) << '\n';
    std::cout << (check.ok ? "ok" : "assumptions violated") << '\n';
    return check.ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Explicit-state MDP solver with hierarchical partitioning"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "Generate a benchmark model");
    std::string gen_kind;
    std::string gen_out;
    WarehouseSpec ws;
    ArenaSpec as;
    std::string layout = "nw";
    std::string variant = "rmin";
    gen->add_option("kind", gen_kind, "warehouse or arenas")->required()->check(CLI::IsMember({"warehouse", "arenas"}));
    gen->add_option("--n", ws.n, "Warehouse side length");
    gen->add_option("--layout", layout, "nw, sw, mw or randmw");
    gen->add_option("--variant", variant, "pmax or rmin")->check(CLI::IsMember({"pmax", "rmin"}));
    gen->add_option("--p-succ", ws.p_succ);
    gen->add_option("--p-fail", ws.p_fail);
    gen->add_option("--p-move", ws.p_move);
    gen->add_option("--walls", ws.wall_count, "Wall count for randmw");
    gen->add_option("--k", as.k, "Number of arenas");
    gen->add_option("--size", as.arena_size, "States per arena");
    std::uint64_t seed = 0;
    gen->add_option("--seed", seed);
    gen->add_option("--out", gen_out, "Output model path")->required();

    auto* solve = app.add_subcommand("solve", "Solve a model with one engine");
    ModelArgs solve_model;
    EngineArgs solve_engine;
    std::size_t repeats = 1;
    std::string solve_out = ".";
    bool timings = false;
    add_model_options(solve, solve_model, true);
    add_engine_options(solve, solve_engine);
    solve->add_option("--seed", seed, "Accepted for symmetry; solving is deterministic");
    solve->add_option("--repeats", repeats, "Number of timed repeats");
    solve->add_option("--out", solve_out, "Output directory");
    solve->add_flag("--timings", timings, "Include timings in report.json");

    auto* bench = app.add_subcommand("bench", "Run a benchmark suite");
    std::string suite_path;
    std::string bench_out = ".";
    bool full = false;
    bool parallel = false;
    bench->add_option("--suite", suite_path, "Suite JSON file (default: built-in suite)");
    bench->add_flag("--full", full, "Add the 512 and 1024 instances to the built-in suite");
    bench->add_flag("--parallel", parallel, "Run suite members concurrently");
    bench->add_option("--out", bench_out, "Output directory");

    auto* oracle = app.add_subcommand("oracle", "Brute-force optimum of a tiny model");
    ModelArgs oracle_model;
    std::string oracle_out;
    add_model_options(oracle, oracle_model, true);
    oracle->add_option("--out", oracle_out, "CSV path (default: standard output)");

    auto* validate = app.add_subcommand("validate", "Check a model and its SSP assumptions");
    ModelArgs validate_model;
    add_model_options(validate, validate_model, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            ws.layout = parse_layout(layout);
            ws.variant = variant == "pmax" ? WarehouseVariant::PMax : WarehouseVariant::RMin;
            ws.seed = seed;
            as.seed = seed;
            return run_gen(gen_kind, ws, as, gen_out);
        }
        if (*solve) return run_solve(solve_model, solve_engine, repeats, solve_out, timings);
        if (*bench) return run_bench(suite_path, full, parallel, bench_out);
        if (*oracle) return run_oracle(oracle_model, oracle_out);
        if (*validate) return run_validate(validate_model);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
