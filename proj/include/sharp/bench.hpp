#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "sharp/flat_solver.hpp"
#include "sharp/model_gen.hpp"
#include "sharp/report.hpp"
#include "sharp/sharp.hpp"

namespace sharp {

enum class EngineKind { FlatVI, FlatGS, Sharp };

inline std::string to_string(EngineKind e) {
    switch (e) {
        case EngineKind::FlatVI: return "flat-vi";
        case EngineKind::FlatGS: return "flat-gs";
        case EngineKind::Sharp: return "sharp";
    }
    return "?";
}

inline EngineKind parse_engine(const std::string& text) {
    if (text == "flat-vi") return EngineKind::FlatVI;
    if (text == "flat-gs") return EngineKind::FlatGS;
    if (text == "sharp") return EngineKind::Sharp;
    throw std::invalid_argument("unknown engine '" + text + "' (expected flat-vi, flat-gs or sharp)");
}

/// Default refinement threshold when none is given: 0.5 for probabilities, 200 for costs.
inline double default_theta(const Objective& objective) {
    return objective.kind == ObjectiveKind::PMax ? 0.5 : 200.0;
}

struct EngineConfig {
    EngineKind engine = EngineKind::Sharp;
    double epsilon = 1e-6;
    bool precomputation = false;
    SharpConfig sharp;
    /// Unset means `default_theta` of the objective being solved.
    std::optional<double> theta;
};

/// Runs one engine. The reported time covers the solve only.
inline SolveReport run_engine(const Mdp& mdp, const StateFeatures& features, const Objective& objective,
                              const EngineConfig& config) {
    if (config.engine == EngineKind::Sharp) {
        SharpConfig sc = config.sharp;
        sc.epsilon = config.epsilon;
        sc.theta = config.theta.value_or(default_theta(objective));
        return sharp_solve(mdp, objective, features, sc);
    }
    SolverConfig fc;
    fc.epsilon = config.epsilon;
    fc.use_precomputation = config.precomputation;
    fc.method = config.engine == EngineKind::FlatGS ? IterationMethod::GaussSeidel : IterationMethod::SyncVI;
    const auto started = std::chrono::steady_clock::now();
    auto flat = value_iteration(mdp, objective, fc);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return flat_report(mdp, objective, std::move(flat), seconds);
}

inline constexpr int kBenchSchemaVersion = 1;

struct BenchRow {
    std::string instance;
    std::string objective;
    EngineConfig config;
    std::size_t repeats = 1;
    double time_mean = 0.0;
    std::optional<double> time_std;
    double peak_rss_mb = 0.0;
    double value = 0.0;
    std::size_t leaves = 0;
    std::size_t refinements = 0;
    double eta = 0.0;
    double residual = 0.0;
    bool converged = false;
    bool timing_reliable = true;
    /// Empty on success, otherwise the failure message.
    std::string error;
};

struct SuiteInstance {
    std::string generator;
    /// Overrides the generator's own objective.
    std::optional<Objective> objective;
    /// Replaces the suite-wide engine list for this instance when nonempty.
    std::vector<EngineConfig> engines;
};

struct Suite {
    std::vector<SuiteInstance> instances;
    std::vector<EngineConfig> engines;
    std::size_t repeats = 1;
    EngineKind reference = EngineKind::FlatVI;
};

/// Peak resident set of this process in MB, from /proc; 0 where unavailable.
inline double peak_rss_mb() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmHWM:", 0) == 0) return std::stod(line.substr(6)) / 1024.0;
    }
    return 0.0;
}

inline EngineConfig parse_engine_config(const nlohmann::json& j) {
    EngineConfig c;
    c.engine = parse_engine(j.value("engine", "sharp"));
    c.epsilon = j.value("epsilon", c.epsilon);
    c.precomputation = j.value("pre", c.precomputation);
    if (j.contains("theta")) c.theta = j.at("theta").get<double>();
    if (j.contains("partition")) c.sharp.strategy = PartitionStrategy::parse(j.at("partition").get<std::string>());
    c.sharp.max_depth = j.value("depth", c.sharp.max_depth);
    if (j.contains("eta_thr")) c.sharp.eta_thr = j.at("eta_thr").get<double>();
    c.sharp.beta = j.value("beta", c.sharp.beta);
    c.sharp.unsolved_cost = j.value("unsolved_cost", c.sharp.unsolved_cost);
    if (j.contains("spread")) c.sharp.spread_mode = parse_spread_mode(j.at("spread").get<std::string>());
    c.sharp.max_local_iters = j.value("max_local_iters", c.sharp.max_local_iters);
    c.sharp.max_passes = j.value("max_passes", c.sharp.max_passes);
    if (j.contains("uncertainty_filter")) c.sharp.uncertainty_filter = j.at("uncertainty_filter").get<bool>();
    return c;
}

/// Suite file layout:
/// {"repeats": 1, "reference": "flat-vi",
///  "engines": [{"engine": "sharp", "partition": "grid:8x8", "depth": 1}, ...],
///  "instances": [{"gen": "warehouse:n=64:layout=nw:variant=rmin",
///                 "objective": "rmin", "goal": "goal", "engines": [...]}, ...]}
inline Suite parse_suite(const nlohmann::json& j) {
    Suite suite;
    suite.repeats = j.value("repeats", std::size_t{1});
    if (suite.repeats < 1) throw std::invalid_argument("repeats must be at least 1");
    suite.reference = parse_engine(j.value("reference", "flat-vi"));
    for (const auto& e : j.value("engines", nlohmann::json::array())) suite.engines.push_back(parse_engine_config(e));
    for (const auto& i : j.at("instances")) {
        SuiteInstance inst;
        inst.generator = i.at("gen").get<std::string>();
        if (i.contains("objective") || i.contains("goal")) {
            Objective o;
            o.kind = parse_objective_kind(i.value("objective", "pmax"));
            o.goal_label = i.value("goal", "goal");
            inst.objective = o;
        }
        for (const auto& e : i.value("engines", nlohmann::json::array())) inst.engines.push_back(parse_engine_config(e));
        suite.instances.push_back(std::move(inst));
    }
    return suite;
}

inline EngineConfig sharp_engine(const std::string& partition, std::size_t depth) {
    EngineConfig c;
    c.sharp.strategy = PartitionStrategy::parse(partition);
    c.sharp.max_depth = depth;
    return c;
}

/// Warehouses NW/SW/MW at n in {64, 128, 256} under both objectives plus arenas
/// k in {2, 4}. `full` adds the 512 and 1024 instances.
inline Suite builtin_suite(bool full) {
    Suite suite;
    EngineConfig vi;
    vi.engine = EngineKind::FlatVI;
    EngineConfig gs;
    gs.engine = EngineKind::FlatGS;
    suite.engines = {vi, gs, sharp_engine("grid:8x8", 1), sharp_engine("grid:8x8", 2)};

    std::vector<std::size_t> sizes{64, 128, 256};
    if (full) sizes.push_back(512);
    for (std::size_t n : sizes) {
        for (const char* layout : {"nw", "sw", "mw"}) {
            for (const char* variant : {"pmax", "rmin"}) {
                suite.instances.push_back({"warehouse:n=" + std::to_string(n) + ":layout=" + layout + ":variant=" + variant,
                                           std::nullopt, {}});
            }
        }
    }
    if (full) {
        suite.instances.push_back({"warehouse:n=1024:layout=nw:variant=pmax:p_succ=0.8", std::nullopt, {}});
        suite.instances.push_back({"warehouse:n=1024:layout=nw:variant=pmax", std::nullopt, {}});
    }
    for (std::size_t k : {2, 4}) {
        SuiteInstance inst{"arenas:k=" + std::to_string(k) + ":size=16:seed=1", std::nullopt, {}};
        inst.engines = {vi, gs, sharp_engine("scc", 1), sharp_engine("scc", 2), sharp_engine("counter:arena:1", 1)};
        suite.instances.push_back(std::move(inst));
    }
    return suite;
}

namespace detail {

inline BenchRow run_member(const GeneratedModel& model, const Objective& objective, const std::string& instance,
                           const EngineConfig& config, std::size_t repeats) {
    BenchRow row;
    row.instance = instance;
    row.objective = to_string(objective.kind);
    row.config = config;
    row.repeats = repeats;
    try {
        std::vector<double> times;
        SolveReport last;
        for (std::size_t r = 0; r < repeats; ++r) {
            last = run_engine(model.mdp, model.features, objective, config);
            times.push_back(last.seconds);
        }
        double sum = 0.0;
        for (double t : times) sum += t;
        row.time_mean = sum / static_cast<double>(times.size());
        if (times.size() >= 2) {
            double sq = 0.0;
            for (double t : times) sq += (t - row.time_mean) * (t - row.time_mean);
            row.time_std = std::sqrt(sq / static_cast<double>(times.size() - 1));
        }
        row.value = last.values.at(model.mdp.initial());
        row.leaves = last.leaves;
        row.refinements = last.refinement_count;
        row.eta = last.eta_measured;
        row.residual = last.global_residual;
        row.converged = last.converged;
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    row.peak_rss_mb = peak_rss_mb();
    return row;
}

}  // namespace detail

/// Runs every instance against its engines. Members run one after another unless
/// `parallel`, in which case timings are marked unreliable.
inline std::vector<BenchRow> run_suite(const Suite& suite, bool parallel = false) {
    std::vector<BenchRow> rows;
    for (const auto& inst : suite.instances) {
        const auto& engines = inst.engines.empty() ? suite.engines : inst.engines;
        std::optional<GeneratedModel> model;
        std::string gen_error;
        try {
            model = generate_from_string(inst.generator);
        } catch (const std::exception& e) {
            gen_error = e.what();
        }
        if (!model) {
            for (const auto& e : engines) {
                BenchRow row;
                row.instance = inst.generator;
                row.config = e;
                row.repeats = suite.repeats;
                row.error = gen_error;
                rows.push_back(std::move(row));
            }
            continue;
        }
        const Objective objective = inst.objective.value_or(model->objective);
        if (!parallel) {
            for (const auto& e : engines)
                rows.push_back(detail::run_member(*model, objective, inst.generator, e, suite.repeats));
            continue;
        }
        std::vector<std::future<BenchRow>> jobs;
        for (const auto& e : engines) {
            jobs.push_back(std::async(std::launch::async, [&, e] {
                return detail::run_member(*model, objective, inst.generator, e, suite.repeats);
            }));
        }
        for (auto& j : jobs) {
            rows.push_back(j.get());
            rows.back().timing_reliable = false;
        }
    }
    return rows;
}

namespace detail {

inline std::string csv_field(const std::string& text) {
    if (text.find_first_of(",\"\n") == std::string::npos) return text;
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

}  // namespace detail

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
    out << "schema,instance,objective,engine,partition,depth,theta,epsilon,eta_thr,spread,repeats,time_mean,time_std,"
           "timing_reliable,peak_rss_mb,value,leaves,refinements,eta,residual,converged,status\n";
    for (const auto& r : rows) {
        const bool sh = r.config.engine == EngineKind::Sharp;
        out << kBenchSchemaVersion << ',' << detail::csv_field(r.instance) << ',' << r.objective << ','
            << to_string(r.config.engine) << ',';
        if (sh) {
            out << r.config.sharp.strategy.to_string() << ',' << r.config.sharp.max_depth << ',';
            if (r.config.theta) out << format_value(*r.config.theta);
            out << ',' << format_value(r.config.epsilon) << ',';
            if (r.config.sharp.eta_thr) out << format_value(*r.config.sharp.eta_thr);
            out << ',' << to_string(r.config.sharp.spread_mode) << ',';
        } else {
            out << ",,," << format_value(r.config.epsilon) << ",,,";
        }
        out << r.repeats << ',' << r.time_mean << ',';
        if (r.time_std) out << *r.time_std;
        out << ',' << (r.timing_reliable ? 1 : 0) << ',' << r.peak_rss_mb << ',';
        if (r.error.empty()) {
            out << format_value(r.value) << ',' << r.leaves << ',' << r.refinements << ',' << format_value(r.eta) << ','
                << format_value(r.residual) << ',' << (r.converged ? 1 : 0) << ",ok\n";
        } else {
            out << ",,,,,0," << detail::csv_field("failed: " + r.error) << '\n';
        }
    }
}

/// One line per non-reference row: |value - value of the instance's first
/// successful reference-engine row|.
inline void write_gap_csv(std::ostream& out, const std::vector<BenchRow>& rows, EngineKind reference) {
    out << "schema,instance,objective,engine,partition,depth,eta_thr,value,reference_value,gap\n";
    for (const auto& r : rows) {
        if (!r.error.empty()) continue;
        const BenchRow* ref = nullptr;
        for (const auto& c : rows) {
            if (c.instance == r.instance && c.config.engine == reference && c.error.empty()) {
                ref = &c;
                break;
            }
        }
        if (!ref || ref == &r) continue;
        const double gap = r.value == ref->value ? 0.0 : std::abs(r.value - ref->value);
        const bool sh = r.config.engine == EngineKind::Sharp;
        out << kBenchSchemaVersion << ',' << detail::csv_field(r.instance) << ',' << r.objective << ','
            << to_string(r.config.engine) << ',';
        if (sh) {
            out << r.config.sharp.strategy.to_string() << ',' << r.config.sharp.max_depth << ',';
            if (r.config.sharp.eta_thr) out << format_value(*r.config.sharp.eta_thr);
        } else {
            out << ",,";
        }
        out << ',' << format_value(r.value) << ',' << format_value(ref->value) << ',' << format_value(gap) << '\n';
    }
}

}  // namespace sharp
