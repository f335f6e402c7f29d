#include <gtest/gtest.h>

#include <sstream>

#include "sharp/bench.hpp"
#include "sharp/report.hpp"
#include "test_util.hpp"

using namespace sharp;

namespace {

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

Suite small_suite(std::size_t repeats) {
    return parse_suite(nlohmann::json::parse(R"({
        "repeats": )" + std::to_string(repeats) + R"(,
        "engines": [{"engine": "flat-vi"}, {"engine": "flat-gs"},
                    {"engine": "sharp", "partition": "grid:4x4", "depth": 2}],
        "instances": [{"gen": "warehouse:n=16:layout=sw:variant=rmin"},
                      {"gen": "warehouse:n=16:layout=mw:variant=pmax"},
                      {"gen": "arenas:k=2:size=4", "engines": [{"engine": "flat-vi"},
                                                               {"engine": "sharp", "partition": "scc"}]}]
    })"));
}

}  // namespace

TEST(Engine, ParseAndPrint) {
    for (const char* e : {"flat-vi", "flat-gs", "sharp"}) EXPECT_EQ(to_string(parse_engine(e)), e);
    EXPECT_THROW(parse_engine("prism"), std::invalid_argument);
    EXPECT_EQ(default_theta(fixtures::pmax()), 0.5);
    EXPECT_EQ(default_theta(fixtures::rmin()), 200.0);
}

TEST(Engine, AllEnginesAgreeOnSmallGrid) {
    const auto g = generate_warehouse({.n = 16, .layout = WarehouseLayout::SW});
    std::vector<SolveReport> out;
    for (const char* name : {"flat-vi", "flat-gs", "sharp"}) {
        EngineConfig c;
        c.engine = parse_engine(name);
        c.sharp.strategy = PartitionStrategy::grid(4, 4);
        out.push_back(run_engine(g.mdp, g.features, g.objective, c));
        EXPECT_TRUE(out.back().converged) << name;
    }
    EXPECT_LE(fixtures::sup_diff(out[0].values, out[1].values), 1e-3);
    EXPECT_LE(fixtures::sup_diff(out[0].values, out[2].values), 1e-3);
    EXPECT_EQ(out[0].leaves, 1u);
}

TEST(Suite, ParseRejectsBadInput) {
    EXPECT_THROW(parse_suite(nlohmann::json::parse(R"({"repeats": 0, "instances": []})")), std::invalid_argument);
    EXPECT_THROW(parse_suite(nlohmann::json::parse(R"({"engines": []})")), std::exception);
    EXPECT_THROW(parse_suite(nlohmann::json::parse(R"({"instances": [], "engines": [{"engine": "x"}]})")),
                 std::invalid_argument);
    const auto s = parse_suite(nlohmann::json::parse(
        R"({"instances": [{"gen": "warehouse:n=4", "objective": "pmax", "goal": "goal"}],
            "engines": [{"engine": "sharp", "partition": "grid:2x2", "depth": 3, "theta": 0.2, "eta_thr": 0.01,
                         "spread": "normalized", "max_local_iters": 300, "unsolved_cost": 0}]})"));
    ASSERT_EQ(s.engines.size(), 1u);
    EXPECT_EQ(s.engines[0].sharp.max_depth, 3u);
    EXPECT_EQ(*s.engines[0].theta, 0.2);
    EXPECT_EQ(*s.engines[0].sharp.eta_thr, 0.01);
    EXPECT_EQ(s.engines[0].sharp.spread_mode, SpreadMode::Normalized);
    EXPECT_EQ(s.engines[0].sharp.max_local_iters, 300u);
    EXPECT_EQ(s.engines[0].sharp.unsolved_cost, 0.0);
    EXPECT_EQ(s.instances[0].objective->kind, ObjectiveKind::PMax);
}

TEST(Suite, RepeatsGiveStatistics) {
    const auto rows = run_suite(small_suite(2));
    ASSERT_EQ(rows.size(), 8u);
    for (const auto& r : rows) {
        EXPECT_TRUE(r.error.empty()) << r.error;
        ASSERT_TRUE(r.time_std) << r.instance;
        EXPECT_GE(*r.time_std, 0.0);
        EXPECT_LE(*r.time_std, r.time_mean * 2.0 + 1e-3);
    }
    for (const auto& r : run_suite(small_suite(1))) EXPECT_FALSE(r.time_std);
}

TEST(Suite, DeterministicResultColumns) {
    const auto a = run_suite(small_suite(1));
    const auto b = run_suite(small_suite(1));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].value, b[i].value);
        EXPECT_EQ(a[i].leaves, b[i].leaves);
        EXPECT_EQ(a[i].refinements, b[i].refinements);
        EXPECT_EQ(a[i].eta, b[i].eta);
        EXPECT_EQ(a[i].residual, b[i].residual);
        EXPECT_EQ(a[i].converged, b[i].converged);
    }
}

TEST(Suite, ParallelMarksTimingsUnreliable) {
    const auto seq = run_suite(small_suite(1));
    const auto par = run_suite(small_suite(1), true);
    ASSERT_EQ(seq.size(), par.size());
    for (std::size_t i = 0; i < seq.size(); ++i) {
        EXPECT_FALSE(par[i].timing_reliable);
        EXPECT_EQ(seq[i].value, par[i].value);
    }
}

TEST(Suite, FailingMemberDoesNotAbort) {
    auto suite = small_suite(1);
    suite.instances.insert(suite.instances.begin(), SuiteInstance{"warehouse:n=1", std::nullopt, {}});
    EngineConfig bad;
    bad.sharp.strategy = PartitionStrategy::counter("nope", 2);
    suite.instances.push_back({"warehouse:n=8", std::nullopt, {bad}});
    const auto rows = run_suite(suite);
    ASSERT_EQ(rows.size(), 3u + 8u + 1u);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_FALSE(rows[i].error.empty());
    EXPECT_FALSE(rows.back().error.empty());
    EXPECT_TRUE(rows[3].error.empty());

    std::ostringstream csv;
    write_bench_csv(csv, rows);
    const auto ls = lines(csv.str());
    ASSERT_EQ(ls.size(), rows.size() + 1);
    EXPECT_NE(ls[1].find("failed:"), std::string::npos);
}

TEST(Csv, HeadersAndShape) {
    const auto rows = run_suite(small_suite(1));
    std::ostringstream bench;
    write_bench_csv(bench, rows);
    const auto bl = lines(bench.str());
    ASSERT_EQ(bl.size(), rows.size() + 1);
    EXPECT_EQ(bl[0].rfind("schema,instance,objective,engine,", 0), 0u);
    const std::size_t width = fields(bl[0]).size();
    for (const auto& l : bl) {
        EXPECT_EQ(fields(l).size(), width) << l;
        if (&l != &bl[0]) {
            EXPECT_EQ(fields(l)[0], std::to_string(kBenchSchemaVersion));
        }
    }

    std::ostringstream gap;
    write_gap_csv(gap, rows, EngineKind::FlatVI);
    const auto gl = lines(gap.str());
    EXPECT_EQ(gl[0], "schema,instance,objective,engine,partition,depth,eta_thr,value,reference_value,gap");
    ASSERT_EQ(gl.size(), 1u + 5u);
    for (std::size_t i = 1; i < gl.size(); ++i) {
        const auto f = fields(gl[i]);
        ASSERT_EQ(f.size(), 10u);
        EXPECT_GE(std::stod(f[9]), 0.0);
        EXPECT_LE(std::stod(f[9]), 1e-3);
    }
}

TEST(Csv, GapIsSymmetric) {
    BenchRow a;
    a.instance = "x";
    a.config.engine = EngineKind::FlatVI;
    a.value = 1.25;
    BenchRow b = a;
    b.config.engine = EngineKind::Sharp;
    b.value = 1.75;
    std::ostringstream ab;
    std::ostringstream ba;
    write_gap_csv(ab, {a, b}, EngineKind::FlatVI);
    b.config.engine = EngineKind::FlatVI;
    a.config.engine = EngineKind::Sharp;
    write_gap_csv(ba, {b, a}, EngineKind::FlatVI);
    EXPECT_EQ(fields(lines(ab.str())[1])[9], "0.5");
    EXPECT_EQ(fields(lines(ba.str())[1])[9], "0.5");
}

TEST(Csv, QuotesFieldsWithCommas) {
    BenchRow r;
    r.instance = "odd,name";
    r.config.engine = EngineKind::FlatVI;
    std::ostringstream out;
    write_bench_csv(out, {r});
    EXPECT_NE(out.str().find("\"odd,name\""), std::string::npos);
}

TEST(Report, ValuesAndPolicyCsv) {
    std::ostringstream v;
    write_values_csv(v, ValueVector{0.5, kInfinity, 1.0 / 3.0});
    EXPECT_EQ(v.str(), "state,value\n0,0.5\n1,inf\n2,0.33333333333333331\n");
    std::ostringstream p;
    write_policy_csv(p, Policy{ActionId{2}, std::nullopt});
    EXPECT_EQ(p.str(), "state,action\n0,2\n1,\n");
}

TEST(Report, JsonCarriesDiagnostics) {
    const auto g = generate_warehouse({.n = 8});
    EngineConfig c;
    c.sharp.strategy = PartitionStrategy::grid(2, 2);
    const auto r = run_engine(g.mdp, g.features, g.objective, c);
    const auto j = report_to_json(r, g.mdp, false);
    EXPECT_EQ(j.at("converged").get<bool>(), true);
    EXPECT_NEAR(j.at("initial_value").get<double>(), 2.0 * 7 / 0.8, 1e-4);
    EXPECT_EQ(j.at("leaves").get<std::size_t>(), 4u);
    EXPECT_FALSE(j.contains("seconds"));
    EXPECT_TRUE(report_to_json(r, g.mdp, true).contains("seconds"));
}
