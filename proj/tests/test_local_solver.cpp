#include <gtest/gtest.h>

#include <random>
#include <set>

#include "sharp/flat_solver.hpp"
#include "sharp/local_solver.hpp"
#include "sharp/model_gen.hpp"
#include "test_util.hpp"

using namespace sharp;
using namespace sharp::fixtures;

namespace {

StateIndex cell(const GeneratedModel& g, std::int64_t x, std::int64_t y) {
    for (StateIndex s = 0; s < g.mdp.num_states(); ++s)
        if (g.features.get("x", s) == x && g.features.get("y", s) == y) return s;
    throw std::out_of_range("no such cell");
}

Block everything(const Mdp& m) {
    Block b(m.num_states());
    for (StateIndex s = 0; s < m.num_states(); ++s) b[s] = s;
    return b;
}

}  // namespace

TEST(Induce, WholeSpaceHasNoBoundary) {
    const auto g = generate_warehouse({.n = 5});
    const SubMdp sub = induce_submdp(g.mdp, everything(g.mdp));
    EXPECT_TRUE(sub.boundary().empty());
    EXPECT_EQ(sub.num_states(), g.mdp.num_states());
}

TEST(Induce, CornerBlockBoundary) {
    const auto g = generate_warehouse({.n = 6});
    Block b{cell(g, 0, 0), cell(g, 1, 0), cell(g, 0, 1), cell(g, 1, 1)};
    std::sort(b.begin(), b.end());
    const SubMdp sub = induce_submdp(g.mdp, b);
    const std::set<StateIndex> bd(sub.boundary().begin(), sub.boundary().end());
    EXPECT_EQ(bd, (std::set<StateIndex>{cell(g, 2, 0), cell(g, 2, 1), cell(g, 0, 2), cell(g, 1, 2)}));
    EXPECT_TRUE(std::is_sorted(sub.boundary().begin(), sub.boundary().end()));
    for (StateIndex t : sub.boundary()) EXPECT_FALSE(std::binary_search(b.begin(), b.end(), t));
}

TEST(Induce, AbsorbingGoalSingletonHasNoBoundary) {
    const auto g = generate_warehouse({.n = 4});
    const SubMdp sub = induce_submdp(g.mdp, Block{g.mdp.label("goal")[0]});
    EXPECT_TRUE(sub.boundary().empty());
}

TEST(Induce, InternalChoicesCopiedExactly) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const Mdp m = random_mdp(rng);
        Block b;
        for (StateIndex s = 0; s < m.num_states(); ++s)
            if (rng() % 2) b.push_back(s);
        if (b.empty()) b.push_back(0);
        const SubMdp sub = induce_submdp(m, b);
        for (std::size_t li = 0; li < b.size(); ++li) {
            const auto s = b[li];
            const auto ls = static_cast<StateIndex>(li);
            ASSERT_EQ(sub.choice_end(ls) - sub.choice_begin(ls), m.num_actions(s));
            for (std::size_t k = 0; k < m.num_actions(s); ++k) {
                const std::size_t c = m.choice_begin(s) + k;
                const std::size_t lc = sub.choice_begin(ls) + k;
                EXPECT_EQ(sub.action(lc), m.action(c));
                EXPECT_EQ(sub.cost(lc), m.cost(c));
                const auto ts = m.transitions(c);
                const auto lts = sub.transitions(lc);
                ASSERT_EQ(ts.size(), lts.size());
                for (std::size_t j = 0; j < ts.size(); ++j) {
                    EXPECT_EQ(sub.global_state(lts[j].target), ts[j].target);
                    EXPECT_EQ(lts[j].probability, ts[j].probability);
                }
            }
        }
        for (StateIndex ls = static_cast<StateIndex>(b.size()); ls < sub.num_states(); ++ls) {
            ASSERT_EQ(sub.choice_end(ls) - sub.choice_begin(ls), 1u);
            const auto ts = sub.transitions(sub.choice_begin(ls));
            ASSERT_EQ(ts.size(), 1u);
            EXPECT_EQ(ts[0].target, ls);
            EXPECT_TRUE(sub.pinned()[ls]);
        }
    }
}

TEST(Induce, EmptyBlockRejected) {
    EXPECT_THROW(induce_submdp(chain3(), Block{}), std::invalid_argument);
}

TEST(AssignBoundary, ZeroGlobalGivesZeroPins) {
    const auto g = generate_warehouse({.n = 6});
    SubMdp sub = induce_submdp(g.mdp, Block{0, 1, 6, 7});
    assign_boundary_values(sub, g.mdp, rmin(), ValueVector(g.mdp.num_states(), 0.0));
    for (double v : sub.boundary_pins()) EXPECT_EQ(v, 0.0);
}

TEST(AssignBoundary, PinsTrackGlobalValues) {
    const auto g = generate_warehouse({.n = 6, .layout = WarehouseLayout::SW});
    SolverConfig c;
    c.epsilon = 1e-10;
    const auto flat = value_iteration(g.mdp, rmin(), c);
    SubMdp sub = induce_submdp(g.mdp, Block{3, 4, 5, 9});
    assign_boundary_values(sub, g.mdp, rmin(), flat.values);
    for (std::size_t j = 0; j < sub.boundary().size(); ++j)
        EXPECT_EQ(sub.boundary_pins()[j], flat.values[sub.boundary()[j]]);
}

TEST(AssignBoundary, MissingValueRejected) {
    const auto g = generate_warehouse({.n = 4});
    SubMdp sub = induce_submdp(g.mdp, Block{0});
    ValueVector v(g.mdp.num_states(), 0.0);
    v[sub.boundary()[0]] = std::nan("");
    EXPECT_THROW(assign_boundary_values(sub, g.mdp, rmin(), v), std::logic_error);
    EXPECT_THROW(assign_boundary_values(sub, g.mdp, rmin(), ValueVector(3, 0.0)), std::logic_error);
}

TEST(SolveLocal, CellNextToGoal) {
    const auto g = generate_warehouse({.n = 6, .variant = WarehouseVariant::PMax});
    const StateIndex s = cell(g, 5, 4);
    const StateIndex goal = cell(g, 5, 5);
    SubMdp sub = induce_submdp(g.mdp, Block{s});
    ValueVector global(g.mdp.num_states(), 0.0);
    global[goal] = 1.0;
    assign_boundary_values(sub, g.mdp, pmax(), global);
    const auto it = std::find(sub.boundary().begin(), sub.boundary().end(), goal);
    ASSERT_NE(it, sub.boundary().end());
    EXPECT_EQ(sub.boundary_pins()[static_cast<std::size_t>(it - sub.boundary().begin())], 1.0);

    LocalSolveOptions opt;
    opt.epsilon = 1e-14;
    const auto sol = solve_local(sub, pmax(), opt);
    EXPECT_TRUE(sol.converged);
    EXPECT_NEAR(sol.values[0], 0.9 / (1.0 - 0.0995), 1e-12);
    EXPECT_NEAR(sol.values[0], 0.99944, 1e-5);
    ASSERT_TRUE(sol.policy[0]);
    EXPECT_EQ(*sol.policy[0], kUp);
    EXPECT_EQ(g.mdp.action_aliases().at(*sol.policy[0]), "up");
}

TEST(SolveLocal, AllGoalsNeedNoIterations) {
    MdpBuilder b(2);
    b.add_transition(0, 0, 1, 1.0);
    b.add_transition(1, 0, 0, 1.0);
    b.add_label("goal", 0);
    b.add_label("goal", 1);
    const Mdp m = b.build();
    SubMdp sub = induce_submdp(m, Block{0, 1});
    assign_boundary_values(sub, m, pmax(), ValueVector{0.0, 0.0});
    const auto sol = solve_local(sub, pmax(), {});
    EXPECT_EQ(sol.iterations, 0u);
    EXPECT_EQ(sol.residual, 0.0);
    EXPECT_TRUE(sol.converged);
    EXPECT_EQ(sol.values, (ValueVector{1.0, 1.0}));
}

TEST(SolveLocal, WholeSpaceMatchesFlatBitForBit) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const Mdp m = random_mdp(rng);
        for (auto obj : {pmax(), rmin()}) {
            for (auto method : {IterationMethod::SyncVI, IterationMethod::GaussSeidel}) {
                SolverConfig c;
                c.method = method;
                const auto flat = value_iteration(m, obj, c);
                SubMdp sub = induce_submdp(m, everything(m));
                assign_boundary_values(sub, m, obj, pinned_start(m, obj, false).values);
                LocalSolveOptions opt;
                opt.method = method;
                const auto sol = solve_local(sub, obj, opt);
                EXPECT_EQ(sol.values, flat.values) << "case " << i;
                EXPECT_EQ(sol.iterations, flat.iterations) << "case " << i;
                EXPECT_EQ(sol.policy, flat.policy) << "case " << i;
            }
        }
    }
    const auto g = generate_warehouse({.n = 16, .layout = WarehouseLayout::MW});
    const auto flat = value_iteration(g.mdp, rmin());
    SubMdp sub = induce_submdp(g.mdp, everything(g.mdp));
    assign_boundary_values(sub, g.mdp, rmin(), pinned_start(g.mdp, rmin(), false).values);
    EXPECT_EQ(solve_local(sub, rmin(), {}).values, flat.values);
}

TEST(SolveLocal, PinsNeverMove) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 100; ++i) {
        const Mdp m = random_mdp(rng);
        Block b;
        for (StateIndex s = 0; s < m.num_states(); ++s)
            if (rng() % 2) b.push_back(s);
        if (b.empty()) b.push_back(0);
        ValueVector global(m.num_states());
        for (auto& v : global) v = static_cast<double>(rng() % 100) / 100.0;
        SubMdp sub = induce_submdp(m, b);
        assign_boundary_values(sub, m, pmax(), global);
        const auto sol = solve_local(sub, pmax(), {});
        for (std::size_t ls = 0; ls < sub.num_states(); ++ls)
            if (sub.pinned()[ls]) {
                EXPECT_EQ(sol.values[ls], sub.pins()[ls]);
            }
        EXPECT_LT(sol.residual, 1e-6);
    }
}

TEST(SolveLocal, IterationCapReported) {
    const auto g = generate_warehouse({.n = 16});
    SubMdp sub = induce_submdp(g.mdp, everything(g.mdp));
    assign_boundary_values(sub, g.mdp, rmin(), ValueVector(g.mdp.num_states(), 0.0));
    LocalSolveOptions opt;
    opt.max_iterations = 5;
    const auto sol = solve_local(sub, rmin(), opt);
    EXPECT_FALSE(sol.converged);
    EXPECT_EQ(sol.iterations, 5u);
    EXPECT_GT(sol.residual, 1e-6);
}

TEST(SolveLocal, WarmStartReachesSameFixedPoint) {
    const auto g = generate_warehouse({.n = 8, .layout = WarehouseLayout::SW, .variant = WarehouseVariant::PMax});
    Block b{0, 1, 2, 8, 9, 10};
    SubMdp sub = induce_submdp(g.mdp, b);
    ValueVector global(g.mdp.num_states(), 0.5);
    global[g.mdp.label("goal")[0]] = 1.0;
    global[g.mdp.label("sink")[0]] = 0.0;
    assign_boundary_values(sub, g.mdp, pmax(), global);
    LocalSolveOptions opt;
    opt.epsilon = 1e-13;
    const auto cold = solve_local(sub, pmax(), opt);
    const ValueVector warm(b.size(), 0.4);
    const auto hot = solve_local(sub, pmax(), opt, warm);
    EXPECT_LE(sup_diff(cold.values, hot.values), 1e-10);
    EXPECT_THROW(solve_local(sub, pmax(), opt, ValueVector(2, 0.0)), std::invalid_argument);
}
