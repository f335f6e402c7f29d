#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sharp/flat_solver.hpp"
#include "sharp/model_gen.hpp"
#include "sharp/oracle.hpp"
#include "sharp/sharp.hpp"
#include "test_util.hpp"

using namespace sharp;
using namespace sharp::fixtures;

namespace {

// Same model with each state's action ids permuted.
Mdp permute_actions(const Mdp& m, std::mt19937_64& rng) {
    MdpBuilder b(m.num_states());
    b.set_initial(m.initial());
    for (const auto& [name, states] : m.labels())
        for (StateIndex s : states) b.add_label(name, s);
    for (StateIndex s = 0; s < m.num_states(); ++s) {
        std::vector<ActionId> ids(m.num_actions(s));
        std::iota(ids.begin(), ids.end(), ActionId{0});
        std::shuffle(ids.begin(), ids.end(), rng);
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const std::size_t c = m.choice_begin(s) + k;
            for (const auto& tr : m.transitions(c)) b.add_transition(s, ids[k] + 10, tr.target, tr.probability);
            b.set_cost(s, ids[k] + 10, m.cost(c));
        }
    }
    return b.build();
}

void expect_values_near(const ValueVector& a, const ValueVector& b, double tol, int i) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t s = 0; s < a.size(); ++s) {
        if (std::isinf(a[s]) || std::isinf(b[s])) {
            EXPECT_EQ(a[s], b[s]) << "case " << i << " state " << s;
        } else {
            EXPECT_NEAR(a[s], b[s], tol) << "case " << i << " state " << s;
        }
    }
}

}  // namespace

TEST(Oracle, DominatedLoop) {
    const auto r = enumerate_policies(two_state_toy(), pmax());
    EXPECT_EQ(r.enumeration_count, 2u);
    EXPECT_EQ(r.values, (ValueVector{1.0, 1.0}));
    EXPECT_EQ(r.optimal_actions[0], (std::vector<ActionId>{0}));
    const Policy loop{ActionId{1}, std::nullopt};
    EXPECT_EQ(evaluate_policy(two_state_toy(), pmax(), loop)[0], 0.0);
}

TEST(Oracle, SinglePolicyEqualsChainSolve) {
    const auto r = enumerate_policies(chain3(), rmin());
    EXPECT_EQ(r.enumeration_count, 1u);
    EXPECT_NEAR(r.values[0], 2.5, 1e-12);
    EXPECT_NEAR(r.values[1], 1.25, 1e-12);
    EXPECT_EQ(r.values[2], 0.0);
}

TEST(Oracle, EnumerationCountIsProductOfActionCounts) {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 50; ++i) {
        const Mdp m = random_mdp(rng, {.max_actions = 3});
        std::uint64_t expected = 1;
        for (StateIndex s = 0; s < m.num_states(); ++s) expected *= m.num_actions(s);
        EXPECT_EQ(enumerate_policies(m, pmax()).enumeration_count, expected);
    }
}

TEST(Oracle, ImproperPoliciesCostInfinity) {
    MdpBuilder b(3);
    b.add_transition(0, 0, 0, 1.0);
    b.set_cost(0, 0, 1.0);
    b.add_transition(0, 1, 1, 0.5);
    b.add_transition(0, 1, 2, 0.5);
    b.set_cost(0, 1, 1.0);
    b.add_transition(1, 0, 1, 1.0);
    b.add_transition(2, 0, 2, 1.0);
    b.add_label("goal", 1);
    const Mdp m = b.build();
    const auto r = enumerate_policies(m, rmin());
    EXPECT_TRUE(std::isinf(r.values[0]));
    EXPECT_TRUE(std::isinf(r.values[2]));
    EXPECT_EQ(r.values[1], 0.0);
    EXPECT_NEAR(enumerate_policies(m, pmax()).values[0], 0.5, 1e-15);
}

TEST(Oracle, FlatValueIterationMatches) {
    std::mt19937_64 rng(2025);
    for (int i = 0; i < 200; ++i) {
        const Mdp m = random_mdp(rng);
        for (auto obj : {pmax(), rmin()}) {
            SolverConfig c;
            c.epsilon = 1e-10;
            const auto vi = value_iteration(m, obj, c);
            const auto oracle = enumerate_policies(m, obj);
            expect_values_near(vi.values, oracle.values, 1e-8, i);
        }
    }
}

TEST(Oracle, SharpSccMatches) {
    std::mt19937_64 rng(2026);
    for (int i = 0; i < 200; ++i) {
        const Mdp m = random_mdp(rng);
        const StateFeatures f(m.num_states());
        SharpConfig c;
        c.strategy = PartitionStrategy::scc();
        c.max_depth = 2;
        c.epsilon = 1e-12;
        c.eta_thr = 1e-12;
        for (auto obj : {pmax(), rmin()}) {
            const auto r = sharp_solve(m, obj, f, c);
            ASSERT_TRUE(r.converged) << i;
            expect_values_near(r.values, enumerate_policies(m, obj).values, 1e-8, i);
        }
    }
}

TEST(Oracle, InvariantUnderActionRelabelling) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 100; ++i) {
        const Mdp m = random_mdp(rng, {.max_actions = 3});
        const Mdp p = permute_actions(m, rng);
        for (auto obj : {pmax(), rmin()}) {
            const auto a = enumerate_policies(m, obj);
            const auto b = enumerate_policies(p, obj);
            expect_values_near(a.values, b.values, 1e-12, i);
            for (StateIndex s = 0; s < m.num_states(); ++s)
                EXPECT_EQ(a.optimal_actions[s].size(), b.optimal_actions[s].size()) << i;
        }
    }
}

TEST(Oracle, OptimalPoliciesEvaluateToOptimum) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const Mdp m = random_mdp(rng);
        for (auto obj : {pmax(), rmin()}) {
            SolverConfig c;
            c.epsilon = 1e-12;
            const auto vi = value_iteration(m, obj, c);
            const auto sigma = extract_policy(m, obj, vi.values);
            const auto oracle = enumerate_policies(m, obj);
            expect_values_near(evaluate_policy(m, obj, sigma), oracle.values, 1e-8, i);
            for (double v : oracle.values) {
                if (obj.kind == ObjectiveKind::PMax) {
                    EXPECT_GE(v, 0.0);
                    EXPECT_LE(v, 1.0 + 1e-12);
                } else {
                    EXPECT_GE(v, 0.0);
                }
            }
        }
    }
}

TEST(Oracle, GuardRejectsHugePolicySpaces) {
    MdpBuilder b(21);
    for (StateIndex s = 0; s < 21; ++s) {
        b.add_transition(s, 0, s, 1.0);
        b.add_transition(s, 1, s, 1.0);
    }
    b.add_label("goal", 0);
    EXPECT_THROW(enumerate_policies(b.build(), pmax()), std::invalid_argument);
}

TEST(EvaluatePolicy, SelfLoopPolicyScoresZero) {
    const auto g = generate_warehouse({.n = 4, .variant = WarehouseVariant::PMax});
    Policy stay(g.mdp.num_states());
    for (StateIndex s = 0; s < g.mdp.num_states(); ++s)
        if (!g.mdp.is_absorbing(s)) stay[s] = kDown;  // row 0 moves down into the wall
    const StateIndex s0 = g.mdp.initial();
    const auto v = evaluate_policy(g.mdp, pmax(), stay);
    EXPECT_EQ(v[s0], 0.0);
    EXPECT_EQ(v[g.mdp.label("goal")[0]], 1.0);
}

TEST(EvaluatePolicy, RejectsBadPolicies) {
    EXPECT_THROW(evaluate_policy(chain3(), rmin(), Policy(2)), std::invalid_argument);
    EXPECT_THROW(evaluate_policy(chain3(), rmin(), Policy{ActionId{4}, std::nullopt, std::nullopt}),
                 std::invalid_argument);
    EXPECT_THROW(evaluate_policy(chain3(), rmin("nope"), Policy(3)), ModelError);
}

TEST(EvaluatePolicy, IterativePathAgreesWithDense) {
    // Large enough to take the iterative branch.
    const auto g = generate_warehouse({.n = 101});
    ASSERT_GT(g.mdp.num_states(), kDenseEvaluationLimit);
    SolverConfig c;
    c.epsilon = 1e-10;
    const auto vi = value_iteration(g.mdp, rmin(), c);
    const auto v = evaluate_policy(g.mdp, rmin(), extract_policy(g.mdp, rmin(), vi.values));
    EXPECT_NEAR(v[g.mdp.initial()], 2.0 * 100 / 0.8, 1e-6);
}
