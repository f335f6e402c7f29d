#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sharp/mdp.hpp"

namespace sharp {

/// Dense policy evaluation is used up to this many states; larger chains fall
/// back to iterative evaluation at 1e-10.
inline constexpr std::size_t kDenseEvaluationLimit = 10'000;
/// Largest policy space `enumerate_policies` accepts.
inline constexpr std::uint64_t kPolicySpaceLimit = 1'000'000;

namespace detail {

/// Solves A x = b in place by Gaussian elimination with partial pivoting.
/// `a` is row-major n x n.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (a[pivot * n + col] == 0.0) throw std::runtime_error("singular system in policy evaluation");
        if (pivot != col) {
            for (std::size_t k = 0; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
            std::swap(b[col], b[pivot]);
        }
        const double d = a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r * n + col] / d;
            if (f == 0.0) continue;
            for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= a[i * n + k] * x[k];
        x[i] = sum / a[i * n + i];
    }
    return x;
}

/// Markov chain induced by fixing one choice index per state.
struct Chain {
    std::vector<std::vector<Transition>> rows;
    std::vector<double> cost;
};

/// States with a path into `seed`. Rows of `absorbing` states are ignored.
inline std::vector<char> backward_reach(const Chain& chain, const std::vector<char>& seed,
                                        const std::vector<char>& absorbing) {
    const std::size_t n = chain.rows.size();
    std::vector<std::vector<StateIndex>> pred(n);
    for (std::size_t s = 0; s < n; ++s)
        if (!absorbing[s])
            for (const auto& tr : chain.rows[s]) pred[tr.target].push_back(static_cast<StateIndex>(s));
    std::vector<char> reach(seed);
    std::vector<StateIndex> stack;
    for (std::size_t s = 0; s < n; ++s)
        if (reach[s]) stack.push_back(static_cast<StateIndex>(s));
    while (!stack.empty()) {
        const StateIndex t = stack.back();
        stack.pop_back();
        for (StateIndex s : pred[t]) {
            if (!reach[s]) {
                reach[s] = 1;
                stack.push_back(s);
            }
        }
    }
    return reach;
}

/// Exact value of a chain: absorption probability into the goal (PMax) or
/// expected cost until the goal, infinite where the goal is missed with
/// positive probability (RMin).
inline ValueVector evaluate_chain(const Chain& chain, const std::vector<char>& goal, const Objective& objective) {
    const std::size_t n = chain.rows.size();
    const auto can_reach = backward_reach(chain, goal, goal);
    ValueVector v(n, 0.0);
    std::vector<char> unknown(n, 0);
    if (objective.kind == ObjectiveKind::PMax) {
        for (std::size_t s = 0; s < n; ++s) {
            if (goal[s]) v[s] = 1.0;
            else unknown[s] = can_reach[s];
        }
    } else {
        std::vector<char> lost(n);
        for (std::size_t s = 0; s < n; ++s) lost[s] = can_reach[s] ? 0 : 1;
        const auto may_lose = backward_reach(chain, lost, goal);
        for (std::size_t s = 0; s < n; ++s) {
            if (goal[s]) v[s] = 0.0;
            else if (may_lose[s]) v[s] = kInfinity;
            else unknown[s] = 1;
        }
    }

    std::vector<std::size_t> idx(n, SIZE_MAX);
    std::vector<std::size_t> members;
    for (std::size_t s = 0; s < n; ++s) {
        if (unknown[s]) {
            idx[s] = members.size();
            members.push_back(s);
        }
    }
    const std::size_t m = members.size();
    if (m == 0) return v;

    // Constant term: one-step mass into the goal (PMax) or the step cost (RMin).
    std::vector<double> rhs(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t s = members[i];
        if (objective.kind == ObjectiveKind::RMin) rhs[i] = chain.cost[s];
        for (const auto& tr : chain.rows[s])
            if (idx[tr.target] == SIZE_MAX) rhs[i] += tr.probability * v[tr.target] * (objective.kind == ObjectiveKind::PMax);
    }

    if (m <= kDenseEvaluationLimit) {
        std::vector<double> a(m * m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            a[i * m + i] += 1.0;
            for (const auto& tr : chain.rows[members[i]])
                if (idx[tr.target] != SIZE_MAX) a[i * m + idx[tr.target]] -= tr.probability;
        }
        const auto x = solve_dense(std::move(a), std::move(rhs));
        for (std::size_t i = 0; i < m; ++i) v[members[i]] = x[i];
        return v;
    }

    // Large chains: Gauss-Seidel on the same equations.
    std::vector<double> x(m, 0.0);
    for (std::size_t sweep = 0; sweep < 10'000'000; ++sweep) {
        double diff = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double sum = rhs[i];
            for (const auto& tr : chain.rows[members[i]])
                if (idx[tr.target] != SIZE_MAX) sum += tr.probability * x[idx[tr.target]];
            diff = std::max(diff, std::abs(sum - x[i]));
            x[i] = sum;
        }
        if (diff < 1e-10) break;
    }
    for (std::size_t i = 0; i < m; ++i) v[members[i]] = x[i];
    return v;
}

inline std::vector<char> oracle_goal_mask(const Mdp& mdp, const Objective& objective) {
    if (mdp.label(objective.goal_label).empty()) {
        throw ModelError("goal label '" + objective.goal_label + "' is missing or empty");
    }
    return mdp.label_mask(objective.goal_label);
}

}  // namespace detail

/// Value of the Markov chain induced by `policy`. States without an assigned
/// action follow their lowest-id action; goal states keep the goal value.
/// Improper behaviour under RMin yields infinite entries.
inline ValueVector evaluate_policy(const Mdp& mdp, const Objective& objective, const Policy& policy) {
    const auto n = static_cast<StateIndex>(mdp.num_states());
    if (policy.size() != n) throw std::invalid_argument("policy size does not match the model");
    const auto goal = detail::oracle_goal_mask(mdp, objective);
    detail::Chain chain;
    chain.rows.resize(n);
    chain.cost.resize(n);
    for (StateIndex s = 0; s < n; ++s) {
        std::size_t c = mdp.choice_begin(s);
        if (policy[s]) {
            auto found = mdp.find_choice(s, *policy[s]);
            if (!found) {
                throw std::invalid_argument("policy picks action " + std::to_string(*policy[s]) +
                                            " not enabled in state " + std::to_string(s));
            }
            c = *found;
        }
        auto ts = mdp.transitions(c);
        chain.rows[s].assign(ts.begin(), ts.end());
        chain.cost[s] = mdp.cost(c);
    }
    return detail::evaluate_chain(chain, goal, objective);
}

struct OracleResult {
    ValueVector values;
    /// Actions used at each state by some policy attaining that state's optimum.
    std::vector<std::vector<ActionId>> optimal_actions;
    std::uint64_t enumeration_count = 0;
};

/// Optimum over all deterministic memoryless policies by exhaustive enumeration,
/// each policy evaluated exactly by a dense solve.
inline OracleResult enumerate_policies(const Mdp& mdp, const Objective& objective) {
    const auto n = static_cast<StateIndex>(mdp.num_states());
    const auto goal = detail::oracle_goal_mask(mdp, objective);
    std::uint64_t total = 1;
    for (StateIndex s = 0; s < n; ++s) {
        total *= mdp.num_actions(s);
        if (total > kPolicySpaceLimit) {
            throw std::invalid_argument("policy space exceeds " + std::to_string(kPolicySpaceLimit) + " policies");
        }
    }

    const bool maximize = objective.kind == ObjectiveKind::PMax;
    auto better = [&](double a, double b) { return maximize ? a > b : a < b; };
    auto for_each_policy = [&](auto&& visit) {
        std::vector<std::size_t> digit(n, 0);
        detail::Chain chain;
        chain.rows.resize(n);
        chain.cost.resize(n);
        for (std::uint64_t k = 0; k < total; ++k) {
            for (StateIndex s = 0; s < n; ++s) {
                const std::size_t c = mdp.choice_begin(s) + digit[s];
                auto ts = mdp.transitions(c);
                chain.rows[s].assign(ts.begin(), ts.end());
                chain.cost[s] = mdp.cost(c);
            }
            visit(digit, detail::evaluate_chain(chain, goal, objective));
            for (StateIndex s = 0; s < n; ++s) {
                if (++digit[s] < mdp.num_actions(s)) break;
                digit[s] = 0;
            }
        }
    };

    OracleResult result;
    result.enumeration_count = total;
    result.values.assign(n, maximize ? -kInfinity : kInfinity);
    for_each_policy([&](const std::vector<std::size_t>&, const ValueVector& v) {
        for (StateIndex s = 0; s < n; ++s)
            if (better(v[s], result.values[s])) result.values[s] = v[s];
    });

    result.optimal_actions.assign(n, {});
    for_each_policy([&](const std::vector<std::size_t>& digit, const ValueVector& v) {
        for (StateIndex s = 0; s < n; ++s) {
            const double best = result.values[s];
            const bool hit = std::isinf(best) ? v[s] == best
                                               : std::abs(v[s] - best) <= 1e-9 * std::max(1.0, std::abs(best));
            if (!hit) continue;
            const ActionId a = mdp.action(mdp.choice_begin(s) + digit[s]);
            auto& acts = result.optimal_actions[s];
            if (std::find(acts.begin(), acts.end(), a) == acts.end()) acts.push_back(a);
        }
    });
    for (auto& acts : result.optimal_actions) std::sort(acts.begin(), acts.end());
    return result;
}

}  // namespace sharp
