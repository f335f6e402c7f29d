#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sharp/bellman.hpp"
#include "sharp/graph.hpp"
#include "sharp/mdp.hpp"

namespace sharp {

struct SolverConfig {
    double epsilon = 1e-6;
    std::size_t max_iterations = 10'000'000;
    IterationMethod method = IterationMethod::SyncVI;
    /// PMax: pin states that cannot reach the goal to 0 before iterating.
    bool use_precomputation = false;
    /// Throw if any iterate decreases (values start at zero, so they must not).
    bool check_monotone = false;

    void validate() const {
        if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
        if (max_iterations < 1) throw std::invalid_argument("max_iterations must be at least 1");
    }
};

struct FlatResult {
    ValueVector values;
    Policy policy;
    std::size_t iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Pinned states and their values before any numeric iteration: goals at the
/// objective's goal value and, for RMin, states without a proper policy at
/// infinity. The returned vector is the zero-initialised start point.
struct PinnedStart {
    ValueVector values;
    std::vector<char> pinned;
    std::size_t infinite_states = 0;
};

inline PinnedStart pinned_start(const Mdp& mdp, const Objective& objective, bool prob0_precomputation) {
    const auto n = mdp.num_states();
    const auto goal = goal_mask(mdp, objective);
    PinnedStart start{ValueVector(n, 0.0), std::vector<char>(goal.begin(), goal.end()), 0};
    for (std::size_t s = 0; s < n; ++s)
        if (goal[s]) start.values[s] = objective.goal_value();

    if (objective.kind == ObjectiveKind::RMin) {
        const auto proper = almost_sure_reach(mdp, goal);
        for (std::size_t s = 0; s < n; ++s) {
            if (!proper[s]) {
                start.values[s] = kInfinity;
                start.pinned[s] = 1;
                ++start.infinite_states;
            }
        }
    } else if (prob0_precomputation) {
        const auto prob0 = precompute_prob0(mdp, goal);
        for (std::size_t s = 0; s < n; ++s)
            if (prob0[s]) start.pinned[s] = 1;
    }
    return start;
}

inline std::string infinite_state_warning(std::size_t count) {
    return std::to_string(count) + " state(s) have no policy reaching the goal almost surely; assigned infinite cost";
}

/// One Bellman backup of the full model at a non-goal state.
inline Backup bellman_backup(const Mdp& mdp, const Objective& objective, std::span<const double> values,
                             StateIndex s) {
    return bellman_backup(mdp, objective.maximizing(), values, s);
}

/// Monolithic value iteration (synchronous or Gauss-Seidel, ascending state order)
/// from the zero vector with goals pinned.
inline FlatResult value_iteration(const Mdp& mdp, const Objective& objective, const SolverConfig& config = {}) {
    config.validate();
    auto start = pinned_start(mdp, objective, config.use_precomputation);
    auto it = iterate_values(mdp, objective.maximizing(), std::move(start.values), start.pinned, config.epsilon,
                             config.max_iterations, config.method, config.check_monotone);
    FlatResult result{std::move(it.values), std::move(it.policy), it.iterations, it.residual, it.converged, {}};
    if (start.infinite_states > 0) result.warnings.push_back(infinite_state_warning(start.infinite_states));
    if (!result.converged) result.warnings.push_back("iteration limit reached before convergence");
    return result;
}

namespace detail {

/// PMax only: a greedy policy can stay forever inside a set of states whose
/// actions all tie at a positive value. Such states are moved, in backward
/// order from the goal, to the lowest-id near-optimal action that enters a
/// state already known to reach the goal.
inline void repair_stalling_states(const Mdp& mdp, std::span<const double> values, const std::vector<char>& goal,
                                   Policy& policy) {
    const auto n = static_cast<StateIndex>(mdp.num_states());
    auto chosen = [&](StateIndex s) {
        return policy[s] ? *mdp.find_choice(s, *policy[s]) : mdp.choice_begin(s);
    };
    std::vector<std::vector<StateIndex>> pred(n);
    for (StateIndex s = 0; s < n; ++s)
        if (!goal[s])
            for (const auto& tr : mdp.transitions(chosen(s))) pred[tr.target].push_back(s);
    std::vector<char> settled(goal.begin(), goal.end());
    std::vector<StateIndex> stack;
    for (StateIndex s = 0; s < n; ++s)
        if (settled[s]) stack.push_back(s);
    while (!stack.empty()) {
        const StateIndex t = stack.back();
        stack.pop_back();
        for (StateIndex s : pred[t])
            if (!settled[s]) {
                settled[s] = 1;
                stack.push_back(s);
            }
    }

    for (bool changed = true; changed;) {
        changed = false;
        for (StateIndex s = 0; s < n; ++s) {
            if (settled[s] || !policy[s] || !(values[s] > 0.0)) continue;
            const double best = bellman_backup(mdp, true, values, s).value;
            const double tol = 1e-9 * std::max(1.0, std::abs(best));
            for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
                if (choice_value(mdp, true, values, c) < best - tol) continue;
                bool enters = false;
                for (const auto& tr : mdp.transitions(c)) enters = enters || settled[tr.target];
                if (!enters) continue;
                policy[s] = mdp.action(c);
                settled[s] = 1;
                changed = true;
                break;
            }
        }
    }
}

}  // namespace detail

/// Greedy policy for `values`: lowest-id arg-optimum at every state except goal,
/// absorbing and infinite-valued states, which stay unassigned. Under PMax,
/// states where that choice never reaches the goal take the lowest-id
/// near-optimal action that does.
inline Policy extract_policy(const Mdp& mdp, const Objective& objective, std::span<const double> values) {
    const auto goal = goal_mask(mdp, objective);
    const auto n = static_cast<StateIndex>(mdp.num_states());
    Policy policy(n);
    for (StateIndex s = 0; s < n; ++s) {
        if (goal[s] || mdp.is_absorbing(s) || std::isinf(values[s])) continue;
        policy[s] = bellman_backup(mdp, objective.maximizing(), values, s).action;
    }
    if (objective.kind == ObjectiveKind::PMax) detail::repair_stalling_states(mdp, values, goal, policy);
    return policy;
}

/// Sup-norm of T V - V over non-goal, finite-valued states.
inline double global_residual(const Mdp& mdp, const Objective& objective, std::span<const double> values) {
    const auto goal = goal_mask(mdp, objective);
    return bellman_residual(mdp, objective.maximizing(), values, goal);
}

}  // namespace sharp
