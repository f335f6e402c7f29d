#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "sharp/mdp.hpp"

namespace sharp {

/// State-level predecessor lists (a state appears once per predecessor, regardless of action).
inline std::vector<std::vector<StateIndex>> predecessors(const Mdp& mdp) {
    const auto n = static_cast<StateIndex>(mdp.num_states());
    std::vector<std::vector<StateIndex>> pred(n);
    for (StateIndex s = 0; s < n; ++s) {
        for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
            for (const auto& tr : mdp.transitions(c)) {
                auto& list = pred[tr.target];
                if (list.empty() || list.back() != s) list.push_back(s);
            }
        }
    }
    return pred;
}

/// States from which the goal is unreachable under every policy: the complement of
/// backward graph reachability from the goal. Goal states are never included.
inline std::vector<char> precompute_prob0(const Mdp& mdp, const std::vector<char>& goal) {
    const auto n = mdp.num_states();
    const auto pred = predecessors(mdp);
    std::vector<char> reach(goal.begin(), goal.end());
    std::vector<StateIndex> stack;
    for (StateIndex s = 0; s < n; ++s)
        if (reach[s]) stack.push_back(s);
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
    std::vector<char> prob0(n);
    for (std::size_t s = 0; s < n; ++s) prob0[s] = reach[s] ? 0 : 1;
    return prob0;
}

/// States for which some policy reaches the goal with probability 1 (nested
/// greatest/least fixpoint over the underlying graph).
inline std::vector<char> almost_sure_reach(const Mdp& mdp, const std::vector<char>& goal) {
    const auto n = static_cast<StateIndex>(mdp.num_states());
    const auto pred = predecessors(mdp);
    std::vector<char> candidate(n, 1);
    std::vector<char> choice_ok(mdp.num_choices());
    std::vector<char> reach(n);
    std::vector<StateIndex> stack;

    while (true) {
        for (StateIndex s = 0; s < n; ++s) {
            for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
                bool ok = true;
                for (const auto& tr : mdp.transitions(c)) ok = ok && candidate[tr.target];
                choice_ok[c] = ok;
            }
        }
        std::fill(reach.begin(), reach.end(), 0);
        for (StateIndex s = 0; s < n; ++s) {
            if (goal[s] && candidate[s]) {
                reach[s] = 1;
                stack.push_back(s);
            }
        }
        while (!stack.empty()) {
            const StateIndex t = stack.back();
            stack.pop_back();
            for (StateIndex s : pred[t]) {
                if (reach[s] || !candidate[s]) continue;
                for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
                    if (!choice_ok[c]) continue;
                    bool hits = false;
                    for (const auto& tr : mdp.transitions(c)) hits = hits || reach[tr.target];
                    if (hits) {
                        reach[s] = 1;
                        stack.push_back(s);
                        break;
                    }
                }
            }
        }
        if (reach == candidate) break;
        candidate = reach;
    }
    return candidate;
}

struct SspViolation {
    StateIndex state;
    std::string reason;
};

struct SspCheck {
    bool ok = true;
    std::vector<SspViolation> violations;
    /// PMax only: smallest one-step mass into goal or absorbing states over all
    /// non-absorbing states and their actions.
    std::optional<double> alpha;
};

/// Graph diagnostics for the assumptions the error bounds rely on.
///
/// RMin: every state must have a policy reaching the goal almost surely, and goal
/// states must be absorbing at zero cost. PMax: reports the uniform absorption
/// constant alpha; alpha = 0 is flagged as a violation.
inline SspCheck check_ssp_assumptions(const Mdp& mdp, const Objective& objective) {
    const auto goal = goal_mask(mdp, objective);
    const auto n = static_cast<StateIndex>(mdp.num_states());
    SspCheck result;

    if (objective.kind == ObjectiveKind::RMin) {
        const auto proper = almost_sure_reach(mdp, goal);
        for (StateIndex s = 0; s < n; ++s) {
            if (!proper[s]) result.violations.push_back({s, "no policy reaches the goal with probability 1"});
        }
        for (StateIndex s : mdp.label(objective.goal_label)) {
            if (!mdp.is_absorbing(s)) result.violations.push_back({s, "goal state is not absorbing"});
            for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
                if (mdp.cost(c) != 0.0) {
                    result.violations.push_back({s, "goal state has nonzero cost"});
                    break;
                }
            }
        }
    } else {
        std::vector<char> absorbing(n);
        for (StateIndex s = 0; s < n; ++s) absorbing[s] = goal[s] || mdp.is_absorbing(s);
        double alpha = 1.0;
        for (StateIndex s = 0; s < n; ++s) {
            if (absorbing[s]) continue;
            for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
                double mass = 0.0;
                for (const auto& tr : mdp.transitions(c))
                    if (absorbing[tr.target]) mass += tr.probability;
                if (mass == 0.0 && alpha > 0.0) {
                    result.violations.push_back({s, "an action has no one-step mass into goal or sink"});
                }
                alpha = std::min(alpha, mass);
            }
        }
        result.alpha = alpha;
    }
    result.ok = result.violations.empty();
    return result;
}

}  // namespace sharp
