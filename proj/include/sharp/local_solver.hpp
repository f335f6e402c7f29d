#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sharp/bellman.hpp"
#include "sharp/hierarchy.hpp"
#include "sharp/mdp.hpp"

namespace sharp {

/// Sub-MDP induced by a block: the block's states keep their original choices,
/// and every outside state reachable in one step becomes an absorbing boundary
/// state whose value is pinned.
///
/// Local index layout: internal states first (block order), then boundary states
/// ascending. The class models `ChoiceModel` in local indices.
class SubMdp {
public:
    std::size_t num_states() const { return internal_.size() + boundary_.size(); }
    std::size_t num_internal() const { return internal_.size(); }
    std::span<const StateIndex> internal() const { return internal_; }
    std::span<const StateIndex> boundary() const { return boundary_; }

    StateIndex global_state(StateIndex local) const {
        return local < internal_.size() ? internal_[local] : boundary_[local - internal_.size()];
    }
    bool is_boundary(StateIndex local) const { return local >= internal_.size(); }

    std::size_t choice_begin(StateIndex s) const { return state_begin_[s]; }
    std::size_t choice_end(StateIndex s) const { return state_begin_[s + 1]; }
    ActionId action(std::size_t c) const { return choice_action_[c]; }
    double cost(std::size_t c) const { return choice_cost_[c]; }
    std::span<const Transition> transitions(std::size_t c) const {
        return {transitions_.data() + trans_begin_[c], trans_begin_[c + 1] - trans_begin_[c]};
    }

    /// Local pin mask and pinned values (boundary states, internal goals, and
    /// internal states whose global value is infinite). Entries of `pins` for
    /// unpinned states are meaningless.
    const std::vector<char>& pinned() const { return pinned_; }
    const ValueVector& pins() const { return pins_; }
    /// Pinned values of the boundary states, in boundary order.
    std::span<const double> boundary_pins() const {
        return std::span<const double>(pins_).subspan(internal_.size());
    }

private:
    friend SubMdp induce_submdp(const Mdp&, std::span<const StateIndex>);
    friend void assign_boundary_values(SubMdp&, const Mdp&, const Objective&, std::span<const double>);

    std::vector<StateIndex> internal_;
    std::vector<StateIndex> boundary_;
    std::vector<std::size_t> state_begin_;
    std::vector<ActionId> choice_action_;
    std::vector<double> choice_cost_;
    std::vector<std::size_t> trans_begin_;
    std::vector<Transition> transitions_;
    std::vector<char> pinned_;
    ValueVector pins_;
};

/// Builds the sub-MDP of `block` (sorted ascending, nonempty). Probabilities and
/// costs of internal choices are copied unchanged and in the same order.
inline SubMdp induce_submdp(const Mdp& mdp, std::span<const StateIndex> block) {
    if (block.empty()) throw std::invalid_argument("cannot induce a sub-MDP from an empty block");
    SubMdp sub;
    sub.internal_.assign(block.begin(), block.end());
    auto inside = [&](StateIndex t) { return std::binary_search(block.begin(), block.end(), t); };

    for (StateIndex s : block) {
        for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
            for (const auto& tr : mdp.transitions(c))
                if (!inside(tr.target)) sub.boundary_.push_back(tr.target);
        }
    }
    std::sort(sub.boundary_.begin(), sub.boundary_.end());
    sub.boundary_.erase(std::unique(sub.boundary_.begin(), sub.boundary_.end()), sub.boundary_.end());

    auto local_of = [&](StateIndex t) -> StateIndex {
        auto it = std::lower_bound(block.begin(), block.end(), t);
        if (it != block.end() && *it == t) return static_cast<StateIndex>(it - block.begin());
        auto jt = std::lower_bound(sub.boundary_.begin(), sub.boundary_.end(), t);
        return static_cast<StateIndex>(block.size() + static_cast<std::size_t>(jt - sub.boundary_.begin()));
    };

    sub.trans_begin_.push_back(0);
    for (StateIndex s : block) {
        sub.state_begin_.push_back(sub.choice_action_.size());
        for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
            for (const auto& tr : mdp.transitions(c)) sub.transitions_.push_back({local_of(tr.target), tr.probability});
            sub.choice_action_.push_back(mdp.action(c));
            sub.choice_cost_.push_back(mdp.cost(c));
            sub.trans_begin_.push_back(sub.transitions_.size());
        }
    }
    for (std::size_t i = 0; i < sub.boundary_.size(); ++i) {
        sub.state_begin_.push_back(sub.choice_action_.size());
        sub.transitions_.push_back({static_cast<StateIndex>(block.size() + i), 1.0});
        sub.choice_action_.push_back(0);
        sub.choice_cost_.push_back(0.0);
        sub.trans_begin_.push_back(sub.transitions_.size());
    }
    sub.state_begin_.push_back(sub.choice_action_.size());

    sub.pinned_.assign(sub.num_states(), 0);
    std::fill(sub.pinned_.begin() + static_cast<std::ptrdiff_t>(block.size()), sub.pinned_.end(), 1);
    sub.pins_.assign(sub.num_states(), 0.0);
    return sub;
}

/// Pins boundary states to the global values, internal goals to the objective's
/// goal value, and internal states with infinite global value to infinity.
inline void assign_boundary_values(SubMdp& sub, const Mdp& mdp, const Objective& objective,
                                   std::span<const double> global) {
    if (global.size() != mdp.num_states()) {
        throw std::logic_error("global value vector does not cover every state");
    }
    const std::size_t m = sub.internal_.size();
    for (std::size_t i = 0; i < m; ++i) {
        sub.pinned_[i] = 0;
        if (std::isinf(global[sub.internal_[i]])) {
            sub.pinned_[i] = 1;
            sub.pins_[i] = global[sub.internal_[i]];
        }
    }
    for (StateIndex g : mdp.label(objective.goal_label)) {
        auto it = std::lower_bound(sub.internal_.begin(), sub.internal_.end(), g);
        if (it != sub.internal_.end() && *it == g) {
            const auto i = static_cast<std::size_t>(it - sub.internal_.begin());
            sub.pinned_[i] = 1;
            sub.pins_[i] = objective.goal_value();
        }
    }
    for (std::size_t j = 0; j < sub.boundary_.size(); ++j) {
        const double v = global[sub.boundary_[j]];
        if (std::isnan(v)) {
            throw std::logic_error("no global value for boundary state " + std::to_string(sub.boundary_[j]));
        }
        sub.pins_[m + j] = v;
    }
}

struct LocalSolveOptions {
    double epsilon = 1e-6;
    /// 0 means no cap beyond `kGlobalIterationCap`.
    std::size_t max_iterations = 0;
    IterationMethod method = IterationMethod::SyncVI;
    bool check_monotone = false;
};

inline constexpr std::size_t kGlobalIterationCap = 10'000'000;

struct LocalSolution {
    /// Local values over internal then boundary states; boundary entries are the pins.
    ValueVector values;
    /// Policy over internal states; pinned internal states have none.
    Policy policy;
    double residual = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Solves the local Bellman equations of `sub` with boundary pins held fixed.
///
/// `warm_start`, when given, supplies starting values for the internal states;
/// otherwise they start at zero. Hitting the iteration cap is reported through
/// `converged`, never thrown.
inline LocalSolution solve_local(const SubMdp& sub, const Objective& objective, const LocalSolveOptions& options,
                                 std::span<const double> warm_start = {}) {
    const std::size_t m = sub.num_internal();
    ValueVector start(sub.num_states(), 0.0);
    if (!warm_start.empty()) {
        if (warm_start.size() != m) throw std::invalid_argument("warm start must cover the internal states");
        std::copy(warm_start.begin(), warm_start.end(), start.begin());
    }
    for (std::size_t i = 0; i < start.size(); ++i)
        if (sub.pinned()[i]) start[i] = sub.pins()[i];

    const std::size_t cap = options.max_iterations == 0 ? kGlobalIterationCap : options.max_iterations;
    auto it = iterate_values(sub, objective.maximizing(), std::move(start), sub.pinned(), options.epsilon, cap,
                             options.method, options.check_monotone);
    LocalSolution out;
    out.values = std::move(it.values);
    out.policy.assign(it.policy.begin(), it.policy.begin() + static_cast<std::ptrdiff_t>(m));
    out.residual = it.residual;
    out.iterations = it.iterations;
    out.converged = it.converged;
    return out;
}

}  // namespace sharp
