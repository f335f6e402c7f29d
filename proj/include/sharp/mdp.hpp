#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace sharp {

using StateIndex = std::uint32_t;
using ActionId = std::uint32_t;

/// Per-state values. R_min entries may be `kInfinity`.
using ValueVector = std::vector<double>;

/// Per-state action choice; empty on goal, sink and absorbing states.
using Policy = std::vector<std::optional<ActionId>>;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Tolerance on distribution sums accepted by validation and the parser.
inline constexpr double kDistributionTolerance = 1e-9;

/// Raised for malformed models (bad files, broken invariants).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ObjectiveKind { PMax, RMin };

struct Objective {
    ObjectiveKind kind = ObjectiveKind::PMax;
    std::string goal_label = "goal";
    std::string cost_name;  // informational only

    bool maximizing() const { return kind == ObjectiveKind::PMax; }
    /// Value pinned on goal states: 1 for reachability, 0 for cost-to-goal.
    double goal_value() const { return kind == ObjectiveKind::PMax ? 1.0 : 0.0; }
};

inline std::string to_string(ObjectiveKind kind) { return kind == ObjectiveKind::PMax ? "pmax" : "rmin"; }

inline ObjectiveKind parse_objective_kind(const std::string& text) {
    if (text == "pmax") return ObjectiveKind::PMax;
    if (text == "rmin") return ObjectiveKind::RMin;
    throw std::invalid_argument("unknown objective '" + text + "' (expected pmax or rmin)");
}

struct Transition {
    StateIndex target;
    double probability;

    friend bool operator==(const Transition&, const Transition&) = default;
};

/// Immutable sparse MDP in compressed-row layout.
///
/// Choices of a state are sorted by action id and the transitions of a choice by
/// target index, so iteration order is canonical. Build instances through
/// `MdpBuilder`.
class Mdp {
public:
    Mdp() = default;

    std::size_t num_states() const { return state_begin_.empty() ? 0 : state_begin_.size() - 1; }
    std::size_t num_choices() const { return choice_action_.size(); }
    std::size_t num_transitions() const { return transitions_.size(); }
    StateIndex initial() const { return initial_; }

    /// Choice indices of state `s` form the half-open range [choice_begin, choice_end).
    std::size_t choice_begin(StateIndex s) const { return state_begin_[s]; }
    std::size_t choice_end(StateIndex s) const { return state_begin_[s + 1]; }
    std::size_t num_actions(StateIndex s) const { return choice_end(s) - choice_begin(s); }

    ActionId action(std::size_t choice) const { return choice_action_[choice]; }
    double cost(std::size_t choice) const { return choice_cost_[choice]; }
    std::span<const Transition> transitions(std::size_t choice) const {
        return {transitions_.data() + choice_trans_begin_[choice],
                choice_trans_begin_[choice + 1] - choice_trans_begin_[choice]};
    }

    /// Choice index for (s, a), if `a` is enabled in `s`.
    std::optional<std::size_t> find_choice(StateIndex s, ActionId a) const {
        auto first = choice_action_.begin() + static_cast<std::ptrdiff_t>(choice_begin(s));
        auto last = choice_action_.begin() + static_cast<std::ptrdiff_t>(choice_end(s));
        auto it = std::lower_bound(first, last, a);
        if (it == last || *it != a) return std::nullopt;
        return static_cast<std::size_t>(it - choice_action_.begin());
    }

    const std::map<std::string, std::vector<StateIndex>>& labels() const { return labels_; }
    bool has_label(const std::string& name) const { return labels_.count(name) != 0; }
    /// States carrying `name`; empty when the label does not exist.
    std::span<const StateIndex> label(const std::string& name) const {
        auto it = labels_.find(name);
        if (it == labels_.end()) return {};
        return it->second;
    }
    /// Membership mask for a label.
    std::vector<char> label_mask(const std::string& name) const {
        std::vector<char> mask(num_states(), 0);
        for (StateIndex s : label(name)) mask[s] = 1;
        return mask;
    }

    const std::map<ActionId, std::string>& action_aliases() const { return aliases_; }

    /// True if every choice of `s` is a probability-1 self-loop.
    bool is_absorbing(StateIndex s) const {
        for (std::size_t c = choice_begin(s); c < choice_end(s); ++c) {
            auto ts = transitions(c);
            if (ts.size() != 1 || ts[0].target != s) return false;
        }
        return true;
    }

    friend bool operator==(const Mdp&, const Mdp&) = default;

private:
    friend class MdpBuilder;

    StateIndex initial_ = 0;
    std::vector<std::size_t> state_begin_;
    std::vector<ActionId> choice_action_;
    std::vector<double> choice_cost_;
    std::vector<std::size_t> choice_trans_begin_;
    std::vector<Transition> transitions_;
    std::map<std::string, std::vector<StateIndex>> labels_;
    std::map<ActionId, std::string> aliases_;
};

/// Accumulates transitions, costs and labels, then validates into an `Mdp`.
///
/// `build()` enforces: every state has an action, every distribution sums to 1
/// within `kDistributionTolerance`, probabilities lie in (0, 1], no duplicate
/// (state, action, target) triples, costs are finite and nonnegative, every cost
/// refers to an action that has transitions.
class MdpBuilder {
public:
    explicit MdpBuilder(std::size_t num_states = 0) : num_states_(num_states) {}

    void set_num_states(std::size_t n) { num_states_ = n; }
    std::size_t num_states() const { return num_states_; }
    void set_initial(StateIndex s) { initial_ = s; }

    /// Records p(s, a, t). Exact zeros are dropped.
    void add_transition(StateIndex s, ActionId a, StateIndex t, double p) {
        if (p == 0.0) return;
        entries_.push_back({s, a, t, p});
    }
    void set_cost(StateIndex s, ActionId a, double c) { costs_.push_back({s, a, c}); }
    void add_label(const std::string& name, StateIndex s) { labels_[name].push_back(s); }
    /// Declares a label even if it ends up with no states.
    void declare_label(const std::string& name) { labels_[name]; }
    void set_alias(ActionId a, std::string name) { aliases_[a] = std::move(name); }

    Mdp build() const {
        const std::size_t n = num_states_;
        if (n == 0) throw ModelError("model has no states");
        if (initial_ >= n) throw ModelError("initial state " + std::to_string(initial_) + " out of range");

        auto entries = entries_;
        for (const auto& e : entries) {
            if (e.s >= n || e.t >= n) {
                throw ModelError("dangling state index in transition " + std::to_string(e.s) + " " +
                                 std::to_string(e.a) + " " + std::to_string(e.t));
            }
            if (!(e.p > 0.0 && e.p <= 1.0)) {
                throw ModelError("probability out of (0,1] for transition " + std::to_string(e.s) + " " +
                                 std::to_string(e.a) + " " + std::to_string(e.t));
            }
        }
        std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
            return std::tie(x.s, x.a, x.t) < std::tie(y.s, y.a, y.t);
        });

        Mdp m;
        m.initial_ = initial_;
        m.state_begin_.assign(n + 1, 0);
        m.choice_trans_begin_.push_back(0);
        m.transitions_.reserve(entries.size());

        std::size_t i = 0;
        for (std::size_t s = 0; s < n; ++s) {
            m.state_begin_[s] = m.choice_action_.size();
            if (i == entries.size() || entries[i].s != s) {
                throw ModelError("state " + std::to_string(s) + " has no enabled action");
            }
            while (i < entries.size() && entries[i].s == s) {
                const ActionId a = entries[i].a;
                double sum = 0.0;
                while (i < entries.size() && entries[i].s == s && entries[i].a == a) {
                    if (!m.transitions_.empty() && m.transitions_.size() > m.choice_trans_begin_.back() &&
                        m.transitions_.back().target == entries[i].t) {
                        throw ModelError("duplicate transition " + std::to_string(s) + " " + std::to_string(a) +
                                         " " + std::to_string(entries[i].t));
                    }
                    m.transitions_.push_back({entries[i].t, entries[i].p});
                    sum += entries[i].p;
                    ++i;
                }
                if (std::abs(sum - 1.0) > kDistributionTolerance) {
                    throw ModelError("distribution of state " + std::to_string(s) + " action " +
                                     std::to_string(a) + " sums to " + format_sum(sum));
                }
                m.choice_action_.push_back(a);
                m.choice_cost_.push_back(0.0);
                m.choice_trans_begin_.push_back(m.transitions_.size());
            }
        }
        m.state_begin_[n] = m.choice_action_.size();

        for (const auto& c : costs_) {
            if (c.s >= n) throw ModelError("dangling state index in cost entry " + std::to_string(c.s));
            if (!(c.c >= 0.0) || !std::isfinite(c.c)) {
                throw ModelError("cost of state " + std::to_string(c.s) + " action " + std::to_string(c.a) +
                                 " must be finite and nonnegative");
            }
            auto choice = m.find_choice(c.s, c.a);
            if (!choice) {
                throw ModelError("cost given for state " + std::to_string(c.s) + " action " + std::to_string(c.a) +
                                 " which has no transitions");
            }
            m.choice_cost_[*choice] = c.c;
        }

        for (auto [name, states] : labels_) {
            for (StateIndex s : states) {
                if (s >= n) throw ModelError("label '" + name + "' refers to missing state " + std::to_string(s));
            }
            std::sort(states.begin(), states.end());
            states.erase(std::unique(states.begin(), states.end()), states.end());
            m.labels_.emplace(name, std::move(states));
        }
        m.aliases_ = aliases_;
        return m;
    }

private:
    struct Entry {
        StateIndex s;
        ActionId a;
        StateIndex t;
        double p;
    };
    struct CostEntry {
        StateIndex s;
        ActionId a;
        double c;
    };

    static std::string format_sum(double sum) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", sum);
        return buf;
    }

    std::size_t num_states_;
    StateIndex initial_ = 0;
    std::vector<Entry> entries_;
    std::vector<CostEntry> costs_;
    std::map<std::string, std::vector<StateIndex>> labels_;
    std::map<ActionId, std::string> aliases_;
};

/// Goal membership mask for an objective; throws if the goal label is missing or empty.
inline std::vector<char> goal_mask(const Mdp& mdp, const Objective& objective) {
    if (mdp.label(objective.goal_label).empty()) {
        throw ModelError("goal label '" + objective.goal_label + "' is missing or empty");
    }
    return mdp.label_mask(objective.goal_label);
}

}  // namespace sharp
