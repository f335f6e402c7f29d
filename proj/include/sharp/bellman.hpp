#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "sharp/mdp.hpp"

namespace sharp {

/// Anything exposing the compressed-row choice layout of `Mdp`. `SubMdp` models
/// it too, which lets flat and local solves share one sweep implementation.
template <typename M>
concept ChoiceModel = requires(const M& m, StateIndex s, std::size_t c) {
    { m.num_states() } -> std::convertible_to<std::size_t>;
    { m.choice_begin(s) } -> std::convertible_to<std::size_t>;
    { m.choice_end(s) } -> std::convertible_to<std::size_t>;
    { m.action(c) } -> std::convertible_to<ActionId>;
    { m.cost(c) } -> std::convertible_to<double>;
    { m.transitions(c) } -> std::convertible_to<std::span<const Transition>>;
};

enum class IterationMethod { SyncVI, GaussSeidel };

struct Backup {
    double value;
    ActionId action;
};

/// Expected one-step value of a choice. PMax ignores costs; for RMin an infinite
/// successor makes the whole choice infinite.
template <ChoiceModel M>
double choice_value(const M& m, bool maximize, std::span<const double> values, std::size_t c) {
    double sum = 0.0;
    for (const auto& tr : m.transitions(c)) sum += tr.probability * values[tr.target];
    return maximize ? sum : m.cost(c) + sum;
}

/// Bellman backup at one state; ties go to the lowest action id.
template <ChoiceModel M>
Backup bellman_backup(const M& m, bool maximize, std::span<const double> values, StateIndex s) {
    const std::size_t first = m.choice_begin(s);
    const std::size_t last = m.choice_end(s);
    if (first == last) throw std::logic_error("state " + std::to_string(s) + " has no enabled action");
    Backup best{choice_value(m, maximize, values, first), m.action(first)};
    for (std::size_t c = first + 1; c < last; ++c) {
        const double v = choice_value(m, maximize, values, c);
        if (maximize ? v > best.value : v < best.value) best = {v, m.action(c)};
    }
    return best;
}

struct IterationResult {
    ValueVector values;
    Policy policy;
    std::size_t iterations = 0;
    /// Sup-norm change of the last sweep.
    double residual = 0.0;
    bool converged = false;
};

/// Value iteration over all non-pinned states of `m`, starting from `start`.
///
/// Stops once a sweep changes no value by `epsilon` or more, or after
/// `max_iterations` sweeps. Pinned entries of `start` are never touched.
template <ChoiceModel M>
IterationResult iterate_values(const M& m, bool maximize, ValueVector start, const std::vector<char>& pinned,
                               double epsilon, std::size_t max_iterations, IterationMethod method,
                               bool check_monotone = false) {
    const auto n = static_cast<StateIndex>(m.num_states());
    IterationResult result;
    result.policy.assign(n, std::nullopt);

    std::vector<StateIndex> active;
    active.reserve(n);
    for (StateIndex s = 0; s < n; ++s)
        if (!pinned[s]) active.push_back(s);
    if (active.empty()) {
        result.values = std::move(start);
        result.converged = true;
        return result;
    }

    ValueVector cur = std::move(start);
    ValueVector next;
    if (method == IterationMethod::SyncVI) next = cur;

    while (result.iterations < max_iterations) {
        double diff = 0.0;
        if (method == IterationMethod::SyncVI) {
            for (StateIndex s : active) {
                const Backup b = bellman_backup(m, maximize, cur, s);
                next[s] = b.value;
                result.policy[s] = b.action;
                const double d = std::abs(b.value - cur[s]);
                if (d > diff || std::isnan(d)) diff = d;
                if (check_monotone && b.value < cur[s]) {
                    throw std::logic_error("value iteration decreased the value of state " + std::to_string(s));
                }
            }
            cur.swap(next);
        } else {
            for (StateIndex s : active) {
                const Backup b = bellman_backup(m, maximize, cur, s);
                const double d = std::abs(b.value - cur[s]);
                if (d > diff || std::isnan(d)) diff = d;
                if (check_monotone && b.value < cur[s]) {
                    throw std::logic_error("value iteration decreased the value of state " + std::to_string(s));
                }
                cur[s] = b.value;
                result.policy[s] = b.action;
            }
        }
        ++result.iterations;
        result.residual = diff;
        if (diff < epsilon) {
            result.converged = true;
            break;
        }
    }
    result.values = std::move(cur);
    return result;
}

/// Largest change one synchronous sweep would make over non-pinned states.
/// Pinned states and infinite values are skipped.
template <ChoiceModel M>
double bellman_residual(const M& m, bool maximize, std::span<const double> values, const std::vector<char>& pinned) {
    const auto n = static_cast<StateIndex>(m.num_states());
    double worst = 0.0;
    for (StateIndex s = 0; s < n; ++s) {
        if (pinned[s] || std::isinf(values[s])) continue;
        const double d = std::abs(bellman_backup(m, maximize, values, s).value - values[s]);
        worst = std::max(worst, d);
    }
    return worst;
}

}  // namespace sharp
