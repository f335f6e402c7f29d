#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "sharp/bellman.hpp"
#include "sharp/features.hpp"
#include "sharp/flat_solver.hpp"
#include "sharp/hierarchy.hpp"
#include "sharp/local_solver.hpp"
#include "sharp/mdp.hpp"

namespace sharp {

enum class SpreadMode { Absolute, Normalized };

inline std::string to_string(SpreadMode mode) { return mode == SpreadMode::Absolute ? "absolute" : "normalized"; }

inline SpreadMode parse_spread_mode(const std::string& text) {
    if (text == "absolute") return SpreadMode::Absolute;
    if (text == "normalized") return SpreadMode::Normalized;
    throw std::invalid_argument("unknown spread mode '" + text + "' (expected absolute or normalized)");
}

struct SharpConfig {
    PartitionStrategy strategy = PartitionStrategy::grid(8, 8);
    /// Maximum tree depth D; leaves at depth D are never refined. Initial blocks sit at depth 1.
    std::size_t max_depth = 1;
    double theta = 0.5;
    double epsilon = 1e-6;
    /// Boundary-change threshold; defaults to 1e-3 for PMax and 1e-6 for RMin.
    std::optional<double> eta_thr;
    /// RMin: value a state carries as a boundary pin until a leaf owning it has
    /// been solved. 0 gives plain zero initialisation.
    double unsolved_cost = 1e6;
    double beta = 1e-6;
    SpreadMode spread_mode = SpreadMode::Absolute;
    std::size_t max_passes = 10'000;
    /// Cap on sweeps per local solve; 0 means uncapped.
    std::size_t max_local_iters = 0;
    /// PMax only: refine a leaf only if its average value lies in (0.1, 0.9).
    /// Defaults to on for PMax.
    std::optional<bool> uncertainty_filter;
    IterationMethod local_method = IterationMethod::SyncVI;
    /// Solve the leaves of a pass concurrently against a snapshot of V taken at
    /// pass start, instead of sequentially against the live vector.
    bool parallel = false;
    /// Re-check the partition laws after every pass.
    bool check_partition = true;
    bool check_monotone = false;

    double eta_threshold(const Objective& objective) const {
        return eta_thr.value_or(objective.kind == ObjectiveKind::PMax ? 1e-3 : 1e-6);
    }
    bool filter_enabled(const Objective& objective) const {
        return objective.kind == ObjectiveKind::PMax && uncertainty_filter.value_or(true);
    }

    void validate() const {
        if (max_depth < 1) throw std::invalid_argument("max depth D must be at least 1");
        if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
        if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
        if (eta_thr && !(*eta_thr > 0.0)) throw std::invalid_argument("eta_thr must be positive");
        if (!(unsolved_cost >= 0.0) || std::isinf(unsolved_cost)) {
            throw std::invalid_argument("unsolved_cost must be finite and nonnegative");
        }
        if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
        if (max_passes < 1) throw std::invalid_argument("max_passes must be at least 1");
    }
};

struct PassStats {
    std::size_t pass = 0;
    std::size_t resolved_leaves = 0;
    std::size_t refined_leaves = 0;
    std::size_t leaves = 0;
    double max_change = 0.0;
    double seconds = 0.0;
};

struct SolveReport {
    ValueVector values;
    Policy policy;
    std::size_t passes = 0;
    std::size_t leaf_solve_count = 0;
    std::size_t refinement_count = 0;
    std::size_t leaves = 0;
    std::size_t max_depth_reached = 0;
    double eta_measured = 0.0;
    double global_residual = 0.0;
    bool converged = false;
    std::vector<PassStats> pass_stats;
    std::vector<std::string> warnings;
    double seconds = 0.0;
};

/// Depth-adapted refinement threshold: theta for probabilities,
/// max(0.01, theta / (10 (1 + depth))) for costs.
inline double adapt_threshold(double theta, std::size_t depth, const Objective& objective) {
    if (objective.kind == ObjectiveKind::PMax) return theta;
    return std::max(0.01, theta / (10.0 * (1.0 + static_cast<double>(depth))));
}

namespace detail {

inline double drift(double now, double before) {
    if (now == before) return 0.0;  // also covers inf == inf
    return std::abs(now - before);
}

}  // namespace detail

/// True if the boundary values seen by `node` moved, relative to the snapshot of
/// its last solve, by more than `eta_thr`:
/// ||V|bd - prev||_inf / max(1, ||prev||_inf) > eta_thr. Nodes without boundary
/// never change; nodes never solved always do.
inline bool boundary_changed(const HierarchyNode& node, std::span<const double> global, double eta_thr) {
    if (!node.ever_solved) return true;
    if (node.boundary.empty()) return false;
    double change = 0.0;
    double scale = 1.0;
    for (std::size_t j = 0; j < node.boundary.size(); ++j) {
        change = std::max(change, detail::drift(global[node.boundary[j]], node.prev_boundary[j]));
        if (std::isfinite(node.prev_boundary[j])) scale = std::max(scale, std::abs(node.prev_boundary[j]));
    }
    return change / scale > eta_thr;
}

struct Spread {
    double delta = 0.0;
    double average = 0.0;
    std::size_t count = 0;
};

/// Spread of a leaf's finite values over its unpinned states (those holding a
/// policy entry).
inline Spread value_spread(const HierarchyNode& leaf) {
    Spread out;
    double lo = kInfinity;
    double hi = -kInfinity;
    double sum = 0.0;
    for (std::size_t i = 0; i < leaf.block.size(); ++i) {
        if (!leaf.policy[i] || !std::isfinite(leaf.values[i])) continue;
        lo = std::min(lo, leaf.values[i]);
        hi = std::max(hi, leaf.values[i]);
        sum += leaf.values[i];
        ++out.count;
    }
    if (out.count > 0) {
        out.delta = hi - lo;
        out.average = sum / static_cast<double>(out.count);
    }
    return out;
}

/// Refinement test for a solved leaf: spread score above the depth-adapted
/// threshold, depth below D, leaf still splittable, and (PMax with the filter on)
/// average value inside (0.1, 0.9).
inline bool should_refine(const HierarchyNode& leaf, const Objective& objective, const SharpConfig& config) {
    if (!leaf.is_leaf() || !leaf.splittable || leaf.depth >= config.max_depth) return false;
    const Spread spread = value_spread(leaf);
    if (spread.count == 0) return false;
    const double score = config.spread_mode == SpreadMode::Absolute
                             ? spread.delta
                             : spread.delta / (std::abs(spread.average) + config.beta);
    if (!(score > adapt_threshold(config.theta, leaf.depth, objective))) return false;
    if (config.filter_enabled(objective) && !(spread.average > 0.1 && spread.average < 0.9)) return false;
    return true;
}

/// Copies values and policy bottom-up so every node (and finally the root) holds
/// the entries of the unique leaf owning each state.
inline void propagate_values(HierarchyTree& tree) {
    const auto& nodes = tree.nodes();
    std::vector<char> claimed;
    for (std::size_t id = nodes.size(); id-- > 0;) {
        if (tree.node(id).is_leaf()) continue;
        HierarchyNode& parent = tree.node(id);
        claimed.assign(parent.block.size(), 0);
        std::size_t covered = 0;
        for (std::size_t c : parent.children) {
            const HierarchyNode& child = tree.node(c);
            for (std::size_t i = 0; i < child.block.size(); ++i) {
                auto pos = parent.position(child.block[i]);
                if (!pos) {
                    throw std::logic_error("state " + std::to_string(child.block[i]) + " of node " + std::to_string(c) +
                                           " is not in its parent");
                }
                if (claimed[*pos]) {
                    throw std::logic_error("state " + std::to_string(child.block[i]) + " owned by several children");
                }
                claimed[*pos] = 1;
                ++covered;
                parent.values[*pos] = child.values[i];
                parent.policy[*pos] = child.policy[i];
            }
        }
        if (covered != parent.block.size()) {
            throw std::logic_error("children of node " + std::to_string(id) + " leave states unowned");
        }
    }
}

/// Largest drift between the final values and the boundary values each leaf
/// used in its last solve.
inline double measure_eta(const HierarchyTree& tree, std::span<const double> final_values) {
    double eta = 0.0;
    for (const auto& node : tree.nodes()) {
        if (!node.is_leaf()) continue;
        for (std::size_t j = 0; j < node.boundary.size(); ++j) {
            eta = std::max(eta, detail::drift(final_values[node.boundary[j]], node.prev_boundary[j]));
        }
    }
    return eta;
}

/// Worst |Q(s, sigma(s)) - V_leaf(s)| over a leaf's unpinned states, evaluated on
/// the leaf's own values with its last boundary pins.
inline double local_optimality_gap(const Mdp& mdp, const Objective& objective, const HierarchyNode& leaf) {
    const SubMdp sub = induce_submdp(mdp, leaf.block);
    ValueVector local(sub.num_states());
    std::copy(leaf.values.begin(), leaf.values.end(), local.begin());
    std::copy(leaf.prev_boundary.begin(), leaf.prev_boundary.end(),
              local.begin() + static_cast<std::ptrdiff_t>(leaf.block.size()));
    double gap = 0.0;
    for (std::size_t i = 0; i < leaf.block.size(); ++i) {
        if (!leaf.policy[i]) continue;
        const auto s = static_cast<StateIndex>(i);
        for (std::size_t c = sub.choice_begin(s); c < sub.choice_end(s); ++c) {
            if (sub.action(c) != *leaf.policy[i]) continue;
            gap = std::max(gap, std::abs(choice_value(sub, objective.maximizing(), local, c) - leaf.values[i]));
        }
    }
    return gap;
}

/// Hierarchical solver: partitions the state space, solves each block against
/// pinned boundary values, re-solves blocks whose boundary moved, refines
/// high-spread blocks, and composes the leaf solutions into global values and a
/// global policy.
class SharpEngine {
public:
    SharpEngine(const Mdp& mdp, const Objective& objective, const StateFeatures& features, SharpConfig config)
        : mdp_(mdp), objective_(objective), features_(features), config_(std::move(config)), tree_(mdp.num_states()) {}

    SolveReport solve() {
        using clock = std::chrono::steady_clock;
        const auto started = clock::now();
        config_.validate();
        const double eta_thr = config_.eta_threshold(objective_);

        SolveReport report;
        tree_ = HierarchyTree(mdp_.num_states());
        cache_.clear();
        auto start = pinned_start(mdp_, objective_, false);
        if (objective_.kind == ObjectiveKind::RMin) {
            for (std::size_t s = 0; s < start.values.size(); ++s)
                if (!start.pinned[s]) start.values[s] = config_.unsolved_cost;
        }
        tree_.root().values = std::move(start.values);
        if (start.infinite_states > 0) report.warnings.push_back(infinite_state_warning(start.infinite_states));

        auto first = tree_.add_children(0, initial_partition(mdp_, features_, config_.strategy));
        for (std::size_t id : first) solve_leaf(id, tree_.root().values, report);
        propagate_values(tree_);

        for (std::size_t pass = 1; pass <= config_.max_passes; ++pass) {
            const auto pass_started = clock::now();
            PassStats stats;
            stats.pass = pass;
            const ValueVector old = tree_.root().values;

            const auto leaves = tree_.leaves();
            if (config_.parallel) {
                stats.resolved_leaves = resolve_parallel(leaves, eta_thr, report);
            } else {
                for (std::size_t id : leaves) {
                    if (boundary_changed(tree_.node(id), tree_.root().values, eta_thr)) {
                        solve_leaf(id, tree_.root().values, report);
                        ++stats.resolved_leaves;
                    }
                }
            }
            propagate_values(tree_);

            std::vector<std::size_t> to_refine;
            for (std::size_t id : tree_.leaves())
                if (should_refine(tree_.node(id), objective_, config_)) to_refine.push_back(id);
            for (std::size_t id : to_refine) {
                auto split = refine_block(mdp_, features_, tree_.node(id).block, tree_.node(id).depth, config_.strategy);
                if (!split.splittable) {
                    tree_.node(id).splittable = false;
                    continue;
                }
                cache_[id].reset();
                auto children = tree_.add_children(id, std::move(split.children));
                for (std::size_t c : children) solve_leaf(c, tree_.root().values, report);
                ++stats.refined_leaves;
                ++report.refinement_count;
            }
            propagate_values(tree_);
            if (config_.check_partition) tree_.validate();

            bool pending = false;
            for (std::size_t id : tree_.leaves()) {
                if (boundary_changed(tree_.node(id), tree_.root().values, eta_thr)) {
                    pending = true;
                    break;
                }
            }
            const auto& now = tree_.root().values;
            for (std::size_t s = 0; s < now.size(); ++s) stats.max_change = std::max(stats.max_change, detail::drift(now[s], old[s]));
            stats.leaves = tree_.leaves().size();
            stats.seconds = std::chrono::duration<double>(clock::now() - pass_started).count();
            report.pass_stats.push_back(stats);
            report.passes = pass;

            if (!pending && stats.refined_leaves == 0 && stats.max_change <= config_.epsilon) {
                report.converged = true;
                break;
            }
        }

        report.values = tree_.root().values;
        report.policy = tree_.root().policy;
        report.leaves = tree_.leaves().size();
        report.max_depth_reached = tree_.max_depth();
        report.eta_measured = measure_eta(tree_, report.values);
        report.global_residual = global_residual(mdp_, objective_, report.values);
        if (!report.converged) report.warnings.push_back("pass limit reached before convergence");
        report.seconds = std::chrono::duration<double>(clock::now() - started).count();
        return report;
    }

    const HierarchyTree& tree() const { return tree_; }
    const SharpConfig& config() const { return config_; }

private:
    LocalSolveOptions local_options() const {
        return {config_.epsilon, config_.max_local_iters, config_.local_method, config_.check_monotone};
    }

    SubMdp& sub_for(std::size_t id) {
        if (cache_.size() <= id) cache_.resize(id + 1);
        if (!cache_[id]) cache_[id] = induce_submdp(mdp_, tree_.node(id).block);
        return *cache_[id];
    }

    /// Installs a local solution into the leaf and writes its values through to `global`.
    void install(std::size_t id, const SubMdp& sub, LocalSolution&& sol, ValueVector& global, SolveReport& report) {
        HierarchyNode& node = tree_.node(id);
        const std::size_t m = node.block.size();
        node.values.assign(sol.values.begin(), sol.values.begin() + static_cast<std::ptrdiff_t>(m));
        node.policy = std::move(sol.policy);
        if (node.boundary.size() != sub.boundary().size()) node.boundary.assign(sub.boundary().begin(), sub.boundary().end());
        node.prev_boundary.assign(sub.boundary_pins().begin(), sub.boundary_pins().end());
        node.ever_solved = true;
        node.local_residual = sol.residual;
        node.local_iterations = sol.iterations;
        node.local_converged = sol.converged;
        auto& policy = tree_.root().policy;
        for (std::size_t i = 0; i < m; ++i) {
            global[node.block[i]] = node.values[i];
            policy[node.block[i]] = node.policy[i];
        }
        ++report.leaf_solve_count;
    }

    void solve_leaf(std::size_t id, ValueVector& global, SolveReport& report) {
        SubMdp& sub = sub_for(id);
        assign_boundary_values(sub, mdp_, objective_, global);
        const HierarchyNode& node = tree_.node(id);
        std::span<const double> warm;
        ValueVector from_global;
        if (node.ever_solved) {
            warm = node.values;
        } else if (objective_.kind == ObjectiveKind::RMin && !sub.boundary().empty()) {
            // Costs climb by at most one step cost per sweep from zero, too slow
            // to reach the unsolved pins; start from the current global entries.
            from_global.reserve(node.block.size());
            for (StateIndex s : node.block) from_global.push_back(global[s]);
            warm = from_global;
        }
        auto sol = solve_local(sub, objective_, local_options(), warm);
        install(id, sub, std::move(sol), global, report);
    }

    std::size_t resolve_parallel(const std::vector<std::size_t>& leaves, double eta_thr, SolveReport& report) {
        const ValueVector snapshot = tree_.root().values;
        std::vector<std::size_t> changed;
        for (std::size_t id : leaves)
            if (boundary_changed(tree_.node(id), snapshot, eta_thr)) changed.push_back(id);
        for (std::size_t id : changed) assign_boundary_values(sub_for(id), mdp_, objective_, snapshot);

        std::vector<LocalSolution> solutions(changed.size());
        const std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
        std::vector<std::future<void>> jobs;
        for (std::size_t w = 0; w < workers; ++w) {
            jobs.push_back(std::async(std::launch::async, [&, w] {
                for (std::size_t k = w; k < changed.size(); k += workers) {
                    const HierarchyNode& node = tree_.node(changed[k]);
                    std::span<const double> warm;
                    if (node.ever_solved) warm = node.values;
                    solutions[k] = solve_local(*cache_[changed[k]], objective_, local_options(), warm);
                }
            }));
        }
        for (auto& j : jobs) j.get();
        for (std::size_t k = 0; k < changed.size(); ++k) {
            install(changed[k], *cache_[changed[k]], std::move(solutions[k]), tree_.root().values, report);
        }
        return changed.size();
    }

    const Mdp& mdp_;
    Objective objective_;
    const StateFeatures& features_;
    SharpConfig config_;
    HierarchyTree tree_;
    std::vector<std::optional<SubMdp>> cache_;
};

inline SolveReport sharp_solve(const Mdp& mdp, const Objective& objective, const StateFeatures& features,
                               const SharpConfig& config) {
    SharpEngine engine(mdp, objective, features, config);
    return engine.solve();
}

}  // namespace sharp
