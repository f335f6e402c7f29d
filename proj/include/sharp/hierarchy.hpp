#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "sharp/features.hpp"
#include "sharp/mdp.hpp"
#include "sharp/scc.hpp"

namespace sharp {

/// Sorted, nonempty set of states.
using Block = std::vector<StateIndex>;

struct GridPartition {
    int nx = 8;
    int ny = 8;
};
struct SccPartition {};
struct CounterPartition {
    std::string feature;
    std::int64_t width = 1;
};

/// Most blocks the SCC strategy groups the initial decomposition into.
inline constexpr std::size_t kSccInitialBlocks = 64;
/// Most children an SCC refinement produces.
inline constexpr std::size_t kSccRefineFanout = 4;

/// How the state space is tiled initially and how a block is split on refinement.
///
///  - `grid:NXxNY` tiles the x/y bounding box; refinement splits a block's box at midpoints.
///  - `scc` groups strongly connected components; refinement re-runs SCCs inside the block.
///  - `counter:<feature>:<width>` groups by feature / width; refinement halves the width.
class PartitionStrategy {
public:
    using Kind = std::variant<GridPartition, SccPartition, CounterPartition>;

    PartitionStrategy() : kind_(GridPartition{}) {}
    explicit PartitionStrategy(Kind kind) : kind_(std::move(kind)) { validate(); }

    static PartitionStrategy grid(int nx, int ny) { return PartitionStrategy(GridPartition{nx, ny}); }
    static PartitionStrategy scc() { return PartitionStrategy(SccPartition{}); }
    static PartitionStrategy counter(std::string feature, std::int64_t width) {
        return PartitionStrategy(CounterPartition{std::move(feature), width});
    }

    static PartitionStrategy parse(const std::string& text) {
        auto bad = [&] { return std::invalid_argument("invalid partition strategy '" + text + "'"); };
        if (text == "scc") return scc();
        if (text.rfind("grid:", 0) == 0) {
            const std::string dims = text.substr(5);
            const auto x = dims.find('x');
            if (x == std::string::npos) throw bad();
            try {
                std::size_t used_a = 0;
                std::size_t used_b = 0;
                const int nx = std::stoi(dims.substr(0, x), &used_a);
                const int ny = std::stoi(dims.substr(x + 1), &used_b);
                if (used_a != x || used_b != dims.size() - x - 1) throw bad();
                return grid(nx, ny);
            } catch (const std::logic_error&) {
                throw bad();
            }
        }
        if (text.rfind("counter:", 0) == 0) {
            const std::string rest = text.substr(8);
            const auto colon = rest.rfind(':');
            if (colon == std::string::npos || colon == 0) throw bad();
            try {
                std::size_t used = 0;
                const long long width = std::stoll(rest.substr(colon + 1), &used);
                if (used != rest.size() - colon - 1) throw bad();
                return counter(rest.substr(0, colon), width);
            } catch (const std::logic_error&) {
                throw bad();
            }
        }
        throw bad();
    }

    std::string to_string() const {
        if (auto g = std::get_if<GridPartition>(&kind_)) {
            return "grid:" + std::to_string(g->nx) + "x" + std::to_string(g->ny);
        }
        if (std::holds_alternative<SccPartition>(kind_)) return "scc";
        const auto& c = std::get<CounterPartition>(kind_);
        return "counter:" + c.feature + ":" + std::to_string(c.width);
    }

    const Kind& kind() const { return kind_; }

private:
    void validate() const {
        if (auto g = std::get_if<GridPartition>(&kind_)) {
            if (g->nx < 1 || g->ny < 1) throw std::invalid_argument("grid dimensions must be at least 1");
        } else if (auto c = std::get_if<CounterPartition>(&kind_)) {
            if (c->width < 1) throw std::invalid_argument("counter group width must be at least 1");
            if (c->feature.empty()) throw std::invalid_argument("counter partition needs a feature name");
        }
    }

    Kind kind_;
};

namespace detail {

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

/// Splits consecutive components into at most `max_groups` blocks of near-equal
/// state count; component order is preserved.
inline std::vector<Block> group_components(const std::vector<std::vector<StateIndex>>& components,
                                           std::size_t max_groups) {
    std::size_t total = 0;
    for (const auto& c : components) total += c.size();
    std::vector<Block> groups;
    std::size_t before = 0;
    std::size_t current = SIZE_MAX;
    for (const auto& c : components) {
        const std::size_t slot = std::min(max_groups - 1, before * max_groups / total);
        if (slot != current) {
            groups.emplace_back();
            current = slot;
        }
        groups.back().insert(groups.back().end(), c.begin(), c.end());
        before += c.size();
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    return groups;
}

struct Coordinates {
    std::int64_t x;
    std::int64_t y;
};

inline std::optional<Coordinates> coordinates(const StateFeatures& features, StateIndex s) {
    auto x = features.get("x", s);
    auto y = features.get("y", s);
    if (!x || !y) return std::nullopt;
    return Coordinates{*x, *y};
}

}  // namespace detail

/// Blocks of the first hierarchy level. They are nonempty, pairwise disjoint and
/// cover every state. Grid places states without coordinates in a trailing
/// overflow block.
inline std::vector<Block> initial_partition(const Mdp& mdp, const StateFeatures& features,
                                            const PartitionStrategy& strategy) {
    const auto n = static_cast<StateIndex>(mdp.num_states());
    if (n == 0) throw std::invalid_argument("cannot partition an empty state space");

    if (auto grid = std::get_if<GridPartition>(&strategy.kind())) {
        std::int64_t x0 = INT64_MAX, x1 = INT64_MIN, y0 = INT64_MAX, y1 = INT64_MIN;
        Block overflow;
        std::vector<std::optional<detail::Coordinates>> coords(n);
        for (StateIndex s = 0; s < n; ++s) {
            coords[s] = detail::coordinates(features, s);
            if (!coords[s]) {
                overflow.push_back(s);
                continue;
            }
            x0 = std::min(x0, coords[s]->x);
            x1 = std::max(x1, coords[s]->x);
            y0 = std::min(y0, coords[s]->y);
            y1 = std::max(y1, coords[s]->y);
        }
        if (overflow.size() == n) throw std::invalid_argument("grid partition requires features 'x' and 'y'");
        const std::int64_t width = x1 - x0 + 1;
        const std::int64_t height = y1 - y0 + 1;
        std::vector<Block> tiles(static_cast<std::size_t>(grid->nx) * static_cast<std::size_t>(grid->ny));
        for (StateIndex s = 0; s < n; ++s) {
            if (!coords[s]) continue;
            const std::int64_t tx = (coords[s]->x - x0) * grid->nx / width;
            const std::int64_t ty = (coords[s]->y - y0) * grid->ny / height;
            tiles[static_cast<std::size_t>(ty * grid->nx + tx)].push_back(s);
        }
        std::vector<Block> blocks;
        for (auto& t : tiles)
            if (!t.empty()) blocks.push_back(std::move(t));
        if (!overflow.empty()) blocks.push_back(std::move(overflow));
        return blocks;
    }

    if (std::holds_alternative<SccPartition>(strategy.kind())) {
        return detail::group_components(compute_sccs(mdp), kSccInitialBlocks);
    }

    const auto& counter = std::get<CounterPartition>(strategy.kind());
    std::map<std::int64_t, Block> groups;
    for (StateIndex s = 0; s < n; ++s) {
        auto v = features.get(counter.feature, s);
        if (!v) {
            throw std::invalid_argument("counter partition: state " + std::to_string(s) + " lacks feature '" +
                                        counter.feature + "'");
        }
        groups[detail::floor_div(*v, counter.width)].push_back(s);
    }
    std::vector<Block> blocks;
    for (auto& [key, block] : groups) blocks.push_back(std::move(block));
    return blocks;
}

struct Refinement {
    std::vector<Block> children;
    /// False when the strategy cannot split the block; `children` is then `{block}`.
    bool splittable = true;
};

/// Splits `block` (a node at `depth`) with the strategy's refinement rule.
inline Refinement refine_block(const Mdp& mdp, const StateFeatures& features, const Block& block, std::size_t depth,
                               const PartitionStrategy& strategy) {
    const Refinement unsplittable{{block}, false};
    if (block.size() < 2) return unsplittable;

    std::vector<Block> children;
    if (std::holds_alternative<GridPartition>(strategy.kind())) {
        std::int64_t x0 = INT64_MAX, x1 = INT64_MIN, y0 = INT64_MAX, y1 = INT64_MIN;
        Block no_coords;
        for (StateIndex s : block) {
            auto c = detail::coordinates(features, s);
            if (!c) {
                no_coords.push_back(s);
                continue;
            }
            x0 = std::min(x0, c->x);
            x1 = std::max(x1, c->x);
            y0 = std::min(y0, c->y);
            y1 = std::max(y1, c->y);
        }
        if (no_coords.size() == block.size()) return unsplittable;
        const std::int64_t mx = (x0 + x1 + 1) / 2;
        const std::int64_t my = (y0 + y1 + 1) / 2;
        std::vector<Block> quads(4);
        for (StateIndex s : block) {
            auto c = detail::coordinates(features, s);
            if (!c) continue;
            const int qx = (x1 > x0 && c->x >= mx) ? 1 : 0;
            const int qy = (y1 > y0 && c->y >= my) ? 1 : 0;
            quads[static_cast<std::size_t>(qy * 2 + qx)].push_back(s);
        }
        for (auto& q : quads)
            if (!q.empty()) children.push_back(std::move(q));
        if (!no_coords.empty()) children.push_back(std::move(no_coords));
    } else if (std::holds_alternative<SccPartition>(strategy.kind())) {
        auto components = compute_sccs(mdp, block);
        if (components.size() < 2) return unsplittable;
        children = detail::group_components(components, kSccRefineFanout);
    } else {
        const auto& counter = std::get<CounterPartition>(strategy.kind());
        const std::int64_t width = std::max<std::int64_t>(1, counter.width >> std::min<std::size_t>(depth, 62));
        std::map<std::int64_t, Block> groups;
        for (StateIndex s : block) {
            auto v = features.get(counter.feature, s);
            if (!v) {
                throw std::invalid_argument("counter partition: state " + std::to_string(s) + " lacks feature '" +
                                            counter.feature + "'");
            }
            groups[detail::floor_div(*v, width)].push_back(s);
        }
        for (auto& [key, g] : groups) children.push_back(std::move(g));
    }
    if (children.size() < 2) return unsplittable;
    return {std::move(children), true};
}

/// One node of the hierarchy tree. Leaves carry solve metadata.
struct HierarchyNode {
    std::size_t id = 0;
    Block block;
    std::size_t depth = 0;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;

    /// Values and policy over `block`, aligned by position.
    ValueVector values;
    Policy policy;

    /// Boundary states of the last local solve and the values pinned on them.
    std::vector<StateIndex> boundary;
    ValueVector prev_boundary;
    bool ever_solved = false;
    double local_residual = 0.0;
    std::size_t local_iterations = 0;
    bool local_converged = false;
    bool splittable = true;

    bool is_leaf() const { return children.empty(); }

    /// Position of `s` within `block`, if present.
    std::optional<std::size_t> position(StateIndex s) const {
        auto it = std::lower_bound(block.begin(), block.end(), s);
        if (it == block.end() || *it != s) return std::nullopt;
        return static_cast<std::size_t>(it - block.begin());
    }
};

/// Rooted tree whose children partition their parent's block; node ids are
/// creation order and index `nodes()`.
class HierarchyTree {
public:
    explicit HierarchyTree(std::size_t num_states) {
        HierarchyNode root;
        root.block.resize(num_states);
        for (std::size_t s = 0; s < num_states; ++s) root.block[s] = static_cast<StateIndex>(s);
        root.values.assign(num_states, 0.0);
        root.policy.assign(num_states, std::nullopt);
        nodes_.push_back(std::move(root));
    }

    std::size_t num_states() const { return nodes_[0].block.size(); }
    HierarchyNode& root() { return nodes_[0]; }
    const HierarchyNode& root() const { return nodes_[0]; }
    HierarchyNode& node(std::size_t id) { return nodes_.at(id); }
    const HierarchyNode& node(std::size_t id) const { return nodes_.at(id); }
    const std::vector<HierarchyNode>& nodes() const { return nodes_; }

    /// Attaches `blocks` as children of `parent`; returns the new node ids.
    std::vector<std::size_t> add_children(std::size_t parent, std::vector<Block> blocks) {
        std::vector<std::size_t> ids;
        for (auto& b : blocks) {
            HierarchyNode child;
            child.id = nodes_.size();
            child.block = std::move(b);
            child.depth = nodes_[parent].depth + 1;
            child.parent = parent;
            child.values.assign(child.block.size(), 0.0);
            child.policy.assign(child.block.size(), std::nullopt);
            ids.push_back(child.id);
            nodes_.push_back(std::move(child));
            nodes_[parent].children.push_back(ids.back());
        }
        return ids;
    }

    /// Leaf ids in ascending order.
    std::vector<std::size_t> leaves() const {
        std::vector<std::size_t> out;
        for (const auto& n : nodes_)
            if (n.is_leaf()) out.push_back(n.id);
        return out;
    }

    std::size_t max_depth() const {
        std::size_t d = 0;
        for (const auto& n : nodes_) d = std::max(d, n.depth);
        return d;
    }

    /// Throws `std::logic_error` unless every internal node's children are
    /// nonempty, pairwise disjoint, cover the parent block, and sit one level
    /// deeper, and the root covers all states.
    void validate() const {
        const auto n = num_states();
        for (std::size_t s = 0; s < n; ++s) {
            if (nodes_[0].block[s] != s) throw std::logic_error("root block does not equal the state space");
        }
        std::vector<std::size_t> owner(n, SIZE_MAX);
        for (const auto& node : nodes_) {
            if (node.is_leaf()) continue;
            std::size_t covered = 0;
            for (std::size_t c : node.children) {
                const auto& child = nodes_[c];
                if (child.block.empty()) throw std::logic_error("empty block at node " + std::to_string(c));
                if (child.depth != node.depth + 1) throw std::logic_error("bad depth at node " + std::to_string(c));
                for (StateIndex s : child.block) {
                    if (!node.position(s)) {
                        throw std::logic_error("node " + std::to_string(c) + " holds a state outside its parent");
                    }
                    if (owner[s] == node.id) {
                        throw std::logic_error("state " + std::to_string(s) + " owned by two children of node " +
                                               std::to_string(node.id));
                    }
                    owner[s] = node.id;
                    ++covered;
                }
            }
            if (covered != node.block.size()) {
                throw std::logic_error("children of node " + std::to_string(node.id) + " do not cover its block");
            }
        }
    }

private:
    std::vector<HierarchyNode> nodes_;
};

}  // namespace sharp
