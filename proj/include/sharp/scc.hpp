#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "sharp/mdp.hpp"

namespace sharp {

/// Directed graph in compressed-row form over vertices 0..n-1.
struct Digraph {
    std::vector<std::size_t> offsets{0};
    std::vector<std::uint32_t> targets;

    std::size_t size() const { return offsets.size() - 1; }
    std::span<const std::uint32_t> successors(std::uint32_t v) const {
        return {targets.data() + offsets[v], offsets[v + 1] - offsets[v]};
    }
};

/// Tarjan's algorithm with an explicit stack. Components come out in reverse
/// topological order (every component precedes the components that reach it);
/// members of each component are sorted ascending.
inline std::vector<std::vector<std::uint32_t>> tarjan_sccs(const Digraph& g) {
    constexpr std::uint32_t kUnvisited = UINT32_MAX;
    const auto n = static_cast<std::uint32_t>(g.size());
    std::vector<std::uint32_t> index(n, kUnvisited);
    std::vector<std::uint32_t> lowlink(n, 0);
    std::vector<char> on_stack(n, 0);
    std::vector<std::uint32_t> stack;
    std::vector<std::vector<std::uint32_t>> components;

    struct Frame {
        std::uint32_t v;
        std::size_t next;
    };
    std::vector<Frame> calls;
    std::uint32_t counter = 0;

    for (std::uint32_t root = 0; root < n; ++root) {
        if (index[root] != kUnvisited) continue;
        calls.push_back({root, g.offsets[root]});
        index[root] = lowlink[root] = counter++;
        stack.push_back(root);
        on_stack[root] = 1;

        while (!calls.empty()) {
            Frame& f = calls.back();
            const std::uint32_t v = f.v;
            if (f.next < g.offsets[v + 1]) {
                const std::uint32_t w = g.targets[f.next++];
                if (index[w] == kUnvisited) {
                    index[w] = lowlink[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    calls.push_back({w, g.offsets[w]});
                } else if (on_stack[w]) {
                    lowlink[v] = std::min(lowlink[v], index[w]);
                }
                continue;
            }
            if (lowlink[v] == index[v]) {
                std::vector<std::uint32_t> component;
                std::uint32_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    component.push_back(w);
                } while (w != v);
                std::sort(component.begin(), component.end());
                components.push_back(std::move(component));
            }
            calls.pop_back();
            if (!calls.empty()) {
                const std::uint32_t parent = calls.back().v;
                lowlink[parent] = std::min(lowlink[parent], lowlink[v]);
            }
        }
    }
    return components;
}

/// Transition graph of `block` restricted to edges between its own states, with
/// vertices numbered by position in `block`.
inline Digraph block_graph(const Mdp& mdp, std::span<const StateIndex> block) {
    std::vector<std::int64_t> local(mdp.num_states(), -1);
    for (std::size_t i = 0; i < block.size(); ++i) local[block[i]] = static_cast<std::int64_t>(i);
    Digraph g;
    g.offsets.reserve(block.size() + 1);
    std::vector<std::uint32_t> row;
    for (StateIndex s : block) {
        row.clear();
        for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
            for (const auto& tr : mdp.transitions(c)) {
                if (local[tr.target] >= 0) row.push_back(static_cast<std::uint32_t>(local[tr.target]));
            }
        }
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        g.targets.insert(g.targets.end(), row.begin(), row.end());
        g.offsets.push_back(g.targets.size());
    }
    return g;
}

/// SCCs of the states in `block` using only internal edges, as global state ids.
inline std::vector<std::vector<StateIndex>> compute_sccs(const Mdp& mdp, std::span<const StateIndex> block) {
    auto components = tarjan_sccs(block_graph(mdp, block));
    for (auto& component : components)
        for (auto& v : component) v = block[v];
    for (auto& component : components) std::sort(component.begin(), component.end());
    return components;
}

/// SCCs of the whole transition graph.
inline std::vector<std::vector<StateIndex>> compute_sccs(const Mdp& mdp) {
    std::vector<StateIndex> all(mdp.num_states());
    for (std::size_t s = 0; s < all.size(); ++s) all[s] = static_cast<StateIndex>(s);
    return compute_sccs(mdp, all);
}

}  // namespace sharp
