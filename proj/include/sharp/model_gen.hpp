#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sharp/features.hpp"
#include "sharp/mdp.hpp"

namespace sharp {

enum class WarehouseLayout { NW, SW, MW, RandMW };
enum class WarehouseVariant { PMax, RMin };

inline WarehouseLayout parse_layout(const std::string& text) {
    if (text == "nw") return WarehouseLayout::NW;
    if (text == "sw") return WarehouseLayout::SW;
    if (text == "mw") return WarehouseLayout::MW;
    if (text == "randmw") return WarehouseLayout::RandMW;
    throw std::invalid_argument("unknown layout '" + text + "' (expected nw, sw, mw or randmw)");
}

inline std::string to_string(WarehouseLayout layout) {
    switch (layout) {
        case WarehouseLayout::NW: return "nw";
        case WarehouseLayout::SW: return "sw";
        case WarehouseLayout::MW: return "mw";
        case WarehouseLayout::RandMW: return "randmw";
    }
    return "?";
}

/// Square warehouse: start (0,0), goal (n-1,n-1), four moves per cell.
struct WarehouseSpec {
    std::size_t n = 8;
    WarehouseLayout layout = WarehouseLayout::NW;
    WarehouseVariant variant = WarehouseVariant::RMin;
    double p_succ = 0.9;   // PMax: intended move
    double p_fail = 5e-4;  // PMax: drop into the sink
    double p_move = 0.8;   // RMin: intended move, otherwise stay
    std::uint64_t seed = 0;
    std::size_t wall_count = 8;  // RandMW only

    void validate() const {
        if (n < 2) throw std::invalid_argument("warehouse side must be at least 2");
        if (variant == WarehouseVariant::PMax) {
            if (!(p_succ > 0.0) || !(p_fail >= 0.0) || p_succ + p_fail > 1.0) {
                throw std::invalid_argument("need p_succ > 0, p_fail >= 0 and p_succ + p_fail <= 1");
            }
        } else if (!(p_move > 0.0 && p_move <= 1.0)) {
            throw std::invalid_argument("p_move must lie in (0,1]");
        }
    }
};

struct GeneratedModel {
    Mdp mdp;
    StateFeatures features;
    /// Objective the model was built for.
    Objective objective;
};

enum WarehouseAction : ActionId { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

namespace detail {

inline bool free_cells_connected(const std::vector<char>& wall, std::size_t n) {
    std::vector<char> seen(n * n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const std::size_t c = stack.back();
        stack.pop_back();
        const std::size_t x = c % n;
        const std::size_t y = c / n;
        const std::size_t next[4] = {y + 1 < n ? c + n : c, y > 0 ? c - n : c, x > 0 ? c - 1 : c, x + 1 < n ? c + 1 : c};
        for (std::size_t d : next) {
            if (!wall[d] && !seen[d]) {
                seen[d] = 1;
                ++reached;
                stack.push_back(d);
            }
        }
    }
    std::size_t free = 0;
    for (char w : wall) free += w ? 0 : 1;
    return reached == free;
}

/// Wall cells indexed y * n + x. Vertical walls at fixed columns span rows
/// 1..n-2, leaving one-cell gaps at the bottom and top rows.
inline std::vector<char> wall_cells(const WarehouseSpec& spec) {
    const std::size_t n = spec.n;
    std::vector<char> wall(n * n, 0);
    auto vertical = [&](std::size_t column) {
        if (column == 0 || column + 1 >= n) return;
        for (std::size_t y = 1; y + 1 < n; ++y) wall[y * n + column] = 1;
    };
    switch (spec.layout) {
        case WarehouseLayout::NW: break;
        case WarehouseLayout::SW: vertical(n / 2); break;
        case WarehouseLayout::MW:
            vertical(n / 4);
            vertical(n / 2);
            vertical(3 * n / 4);
            break;
        case WarehouseLayout::RandMW: {
            // Raw engine output only, so the layout does not depend on the
            // standard library's distribution implementations.
            std::mt19937_64 rng(spec.seed);
            const std::size_t max_len = std::max<std::size_t>(2, n / 4);
            std::size_t placed = 0;
            for (std::size_t attempt = 0; placed < spec.wall_count && attempt < 100 * (spec.wall_count + 1); ++attempt) {
                const bool horizontal = rng() & 1u;
                const std::size_t len = 2 + rng() % (max_len - 1);
                const std::size_t x0 = rng() % n;
                const std::size_t y0 = rng() % n;
                std::vector<std::size_t> cells;
                for (std::size_t k = 0; k < len; ++k) {
                    const std::size_t x = horizontal ? x0 + k : x0;
                    const std::size_t y = horizontal ? y0 : y0 + k;
                    if (x >= n || y >= n) break;
                    const std::size_t c = y * n + x;
                    if (c == 0 || c == n * n - 1 || wall[c]) continue;
                    cells.push_back(c);
                }
                if (cells.empty()) continue;
                for (std::size_t c : cells) wall[c] = 1;
                if (free_cells_connected(wall, n)) {
                    ++placed;
                } else {
                    for (std::size_t c : cells) wall[c] = 0;
                }
            }
            break;
        }
    }
    return wall;
}

}  // namespace detail

/// Warehouse grid. States are free cells in row-major order (y, then x) plus,
/// for PMax, a trailing sink. Features "x" and "y" are set on cells only.
///
/// PMax: intended cell with p_succ, stay with 1 - p_succ - p_fail, sink with
/// p_fail. RMin: intended cell with p_move, stay otherwise, cost 1 per action.
/// Moves into a wall or off the grid merge into the stay outcome. Goal and sink
/// have a single zero-cost self-loop.
inline GeneratedModel generate_warehouse(const WarehouseSpec& spec) {
    spec.validate();
    const std::size_t n = spec.n;
    const auto wall = detail::wall_cells(spec);
    if (!detail::free_cells_connected(wall, n)) throw ModelError("wall layout disconnects start from goal");

    std::vector<std::int64_t> index(n * n, -1);
    std::size_t count = 0;
    for (std::size_t c = 0; c < n * n; ++c)
        if (!wall[c]) index[c] = static_cast<std::int64_t>(count++);
    const bool pmax = spec.variant == WarehouseVariant::PMax;
    const std::size_t num_states = count + (pmax ? 1 : 0);
    const auto sink = static_cast<StateIndex>(count);
    const auto goal = static_cast<StateIndex>(index[n * n - 1]);

    MdpBuilder b(num_states);
    StateFeatures features(num_states);
    b.set_initial(static_cast<StateIndex>(index[0]));
    b.set_alias(kUp, "up");
    b.set_alias(kDown, "down");
    b.set_alias(kLeft, "left");
    b.set_alias(kRight, "right");
    b.add_label("goal", goal);
    if (pmax) b.add_label("sink", sink);

    const double stay = pmax ? 1.0 - spec.p_succ - spec.p_fail : 1.0 - spec.p_move;
    const double move = pmax ? spec.p_succ : spec.p_move;
    for (std::size_t c = 0; c < n * n; ++c) {
        if (wall[c]) continue;
        const auto s = static_cast<StateIndex>(index[c]);
        const std::size_t x = c % n;
        const std::size_t y = c / n;
        features.set("x", s, static_cast<std::int64_t>(x));
        features.set("y", s, static_cast<std::int64_t>(y));
        if (s == goal) {
            b.add_transition(s, 0, s, 1.0);
            continue;
        }
        const std::size_t neighbour[4] = {y + 1 < n ? c + n : c, y > 0 ? c - n : c, x > 0 ? c - 1 : c,
                                          x + 1 < n ? c + 1 : c};
        for (ActionId a = 0; a < 4; ++a) {
            const std::size_t d = wall[neighbour[a]] ? c : neighbour[a];
            const auto t = static_cast<StateIndex>(index[d]);
            if (t == s) {
                b.add_transition(s, a, s, move + stay);
            } else {
                b.add_transition(s, a, t, move);
                b.add_transition(s, a, s, stay);
            }
            if (pmax) {
                b.add_transition(s, a, sink, spec.p_fail);
            } else {
                b.set_cost(s, a, 1.0);
            }
        }
    }
    if (pmax) b.add_transition(sink, 0, sink, 1.0);
    Objective objective{pmax ? ObjectiveKind::PMax : ObjectiveKind::RMin, "goal", {}};
    return {b.build(), std::move(features), std::move(objective)};
}

/// Sequential arenas: arena i's local chain must be completed before arena i+1
/// starts; completing the last arena reaches "finished".
struct ArenaSpec {
    std::size_t k = 2;
    std::size_t arena_size = 8;
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1) throw std::invalid_argument("need at least one arena");
        if (arena_size < 2) throw std::invalid_argument("arena size must be at least 2");
    }
};

/// Action 0 steps forward with probability in [8/16, 13/16] and otherwise stays.
/// Action 1 jumps two ahead with probability in [4/16, 7/16], falls back one with
/// probability in [1/16, 3/16], and otherwise stays. All probabilities are
/// multiples of 1/16, so every distribution sums to exactly 1. Unit costs.
/// Features: "arena" (k on the finished state) and "local".
inline GeneratedModel generate_arenas(const ArenaSpec& spec) {
    spec.validate();
    const std::size_t m = spec.arena_size;
    const std::size_t num_states = spec.k * m + 1;
    const auto finished = static_cast<StateIndex>(spec.k * m);
    auto advance = [&](std::size_t i, std::size_t j, std::size_t steps) -> StateIndex {
        if (j + steps < m) return static_cast<StateIndex>(i * m + j + steps);
        if (i + 1 < spec.k) return static_cast<StateIndex>((i + 1) * m);
        return finished;
    };

    std::mt19937_64 rng(spec.seed);
    MdpBuilder b(num_states);
    StateFeatures features(num_states);
    b.set_initial(0);
    b.set_alias(0, "step");
    b.set_alias(1, "jump");
    b.add_label("finished", finished);
    for (std::size_t i = 0; i < spec.k; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const auto s = static_cast<StateIndex>(i * m + j);
            features.set("arena", s, static_cast<std::int64_t>(i));
            features.set("local", s, static_cast<std::int64_t>(j));

            const double step = static_cast<double>(8 + rng() % 6) / 16.0;
            b.add_transition(s, 0, advance(i, j, 1), step);
            b.add_transition(s, 0, s, 1.0 - step);
            b.set_cost(s, 0, 1.0);

            std::map<StateIndex, double> jump;
            const double ahead = static_cast<double>(4 + rng() % 4) / 16.0;
            const double back = static_cast<double>(1 + rng() % 3) / 16.0;
            jump[advance(i, j, 2)] += ahead;
            jump[j > 0 ? static_cast<StateIndex>(s - 1) : s] += back;
            jump[s] += 1.0 - ahead - back;
            for (const auto& [t, p] : jump) b.add_transition(s, 1, t, p);
            b.set_cost(s, 1, 1.0);
        }
    }
    features.set("arena", finished, static_cast<std::int64_t>(spec.k));
    features.set("local", finished, 0);
    b.add_transition(finished, 0, finished, 1.0);
    return {b.build(), std::move(features), Objective{ObjectiveKind::RMin, "finished", {}}};
}

/// Parses generator strings such as `warehouse:n=64:layout=nw:variant=rmin` or
/// `arenas:k=4:size=16:seed=3`.
inline GeneratedModel generate_from_string(const std::string& text) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto colon = text.find(':', start);
        parts.push_back(text.substr(start, colon - start));
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    std::map<std::string, std::string> kv;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        const auto eq = parts[i].find('=');
        if (eq == std::string::npos) throw std::invalid_argument("generator option '" + parts[i] + "' lacks '='");
        kv[parts[i].substr(0, eq)] = parts[i].substr(eq + 1);
    }
    auto take = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    };
    auto finish = [&] {
        if (!kv.empty()) throw std::invalid_argument("unknown generator option '" + kv.begin()->first + "'");
    };

    if (parts[0] == "warehouse") {
        WarehouseSpec spec;
        if (auto v = take("n")) spec.n = std::stoul(*v);
        if (auto v = take("layout")) spec.layout = parse_layout(*v);
        if (auto v = take("variant")) {
            if (*v == "pmax") spec.variant = WarehouseVariant::PMax;
            else if (*v == "rmin") spec.variant = WarehouseVariant::RMin;
            else throw std::invalid_argument("unknown variant '" + *v + "'");
        }
        if (auto v = take("p_succ")) spec.p_succ = std::stod(*v);
        if (auto v = take("p_fail")) spec.p_fail = std::stod(*v);
        if (auto v = take("p_move")) spec.p_move = std::stod(*v);
        if (auto v = take("seed")) spec.seed = std::stoull(*v);
        if (auto v = take("walls")) spec.wall_count = std::stoul(*v);
        finish();
        return generate_warehouse(spec);
    }
    if (parts[0] == "arenas") {
        ArenaSpec spec;
        if (auto v = take("k")) spec.k = std::stoul(*v);
        if (auto v = take("size")) spec.arena_size = std::stoul(*v);
        if (auto v = take("seed")) spec.seed = std::stoull(*v);
        finish();
        return generate_arenas(spec);
    }
    throw std::invalid_argument("unknown generator '" + parts[0] + "' (expected warehouse or arenas)");
}

}  // namespace sharp
