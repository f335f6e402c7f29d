#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sharp/mdp.hpp"

namespace sharp {

/// Integer features attached to states (grid coordinates, stage counters).
/// A state may lack a feature; the PMax sink of a warehouse has no coordinates.
class StateFeatures {
public:
    StateFeatures() = default;
    explicit StateFeatures(std::size_t num_states) : num_states_(num_states) {}

    std::size_t num_states() const { return num_states_; }
    void resize(std::size_t n) {
        num_states_ = n;
        for (auto& [name, column] : columns_) column.resize(n);
    }

    void set(const std::string& name, StateIndex s, std::int64_t value) {
        auto& column = columns_[name];
        if (column.size() < num_states_) column.resize(num_states_);
        column.at(s) = value;
    }

    std::optional<std::int64_t> get(const std::string& name, StateIndex s) const {
        auto it = columns_.find(name);
        if (it == columns_.end() || s >= it->second.size()) return std::nullopt;
        return it->second[s];
    }

    bool has(const std::string& name) const { return columns_.count(name) != 0; }
    const std::map<std::string, std::vector<std::optional<std::int64_t>>>& columns() const { return columns_; }

    friend bool operator==(const StateFeatures&, const StateFeatures&) = default;

private:
    std::size_t num_states_ = 0;
    std::map<std::string, std::vector<std::optional<std::int64_t>>> columns_;
};

/// Writes `FEATURE <name> <s> <value>` lines, features by name then states ascending.
inline void write_features(const StateFeatures& features, std::ostream& out) {
    for (const auto& [name, column] : features.columns()) {
        for (std::size_t s = 0; s < column.size(); ++s) {
            if (column[s]) out << "FEATURE " << name << ' ' << s << ' ' << *column[s] << '\n';
        }
    }
}

inline StateFeatures read_features(std::istream& in, std::size_t num_states) {
    StateFeatures features(num_states);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream tokens(line);
        std::string keyword;
        if (!(tokens >> keyword)) continue;
        std::string name;
        long long s = -1;
        long long value = 0;
        std::string extra;
        if (keyword != "FEATURE" || !(tokens >> name >> s >> value) || (tokens >> extra)) {
            throw ModelError("features line " + std::to_string(line_no) + ": expected FEATURE <name> <s> <value>");
        }
        if (s < 0 || static_cast<std::size_t>(s) >= num_states) {
            throw ModelError("features line " + std::to_string(line_no) + ": state index out of range");
        }
        features.set(name, static_cast<StateIndex>(s), value);
    }
    return features;
}

}  // namespace sharp
