#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "sharp/mdp.hpp"

namespace sharp {

/// Syntax or validation failure in an explicit model file.
class ParseError : public ModelError {
public:
    ParseError(std::size_t line, const std::string& message)
        : ModelError("line " + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

namespace detail {

template <typename T>
bool parse_number(std::string_view token, T& out) {
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

inline std::vector<std::string_view> split_tokens(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) tokens.push_back(line.substr(i, j - i));
        i = j;
    }
    return tokens;
}

inline std::string format_real(double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

}  // namespace detail

/// Reads the line-oriented explicit format:
///
///     STATES <n>
///     INITIAL <i>
///     LABEL <name>: <s1> <s2> ...
///     COST <s> <a> <c>
///     TRANS <s> <a> <t> <p>
///     ALIAS <a> <name>
///
/// `#` starts a comment. Errors carry the offending line number.
inline Mdp parse_model(std::istream& in) {
    struct Group {
        double sum = 0.0;
        std::size_t line = 0;
    };
    struct TransLine {
        StateIndex s;
        ActionId a;
        StateIndex t;
        double p;
        std::size_t line;
    };

    std::optional<std::size_t> num_states;
    std::optional<StateIndex> initial;
    std::size_t initial_line = 0;
    std::vector<TransLine> trans;
    std::map<std::pair<StateIndex, ActionId>, Group> groups;
    std::set<std::tuple<StateIndex, ActionId, StateIndex>> seen;
    std::map<std::pair<StateIndex, ActionId>, std::pair<double, std::size_t>> costs;
    std::map<std::string, std::vector<std::pair<StateIndex, std::size_t>>> labels;
    std::map<ActionId, std::string> aliases;

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string_view line(raw);
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        auto tok = detail::split_tokens(line);
        if (tok.empty()) continue;
        const std::string_view kw = tok[0];

        auto need = [&](std::size_t count, const char* usage) {
            if (tok.size() != count) throw ParseError(line_no, std::string("expected '") + usage + "'");
        };
        auto index = [&](std::string_view t, const char* what) {
            StateIndex v = 0;
            if (!detail::parse_number(t, v)) {
                throw ParseError(line_no, std::string("invalid ") + what + " '" + std::string(t) + "'");
            }
            return v;
        };
        auto real = [&](std::string_view t, const char* what) {
            double v = 0.0;
            if (!detail::parse_number(t, v)) {
                throw ParseError(line_no, std::string("invalid ") + what + " '" + std::string(t) + "'");
            }
            return v;
        };

        if (kw == "STATES") {
            need(2, "STATES <n>");
            if (num_states) throw ParseError(line_no, "STATES given twice");
            num_states = index(tok[1], "state count");
            if (*num_states == 0) throw ParseError(line_no, "model must have at least one state");
        } else if (kw == "INITIAL") {
            need(2, "INITIAL <i>");
            if (initial) throw ParseError(line_no, "INITIAL given twice");
            initial = index(tok[1], "initial state");
            initial_line = line_no;
        } else if (kw == "LABEL") {
            if (tok.size() < 2) throw ParseError(line_no, "expected 'LABEL <name>: <states...>'");
            std::string name(tok[1]);
            std::size_t first_state = 2;
            if (!name.empty() && name.back() == ':') {
                name.pop_back();
            } else if (tok.size() > 2 && tok[2] == ":") {
                first_state = 3;
            } else {
                throw ParseError(line_no, "expected ':' after label name");
            }
            if (name.empty()) throw ParseError(line_no, "empty label name");
            auto& states = labels[name];
            for (std::size_t i = first_state; i < tok.size(); ++i) states.emplace_back(index(tok[i], "state"), line_no);
        } else if (kw == "COST") {
            need(4, "COST <s> <a> <c>");
            const StateIndex s = index(tok[1], "state");
            const ActionId a = index(tok[2], "action");
            const double c = real(tok[3], "cost");
            if (!(c >= 0.0) || !std::isfinite(c)) throw ParseError(line_no, "cost must be finite and nonnegative");
            if (!costs.emplace(std::make_pair(s, a), std::make_pair(c, line_no)).second) {
                throw ParseError(line_no, "duplicate cost for state " + std::to_string(s) + " action " +
                                              std::to_string(a));
            }
        } else if (kw == "TRANS") {
            need(5, "TRANS <s> <a> <t> <p>");
            const StateIndex s = index(tok[1], "state");
            const ActionId a = index(tok[2], "action");
            const StateIndex t = index(tok[3], "target");
            const double p = real(tok[4], "probability");
            if (!(p > 0.0 && p <= 1.0)) throw ParseError(line_no, "probability must lie in (0,1]");
            if (!seen.emplace(s, a, t).second) {
                throw ParseError(line_no, "duplicate transition " + std::to_string(s) + " " + std::to_string(a) +
                                              " " + std::to_string(t));
            }
            auto& g = groups[{s, a}];
            if (g.line == 0) g.line = line_no;
            g.sum += p;
            trans.push_back({s, a, t, p, line_no});
        } else if (kw == "ALIAS") {
            need(3, "ALIAS <a> <name>");
            aliases[index(tok[1], "action")] = std::string(tok[2]);
        } else {
            throw ParseError(line_no, "unknown keyword '" + std::string(kw) + "'");
        }
    }

    if (!num_states) throw ParseError(line_no == 0 ? 1 : line_no, "missing STATES line");
    const std::size_t n = *num_states;
    if (initial && *initial >= n) throw ParseError(initial_line, "initial state out of range");

    for (const auto& t : trans) {
        if (t.s >= n || t.t >= n) {
            throw ParseError(t.line, "dangling state index (model has " + std::to_string(n) + " states)");
        }
    }
    for (const auto& [key, g] : groups) {
        if (std::abs(g.sum - 1.0) > kDistributionTolerance) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.10g", g.sum);
            throw ParseError(g.line, "distribution of state " + std::to_string(key.first) + " action " +
                                         std::to_string(key.second) + " sums to " + buf);
        }
    }
    for (const auto& [key, cost] : costs) {
        if (!groups.count(key)) {
            throw ParseError(cost.second, "cost for state " + std::to_string(key.first) + " action " +
                                              std::to_string(key.second) + " which has no transitions");
        }
    }
    for (const auto& [name, states] : labels) {
        for (const auto& [s, line] : states) {
            if (s >= n) throw ParseError(line, "label '" + name + "' refers to missing state " + std::to_string(s));
        }
    }

    MdpBuilder builder(n);
    builder.set_initial(initial.value_or(0));
    for (const auto& t : trans) builder.add_transition(t.s, t.a, t.t, t.p);
    for (const auto& [key, cost] : costs) builder.set_cost(key.first, key.second, cost.first);
    for (const auto& [name, states] : labels) {
        builder.declare_label(name);
        for (const auto& entry : states) builder.add_label(name, entry.first);
    }
    for (const auto& [a, name] : aliases) builder.set_alias(a, name);
    return builder.build();
}

inline Mdp parse_model(const std::string& text) {
    std::istringstream in(text);
    return parse_model(in);
}

inline Mdp load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file '" + path + "'");
    return parse_model(in);
}

/// Canonical text form: states, actions and targets ascending, reals with 17
/// significant digits, zero costs omitted, no LABEL lines when there are no labels.
inline void serialize_model(const Mdp& mdp, std::ostream& out) {
    out << "STATES " << mdp.num_states() << '\n';
    out << "INITIAL " << mdp.initial() << '\n';
    for (const auto& [a, name] : mdp.action_aliases()) out << "ALIAS " << a << ' ' << name << '\n';
    for (const auto& [name, states] : mdp.labels()) {
        out << "LABEL " << name << ':';
        for (StateIndex s : states) out << ' ' << s;
        out << '\n';
    }
    const auto n = static_cast<StateIndex>(mdp.num_states());
    for (StateIndex s = 0; s < n; ++s) {
        for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
            if (mdp.cost(c) != 0.0) {
                out << "COST " << s << ' ' << mdp.action(c) << ' ' << detail::format_real(mdp.cost(c)) << '\n';
            }
        }
    }
    for (StateIndex s = 0; s < n; ++s) {
        for (std::size_t c = mdp.choice_begin(s); c < mdp.choice_end(s); ++c) {
            for (const auto& tr : mdp.transitions(c)) {
                out << "TRANS " << s << ' ' << mdp.action(c) << ' ' << tr.target << ' '
                    << detail::format_real(tr.probability) << '\n';
            }
        }
    }
}

inline std::string serialize_model(const Mdp& mdp) {
    std::ostringstream out;
    serialize_model(mdp, out);
    return out.str();
}

}  // namespace sharp
