#pragma once

#include <cmath>
#include <ostream>
#include <string>

#include <json.hpp>

#include "sharp/flat_solver.hpp"
#include "sharp/model_io.hpp"
#include "sharp/sharp.hpp"

namespace sharp {

/// Shortest text that reads back to the same double; infinities print as "inf".
inline std::string format_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return detail::format_real(v);
}

inline void write_values_csv(std::ostream& out, std::span<const double> values) {
    out << "state,value\n";
    for (std::size_t s = 0; s < values.size(); ++s) out << s << ',' << format_value(values[s]) << '\n';
}

/// States without an action get an empty action field.
inline void write_policy_csv(std::ostream& out, const Policy& policy) {
    out << "state,action\n";
    for (std::size_t s = 0; s < policy.size(); ++s) {
        out << s << ',';
        if (policy[s]) out << *policy[s];
        out << '\n';
    }
}

/// Wraps a flat solve in the report shape used for every engine.
inline SolveReport flat_report(const Mdp& mdp, const Objective& objective, FlatResult&& flat, double seconds) {
    SolveReport r;
    r.values = std::move(flat.values);
    r.policy = std::move(flat.policy);
    r.passes = flat.iterations;
    r.leaves = 1;
    r.converged = flat.converged;
    r.warnings = std::move(flat.warnings);
    r.global_residual = global_residual(mdp, objective, r.values);
    r.seconds = seconds;
    return r;
}

namespace detail {

inline nlohmann::json json_number(double v) {
    if (std::isfinite(v)) return v;
    return format_value(v);
}

}  // namespace detail

/// JSON form of a report. Timings are left out unless asked for, so two runs of
/// the same configuration serialize identically.
inline nlohmann::json report_to_json(const SolveReport& report, const Mdp& mdp, bool with_timings) {
    nlohmann::json j;
    j["initial_state"] = mdp.initial();
    j["initial_value"] = detail::json_number(report.values.at(mdp.initial()));
    j["converged"] = report.converged;
    j["passes"] = report.passes;
    j["leaf_solves"] = report.leaf_solve_count;
    j["refinements"] = report.refinement_count;
    j["leaves"] = report.leaves;
    j["max_depth"] = report.max_depth_reached;
    j["eta"] = detail::json_number(report.eta_measured);
    j["global_residual"] = detail::json_number(report.global_residual);
    j["warnings"] = report.warnings;
    auto passes = nlohmann::json::array();
    for (const auto& p : report.pass_stats) {
        nlohmann::json e{{"pass", p.pass},
                         {"resolved", p.resolved_leaves},
                         {"refined", p.refined_leaves},
                         {"leaves", p.leaves},
                         {"max_change", detail::json_number(p.max_change)}};
        if (with_timings) e["seconds"] = p.seconds;
        passes.push_back(std::move(e));
    }
    j["pass_stats"] = std::move(passes);
    if (with_timings) j["seconds"] = report.seconds;
    return j;
}

}  // namespace sharp
