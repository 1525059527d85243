#pragma once

// Line-delimited JSON records shared by the CLI and the session service.
//
// Numbers are JSON doubles written in shortest round-trip form (at most 17
// significant digits), so a value read back compares equal to the one
// written. Exact estimates are additionally given as "num/den" strings.

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dosefind/convergence.hpp"
#include "dosefind/designs.hpp"
#include "dosefind/error.hpp"
#include "dosefind/model.hpp"
#include "dosefind/scenario_gen.hpp"
#include "dosefind/simulator.hpp"

namespace dosefind::app {

using json = nlohmann::ordered_json;

inline void write_line(std::ostream& os, const json& j) { os << j.dump() << '\n'; }

namespace detail {

inline const json& field(const json& j, const char* name, const std::string& where) {
    DOSEFIND_REQUIRE(j.is_object(), ErrorCode::InvalidInput, where + ": expected a JSON object");
    const auto it = j.find(name);
    DOSEFIND_REQUIRE(it != j.end(), ErrorCode::InvalidInput, where + ": missing field '" + name + "'");
    return *it;
}

inline double number(const json& v, const std::string& name) {
    DOSEFIND_REQUIRE(v.is_number(), ErrorCode::InvalidInput, name + ": expected a number");
    return v.get<double>();
}

inline int integer(const json& v, const std::string& name) {
    DOSEFIND_REQUIRE(v.is_number_integer(), ErrorCode::InvalidInput, name + ": expected an integer");
    return v.get<int>();
}

inline std::vector<double> numbers(const json& v, const std::string& name) {
    DOSEFIND_REQUIRE(v.is_array(), ErrorCode::InvalidInput, name + ": expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], name + "[" + std::to_string(i + 1) + "]"));
    return out;
}

template <class T>
std::optional<T> optional_field(const json& j, const char* name) {
    const auto it = j.find(name);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) return number(*it, name);
    else if constexpr (std::is_same_v<T, int>) return integer(*it, name);
    else if constexpr (std::is_same_v<T, bool>) {
        DOSEFIND_REQUIRE(it->is_boolean(), ErrorCode::InvalidInput, std::string(name) + ": expected true or false");
        return it->get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
        DOSEFIND_REQUIRE(it->is_string(), ErrorCode::InvalidInput, std::string(name) + ": expected a string");
        return it->get<std::string>();
    } else {
        return numbers(*it, name);
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenarios

inline json scenario_json(const ToxScenario& s) { return {{"label", s.label}, {"p", s.p}, {"f", s.f}}; }

/// Ensemble line: {id, m, f, alpha_used, seed_info}.
inline json ensemble_record(const GeneratedScenario& g, const GenConfig& cfg) {
    return {{"id", g.id},
            {"m", g.scenario.m()},
            {"f", g.scenario.f},
            {"alpha_used", g.alpha},
            {"seed_info",
             {{"master_seed", cfg.seed}, {"stream_seed", g.stream_seed}, {"alpha_index", g.alpha_index}, {"attempts", g.attempts}}}};
}

/// Reads a scenario from any record carrying "f" (and optionally "p", "id",
/// "label"). A given `p_override` replaces the record's target.
inline ToxScenario parse_scenario(const json& j, std::optional<double> p_override, const std::string& where = "scenario") {
    ToxScenario s;
    s.f = detail::numbers(detail::field(j, "f", where), "f");
    if (p_override) s.p = *p_override;
    else s.p = detail::number(detail::field(j, "p", where), "p");
    if (const auto label = detail::optional_field<std::string>(j, "label")) s.label = *label;
    else if (j.contains("id")) s.label = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    validate(s);
    return s;
}

/// One scenario per non-blank line. Errors name the line number.
inline std::vector<ToxScenario> read_scenarios(std::istream& in, std::optional<double> p) {
    std::vector<ToxScenario> out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = "line " + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw Error(ErrorCode::InvalidInput, where + ": malformed JSON (" + e.what() + ")");
        }
        try {
            out.push_back(parse_scenario(j, p, where));
        } catch (const Error& e) {
            throw Error(e.code(), where + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Designs

inline json design_json(const DesignSpec& d) {
    json j{{"design", to_string(d.kind)}, {"p", d.p}, {"cohort", d.cohort}, {"start", d.start}};
    switch (d.kind) {
        case DesignKind::Interval:
            j["dp1"] = d.dp1;
            j["dp2"] = d.dp2;
            j["monotonized"] = d.interval_monotonized;
            break;
        case DesignKind::Point: break;
        case DesignKind::Crm:
            j["skeleton"] = d.skeleton;
            j["theta_lo"] = d.theta_lo;
            j["theta_hi"] = d.theta_hi;
            j["no_skip"] = d.no_skip;
            break;
    }
    return j;
}

/// Parses and validates a design against m levels. Only "design" and "p" are
/// required; everything else takes the DesignSpec default.
inline DesignSpec parse_design(const json& j, int m) {
    DesignSpec d;
    const json& kind = detail::field(j, "design", "design spec");
    DOSEFIND_REQUIRE(kind.is_string(), ErrorCode::InvalidInput, "design: expected one of interval, point, crm");
    d.kind = parse_design_kind(kind.get<std::string>());
    d.p = detail::number(detail::field(j, "p", "design spec"), "p");
    if (auto v = detail::optional_field<int>(j, "cohort")) d.cohort = *v;
    if (auto v = detail::optional_field<int>(j, "start")) d.start = *v;
    if (auto v = detail::optional_field<double>(j, "dp1")) d.dp1 = *v;
    if (auto v = detail::optional_field<double>(j, "dp2")) d.dp2 = *v;
    if (auto v = detail::optional_field<bool>(j, "monotonized")) d.interval_monotonized = *v;
    if (auto v = detail::optional_field<std::vector<double>>(j, "skeleton")) d.skeleton = *v;
    if (auto v = detail::optional_field<double>(j, "theta_lo")) d.theta_lo = *v;
    if (auto v = detail::optional_field<double>(j, "theta_hi")) d.theta_hi = *v;
    if (auto v = detail::optional_field<bool>(j, "no_skip")) d.no_skip = *v;
    validate(d, m);
    return d;
}

// ---------------------------------------------------------------------------
// Verdicts and estimates

inline json ccd_json(const CcdVerdict& v) {
    json j{{"class", to_string(v.cls)}, {"mtd", v.mtd}, {"levels_in_interval", v.levels_in_interval}, {"boundary_case", v.boundary_case}};
    j["oscillation_pair"] = v.oscillation_pair ? json::array({v.oscillation_pair->first, v.oscillation_pair->second}) : json(nullptr);
    if (!v.note.empty()) j["note"] = v.note;
    return j;
}

inline json crm_json(const NominationTable& t, const CrmVerdict& v) {
    return {{"class", to_string(v.cls)}, {"theta", t.theta}, {"nominee", t.nominee}, {"self_nominators", v.self_nominators}};
}

inline json rational_json(const std::optional<Rational>& r) { return r ? json(r->to_double()) : json(nullptr); }
inline json rational_exact(const std::optional<Rational>& r) { return r ? json(r->str()) : json(nullptr); }

/// Per-level {level, n, tox, raw, monotonized} plus exact strings.
inline json estimates_json(const TrialState& state) {
    const EstimateVector raw = fhat(state);
    const std::optional<EstimateVector> mono = raw.any_defined() ? std::optional(monotonize(raw)) : std::nullopt;
    json rows = json::array();
    for (int u = 1; u <= state.m(); ++u) {
        const std::optional<Rational> m = mono ? mono->at(u) : std::nullopt;
        rows.push_back({{"level", u},
                        {"n", state.n_at(u)},
                        {"tox", state.tox_at(u)},
                        {"raw", rational_json(raw.at(u))},
                        {"monotonized", rational_json(m)},
                        {"raw_exact", rational_exact(raw.at(u))},
                        {"monotonized_exact", rational_exact(m)}});
    }
    return rows;
}

}  // namespace dosefind::app
