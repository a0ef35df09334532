#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridshock/jsonutil.hpp"
#include "gridshock/protection.hpp"

namespace gridshock {

inline constexpr int kScenarioFormatVersion = 1;

enum class EvMode { Charge, Discharge };

/// A fleet of identical EVs acting in unison.
struct EvFleetSpec {
    long long count = 0;
    double per_ev_kw = 7.2;
    double pf = 0.6;  // lagging
    EvMode mode = EvMode::Charge;
};

enum class AttackAction { Connect, Disconnect, ScaleExistingLoad };

struct AttackEvent {
    double t = 0.0;
    AttackAction action = AttackAction::Connect;
    int bus = 0;
    double p_mw = 0.0;    // signed; negative = injection
    double q_mvar = 0.0;  // signed
    std::string tag;
    double scale = 1.0;   // ScaleExistingLoad only, relative to base value
};

/// A timed sequence of connect/disconnect/scale actions. Events at
/// equal times apply in list order.
struct Scenario {
    std::vector<AttackEvent> events;
    std::optional<RelaySettings> relay_settings;
};

inline std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> out;
    double prev_t = -1e300;
    std::set<std::string> live_tags;
    for (std::size_t i = 0; i < s.events.size(); ++i) {
        const auto& e = s.events[i];
        const std::string who = "events[" + std::to_string(i) + "]";
        if (e.t < prev_t) out.push_back(who + ": times must be nondecreasing");
        prev_t = e.t;
        switch (e.action) {
            case AttackAction::Connect:
                if (e.tag.empty()) out.push_back(who + ": connect requires a tag");
                else if (!live_tags.insert(e.tag).second)
                    out.push_back(who + ": tag '" + e.tag + "' already connected");
                break;
            case AttackAction::Disconnect:
                if (!live_tags.erase(e.tag))
                    out.push_back(who + ": disconnect of unknown tag '" + e.tag + "'");
                break;
            case AttackAction::ScaleExistingLoad:
                if (e.scale < 0.0 || e.scale > 10.0)
                    out.push_back(who + ": scale must be within [0, 10]");
                break;
        }
    }
    return out;
}

inline void require_valid(const Scenario& s) {
    auto violations = validate_scenario(s);
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

/// Fleet spec to aggregate (P MW, Q MVAR). Charge consumes (p > 0),
/// Discharge injects (p < 0); q follows the sign of p so a lagging
/// charge consumes VARs. Scenarios may override q downstream.
inline std::pair<double, double> ev_fleet_to_pq(const EvFleetSpec& spec) {
    if (!(spec.pf > 0.0 && spec.pf <= 1.0))
        throw ValidationError({"ev fleet: pf must be within (0, 1], got " +
                               std::to_string(spec.pf)});
    if (spec.count < 0) throw ValidationError({"ev fleet: count must be >= 0"});
    if (!(spec.per_ev_kw > 0.0)) throw ValidationError({"ev fleet: per_ev_kw must be > 0"});
    const double p_abs = static_cast<double>(spec.count) * spec.per_ev_kw / 1000.0;
    const double q_abs = p_abs * std::tan(std::acos(spec.pf));
    const double sign = spec.mode == EvMode::Charge ? 1.0 : -1.0;
    return {sign * p_abs, sign * q_abs};
}

/// Aggregate EV load for a car population at a given adoption level.
inline double penetration_load_mw(long long total_cars, double penetration, double rate_kw) {
    if (penetration < 0.0 || penetration > 1.0)
        throw ValidationError({"penetration must be within [0, 1]"});
    return static_cast<double>(total_cars) * penetration * rate_kw / 1000.0;
}

struct PQEvent {
    int bus = 0;
    double p_mw = 0.0;
    double q_mvar = 0.0;
};

/// Alternating demand/injection timeline: the load connects at t0, the
/// pair swaps every period, and `cycles` counts the switching instants
/// (floored at one full on/swap pair). At most one of the pair is ever
/// connected.
inline Scenario build_switching_scenario(const PQEvent& load_event,
                                         const PQEvent& injection_event, double t0,
                                         double period, int cycles) {
    if (!(period > 0.0)) throw ValidationError({"switching scenario: period must be > 0"});
    if (cycles < 1) throw ValidationError({"switching scenario: cycles must be >= 1"});
    const int instants = std::max(cycles, 2);
    Scenario s;
    s.events.push_back({t0, AttackAction::Connect, load_event.bus, load_event.p_mw,
                        load_event.q_mvar, "switch_load", 1.0});
    bool load_on = true;
    for (int k = 1; k < instants; ++k) {
        const double t = t0 + k * period;
        if (load_on) {
            s.events.push_back(
                {t, AttackAction::Disconnect, load_event.bus, 0.0, 0.0, "switch_load", 1.0});
            s.events.push_back({t, AttackAction::Connect, injection_event.bus,
                                injection_event.p_mw, injection_event.q_mvar, "switch_inj",
                                1.0});
        } else {
            s.events.push_back(
                {t, AttackAction::Disconnect, injection_event.bus, 0.0, 0.0, "switch_inj", 1.0});
            s.events.push_back({t, AttackAction::Connect, load_event.bus, load_event.p_mw,
                                load_event.q_mvar, "switch_load", 1.0});
        }
        load_on = !load_on;
    }
    return s;
}

/// Splits a P/Q total across buses proportionally to weights,
/// preserving totals and per-bus power factor. Events are stamped at
/// time t; shift as needed when composing a timeline.
inline std::vector<AttackEvent> distribute_load(double p_total, double q_total,
                                                const std::vector<std::pair<int, double>>& buses,
                                                double t = 0.0,
                                                const std::string& tag_prefix = "ev_bus") {
    double wsum = 0.0;
    for (const auto& [bus, w] : buses) {
        if (w < 0.0) throw ValidationError({"distribute: weights must be >= 0"});
        wsum += w;
    }
    if (!(wsum > 0.0)) throw ValidationError({"distribute: weight sum must be > 0"});
    std::vector<AttackEvent> events;
    events.reserve(buses.size());
    for (const auto& [bus, w] : buses) {
        AttackEvent e;
        e.t = t;
        e.action = AttackAction::Connect;
        e.bus = bus;
        e.p_mw = p_total * w / wsum;
        e.q_mvar = q_total * w / wsum;
        e.tag = tag_prefix + std::to_string(bus);
        events.push_back(e);
    }
    return events;
}

/// Splits a fleet across buses proportionally to weights.
inline std::vector<AttackEvent> distribute_fleet(const EvFleetSpec& spec,
                                                 const std::vector<std::pair<int, double>>& buses,
                                                 double t = 0.0) {
    const auto [p_total, q_total] = ev_fleet_to_pq(spec);
    return distribute_load(p_total, q_total, buses, t);
}

// --- scenario file I/O ---

namespace detail {

inline std::string action_to(AttackAction a) {
    switch (a) {
        case AttackAction::Connect: return "connect";
        case AttackAction::Disconnect: return "disconnect";
        default: return "scale";
    }
}

inline AttackAction action_from(const std::string& s, const std::string& ctx) {
    if (s == "connect") return AttackAction::Connect;
    if (s == "disconnect") return AttackAction::Disconnect;
    if (s == "scale") return AttackAction::ScaleExistingLoad;
    throw ParseError(ctx, "unknown action '" + s + "' (expected connect|disconnect|scale)");
}

inline nlohmann::json relay_settings_to(const RelaySettings& r) {
    return nlohmann::json{{"gen_over_freq", r.gen_over_freq},
                          {"gen_under_freq", r.gen_under_freq},
                          {"freq_pickup_delay", r.freq_pickup_delay},
                          {"v_high", r.v_high},
                          {"v_low", r.v_low},
                          {"line_overload_factor", r.line_overload_factor},
                          {"line_pickup_delay", r.line_pickup_delay},
                          {"gen_freq_enabled", r.gen_freq_enabled},
                          {"line_overload_enabled", r.line_overload_enabled}};
}

inline RelaySettings relay_settings_from(const nlohmann::json& j, const std::string& ctx) {
    RelaySettings r;
    r.gen_over_freq = num_or(j, "gen_over_freq", r.gen_over_freq, ctx);
    r.gen_under_freq = num_or(j, "gen_under_freq", r.gen_under_freq, ctx);
    r.freq_pickup_delay = num_or(j, "freq_pickup_delay", r.freq_pickup_delay, ctx);
    r.v_high = num_or(j, "v_high", r.v_high, ctx);
    r.v_low = num_or(j, "v_low", r.v_low, ctx);
    r.line_overload_factor = num_or(j, "line_overload_factor", r.line_overload_factor, ctx);
    r.line_pickup_delay = num_or(j, "line_pickup_delay", r.line_pickup_delay, ctx);
    r.gen_freq_enabled = bool_or(j, "gen_freq_enabled", r.gen_freq_enabled, ctx);
    r.line_overload_enabled =
        bool_or(j, "line_overload_enabled", r.line_overload_enabled, ctx);
    return r;
}

}  // namespace detail

inline Scenario load_scenario(const std::string& document) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("scenario document", e.what());
    }
    if (!j.is_object()) throw ParseError("scenario document", "top level must be an object");
    const int version = detail::int_or(j, "format_version", 1, "scenario");
    if (version != kScenarioFormatVersion)
        throw ParseError("scenario.format_version",
                         "unsupported version " + std::to_string(version));

    Scenario s;
    for (const auto& ej : detail::member(j, "events", "scenario")) {
        const std::string ctx = "events[" + std::to_string(s.events.size()) + "]";
        AttackEvent e;
        e.t = detail::num_field(ej, "t", ctx);
        e.action = detail::action_from(detail::str_or(ej, "action", "connect", ctx), ctx);
        e.bus = detail::int_field(ej, "bus", ctx);
        if (ej.contains("ev_count")) {
            // Fleet form: p/q derived from the EV fleet arithmetic.
            EvFleetSpec spec;
            spec.count = detail::member(ej, "ev_count", ctx).get<long long>();
            spec.per_ev_kw = detail::num_or(ej, "per_ev_kw", 7.2, ctx);
            spec.pf = detail::num_or(ej, "pf", 0.6, ctx);
            const std::string mode = detail::str_or(ej, "mode", "charge", ctx);
            if (mode != "charge" && mode != "discharge")
                throw ParseError(ctx + ".mode", "expected charge|discharge");
            spec.mode = mode == "charge" ? EvMode::Charge : EvMode::Discharge;
            auto [p, q] = ev_fleet_to_pq(spec);
            e.p_mw = p;
            e.q_mvar = detail::num_or(ej, "q_mvar", q, ctx);  // explicit q wins
        } else {
            e.p_mw = detail::num_or(ej, "p_mw", 0.0, ctx);
            e.q_mvar = detail::num_or(ej, "q_mvar", 0.0, ctx);
        }
        e.tag = detail::str_or(ej, "tag", "", ctx);
        e.scale = detail::num_or(ej, "scale", 1.0, ctx);
        s.events.push_back(e);
    }
    if (j.contains("relay_settings"))
        s.relay_settings = detail::relay_settings_from(j.at("relay_settings"), "relay_settings");
    require_valid(s);
    return s;
}

inline Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open scenario file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_scenario(ss.str());
}

inline std::string save_scenario(const Scenario& s) {
    using nlohmann::json;
    json j;
    j["format_version"] = kScenarioFormatVersion;
    j["events"] = json::array();
    for (const auto& e : s.events) {
        json ej{{"t", e.t},
                {"action", detail::action_to(e.action)},
                {"bus", e.bus}};
        if (e.action == AttackAction::Connect) {
            ej["p_mw"] = e.p_mw;
            ej["q_mvar"] = e.q_mvar;
        }
        if (!e.tag.empty()) ej["tag"] = e.tag;
        if (e.action == AttackAction::ScaleExistingLoad) ej["scale"] = e.scale;
        j["events"].push_back(ej);
    }
    if (s.relay_settings) j["relay_settings"] = detail::relay_settings_to(*s.relay_settings);
    return j.dump(2) + "\n";
}

}  // namespace gridshock
