#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gridshock/cascade.hpp"
#include "gridshock/cases.hpp"
#include "gridshock/dynamics.hpp"
#include "gridshock/scenario.hpp"

namespace gridshock::experiments {

/// One reproducible bundled study: case, scenario, and run settings.
struct Experiment {
    std::string id;
    std::string case_name;
    Scenario scenario;
    double t_end = 60.0;
    bool is_cascade = false;  // quasi-static study instead of a dynamic run
    std::string description;
};

inline Scenario demand_surge_9bus() {
    Scenario s;
    for (int bus : {5, 6, 8}) {
        AttackEvent e;
        e.t = 15.0;
        e.action = AttackAction::Connect;
        e.bus = bus;
        auto [p, q] = ev_fleet_to_pq({1000, 7.2, 0.6, EvMode::Charge});
        e.p_mw = p;
        e.q_mvar = q;
        e.tag = "ev_b" + std::to_string(bus);
        s.events.push_back(e);
    }
    return s;
}

inline Scenario v2g_injection_9bus() {
    Scenario s;
    AttackEvent e;
    e.t = 15.0;
    e.action = AttackAction::Connect;
    e.bus = 5;
    e.p_mw = -50.0;
    e.q_mvar = -10.0;
    e.tag = "v2g_b5";
    s.events.push_back(e);
    return s;
}

inline Scenario switching_9bus() {
    return build_switching_scenario({6, 21.0, 28.0}, {5, -60.0, 0.0}, 15.0, 10.0, 5);
}

/// Switching attack amplified by a 20% demand drop at bus 5 during the
/// injection phases.
inline Scenario switching_9bus_with_drop() {
    Scenario s = switching_9bus();
    std::vector<AttackEvent> extra;
    bool injection_phase = false;
    for (const auto& e : s.events) {
        if (e.tag == "switch_inj" && e.action == AttackAction::Connect) {
            extra.push_back({e.t, AttackAction::ScaleExistingLoad, 5, 0.0, 0.0, "load_b5", 0.8});
            injection_phase = true;
        } else if (injection_phase && e.tag == "switch_load" &&
                   e.action == AttackAction::Connect) {
            extra.push_back({e.t, AttackAction::ScaleExistingLoad, 5, 0.0, 0.0, "load_b5", 1.0});
            injection_phase = false;
        }
    }
    for (const auto& e : extra) s.events.push_back(e);
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const AttackEvent& a, const AttackEvent& b) { return a.t < b.t; });
    return s;
}

/// 48 MW of residential load (pf 0.8) split over buses 2..5.
inline Scenario residential_48mw_7bus() {
    Scenario s;
    const double q = 48.0 * std::tan(std::acos(0.8));
    auto events = distribute_load(48.0, q, {{2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}}, 15.0,
                                  "res_b");
    for (auto& e : events) s.events.push_back(e);
    return s;
}

/// 48 MW of EV load (pf 0.6, 80 MVA) split over buses 2..5.
inline Scenario ev_48mw_7bus() {
    Scenario s;
    const double q = 48.0 * std::tan(std::acos(0.6));
    auto events = distribute_load(48.0, q, {{2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}}, 15.0);
    for (auto& e : events) s.events.push_back(e);
    return s;
}

/// 36 MW of EV load (pf 0.6, 60 MVA) split over buses 2..5.
inline Scenario ev_36mw_7bus() {
    Scenario s;
    const double q = 36.0 * std::tan(std::acos(0.6));
    auto events = distribute_load(36.0, q, {{2, 1.0}, {3, 1.0}, {4, 1.0}, {5, 1.0}}, 15.0);
    for (auto& e : events) s.events.push_back(e);
    return s;
}

/// 30 MW / 50 MVA targeted at the sensitive buses: 12 MW at bus 2 and
/// 9 MW at each of buses 3 and 5.
inline Scenario ev_30mw_weakbus_7bus() {
    Scenario s;
    const double q = 30.0 * std::tan(std::acos(0.6));
    auto events = distribute_load(30.0, q, {{2, 12.0}, {3, 9.0}, {5, 9.0}}, 15.0);
    for (auto& e : events) s.events.push_back(e);
    return s;
}

/// Cascade trigger: 50 MW of EV charging (pf 0.6) at bus 3.
inline std::vector<AttackEvent> cascade_trigger_7bus() {
    AttackEvent e;
    e.t = 0.0;
    e.action = AttackAction::Connect;
    e.bus = 3;
    e.p_mw = 50.0;
    e.q_mvar = 50.0 * std::tan(std::acos(0.6));
    e.tag = "ev_b3";
    return {e};
}

inline std::vector<Experiment> all_experiments() {
    std::vector<Experiment> list;
    list.push_back({"fig5", "wscc9", demand_surge_9bus(), 60.0, false,
                    "frequency drop from 3000 charging EVs at the load buses"});
    list.push_back({"fig6", "wscc9", v2g_injection_9bus(), 90.0, false,
                    "frequency rise and voltage violations from a -50 MW injection"});
    list.push_back({"fig8", "wscc9", switching_9bus(), 75.0, false,
                    "alternating 21 MW load and -60 MW injection every 10 s"});
    list.push_back({"fig11", "glover7mod", residential_48mw_7bus(), 90.0, false,
                    "48 MW residential-load attack at pf 0.8"});
    list.push_back({"fig12", "glover7mod", ev_48mw_7bus(), 90.0, false,
                    "48 MW EV-load attack at pf 0.6"});
    list.push_back({"fig16", "glover7mod", ev_36mw_7bus(), 90.0, false,
                    "36 MW / 60 MVA EV-load attack"});
    Experiment casc;
    casc.id = "cascade43";
    casc.case_name = "glover7";
    for (const auto& e : cascade_trigger_7bus()) casc.scenario.events.push_back(e);
    casc.is_cascade = true;
    casc.description = "overload cascade from 50 MW of EV charging at bus 3";
    list.push_back(casc);
    return list;
}

inline const Experiment* find_experiment(const std::string& id) {
    static const std::vector<Experiment> all = all_experiments();
    for (const auto& e : all)
        if (e.id == id) return &e;
    return nullptr;
}

/// Bundled scenario files shipped alongside the cases.
inline std::vector<std::pair<std::string, Scenario>> bundled_scenarios() {
    std::vector<std::pair<std::string, Scenario>> out;
    out.push_back({"fig5", demand_surge_9bus()});
    out.push_back({"fig6", v2g_injection_9bus()});
    out.push_back({"fig8", switching_9bus()});
    out.push_back({"fig8drop", switching_9bus_with_drop()});
    out.push_back({"fig11", residential_48mw_7bus()});
    out.push_back({"fig12", ev_48mw_7bus()});
    out.push_back({"fig16", ev_36mw_7bus()});
    out.push_back({"weakbus30", ev_30mw_weakbus_7bus()});
    Scenario casc;
    for (const auto& e : cascade_trigger_7bus()) casc.events.push_back(e);
    out.push_back({"cascade43", casc});
    return out;
}

}  // namespace gridshock::experiments
