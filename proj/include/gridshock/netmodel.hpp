#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridshock/common.hpp"

namespace gridshock {

enum class BusKind { Slack, PV, PQ };

enum class LoadModel { ConstantPower, ConstantImpedance };

struct Bus {
    int id = 0;
    BusKind kind = BusKind::PQ;
    double v_nominal_kv = 1.0;
    double v_setpoint = 1.0;  // pu, meaningful for Slack/PV
    double shunt_g = 0.0;     // pu on system base
    double shunt_b = 0.0;     // pu on system base
    int area = 1;
};

struct Branch {
    int id = 0;
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;           // pu series
    double x = 0.0;           // pu series
    double b_charging = 0.0;  // pu total line charging
    double tap = 1.0;         // 1.0 = no transformer
    double mva_limit = 0.0;   // 0 = unlimited
    bool in_service = true;
};

/// Salient-pole machine constants, given on the generator's mbase.
struct GensalParams {
    double h = 5.0;       // inertia, s
    double d = 0.0;       // damping, pu
    double xd = 1.8;      // pu
    double xq = 1.2;      // pu
    double xdp = 0.3;     // X'd, pu
    double xdpp = 0.2;    // X''d = X''q, pu
    double xl = 0.1;      // leakage, pu
    double td0p = 6.0;    // s
    double td0pp = 0.05;  // s
    double tq0pp = 0.08;  // s
    double s10 = 0.0;     // saturation at 1.0 pu flux
    double s12 = 0.0;     // saturation at 1.2 pu flux
    double ra = 0.0;      // stator resistance, pu
};

/// IEEE Type 1 rotating DC exciter with rate feedback.
struct Ieeet1Params {
    double ka = 50.0;
    double ta = 0.06;
    double ke = 1.0;
    double te = 0.5;
    double kf = 0.05;
    double tf = 1.0;
    double vrmax = 5.0;
    double vrmin = -5.0;
    double e1 = 3.0;   // saturation curve point
    double se1 = 0.0;
    double e2 = 4.0;
    double se2 = 0.0;
};

/// IEEE Type 2 hydro governor: droop gain, lead-lag pair, water column.
struct Ieeeg2Params {
    double k = 20.0;   // 1/droop, pu on mbase
    double t1 = 0.6;   // s
    double t2 = 0.2;   // s
    double t3 = 6.0;   // s
    double t4 = 0.8;   // s, water column
    double pmax = 1.0; // pu on mbase
    double pmin = 0.0; // pu on mbase
};

struct GeneratorDynamics {
    GensalParams machine;
    Ieeet1Params exciter;
    Ieeeg2Params governor;
};

struct Generator {
    int id = 0;
    int bus = 0;
    double p_set = 0.0;    // MW
    double q_min = -9999.0;  // MVAR
    double q_max = 9999.0;   // MVAR
    double v_set = 1.0;    // pu
    double mbase = 100.0;  // MVA
    double participation = 1.0;  // PV-curve pickup weight
    std::optional<GeneratorDynamics> dynamics;
    bool in_service = true;
};

struct LoadItem {
    int id = 0;
    int bus = 0;
    double p = 0.0;  // MW, negative = injection
    double q = 0.0;  // MVAR
    LoadModel model = LoadModel::ConstantPower;
    bool status = true;
    std::string tag;  // scenario targeting handle
};

/// Complete static grid description. MW/MVAR/kV at this surface,
/// impedances in per-unit on base_mva. Immutable by convention once
/// validated; solvers copy before editing.
struct Case {
    std::string name;
    double base_mva = 100.0;
    double f_nominal = 60.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<LoadItem> loads;

    int bus_index(int bus_id) const {
        for (std::size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == bus_id) return static_cast<int>(i);
        return -1;
    }

    const Bus* find_bus(int bus_id) const {
        int i = bus_index(bus_id);
        return i < 0 ? nullptr : &buses[i];
    }

    int slack_bus_id() const {
        for (const auto& b : buses)
            if (b.kind == BusKind::Slack) return b.id;
        return -1;
    }

    double total_load_mw() const {
        double s = 0.0;
        for (const auto& l : loads)
            if (l.status) s += l.p;
        return s;
    }
};

namespace detail {

inline void check_gensal(const GensalParams& m, const std::string& who,
                         std::vector<std::string>& out) {
    if (!(m.xd >= m.xq && m.xq >= 0.0))
        out.push_back(who + ": requires xd >= xq >= 0 (salient pole), got xd=" +
                      std::to_string(m.xd) + " xq=" + std::to_string(m.xq));
    if (!(m.xd > m.xdp && m.xdp > m.xdpp && m.xdpp > m.xl && m.xl >= 0.0))
        out.push_back(who + ": requires xd > xdp > xdpp > xl >= 0");
    if (!(m.td0p > 0.0 && m.td0pp > 0.0 && m.tq0pp > 0.0))
        out.push_back(who + ": machine time constants must be > 0");
    if (!(m.h > 0.0)) out.push_back(who + ": inertia h must be > 0");
}

inline void check_ieeet1(const Ieeet1Params& e, const std::string& who,
                         std::vector<std::string>& out) {
    if (!(e.ta > 0.0 && e.te > 0.0 && e.tf > 0.0))
        out.push_back(who + ": exciter ta, te, tf must be > 0");
    if (!(e.vrmin < e.vrmax)) out.push_back(who + ": exciter requires vrmin < vrmax");
}

inline void check_ieeeg2(const Ieeeg2Params& g, const std::string& who,
                         std::vector<std::string>& out) {
    if (!(g.t1 > 0.0 && g.t3 > 0.0))
        out.push_back(who + ": governor t1, t3 must be > 0");
    if (!(g.pmin < g.pmax)) out.push_back(who + ": governor requires pmin < pmax");
}

}  // namespace detail

/// Returns every invariant violation in the case; empty means valid.
inline std::vector<std::string> validate_case(const Case& c) {
    std::vector<std::string> out;
    if (!(c.base_mva > 0.0)) out.push_back("base_mva must be > 0");
    if (!(c.f_nominal > 0.0)) out.push_back("f_nominal must be > 0");

    std::set<int> bus_ids;
    std::vector<int> slack_ids;
    for (const auto& b : c.buses) {
        if (!bus_ids.insert(b.id).second)
            out.push_back("duplicate bus id " + std::to_string(b.id));
        if (b.kind == BusKind::Slack) slack_ids.push_back(b.id);
        if (!(b.v_nominal_kv > 0.0))
            out.push_back("bus " + std::to_string(b.id) + ": v_nominal must be > 0");
        if (b.kind != BusKind::PQ && !(b.v_setpoint >= 0.5 && b.v_setpoint <= 1.5))
            out.push_back("bus " + std::to_string(b.id) +
                          ": v_setpoint must be within [0.5, 1.5]");
    }
    if (slack_ids.empty()) {
        out.push_back("no Slack bus defined");
    } else if (slack_ids.size() > 1) {
        std::string msg = "more than one Slack bus:";
        for (int id : slack_ids) msg += " " + std::to_string(id);
        out.push_back(msg);
    }

    std::set<int> branch_ids;
    for (const auto& br : c.branches) {
        std::string who = "branch " + std::to_string(br.id);
        if (!branch_ids.insert(br.id).second)
            out.push_back("duplicate branch id " + std::to_string(br.id));
        if (br.from_bus == br.to_bus) out.push_back(who + ": from_bus equals to_bus");
        if (!bus_ids.count(br.from_bus))
            out.push_back(who + ": unknown from_bus " + std::to_string(br.from_bus));
        if (!bus_ids.count(br.to_bus))
            out.push_back(who + ": unknown to_bus " + std::to_string(br.to_bus));
        if (!(std::abs(br.r) + std::abs(br.x) > 0.0))
            out.push_back(who + ": zero series impedance");
        if (br.mva_limit < 0.0) out.push_back(who + ": mva_limit must be >= 0");
        if (!(br.tap > 0.0)) out.push_back(who + ": tap must be > 0");
    }

    std::set<int> gen_ids;
    for (const auto& g : c.generators) {
        std::string who = "generator " + std::to_string(g.id);
        if (!gen_ids.insert(g.id).second)
            out.push_back("duplicate generator id " + std::to_string(g.id));
        if (!bus_ids.count(g.bus)) out.push_back(who + ": unknown bus " + std::to_string(g.bus));
        if (!(g.q_min <= g.q_max)) out.push_back(who + ": requires q_min <= q_max");
        if (!(g.mbase > 0.0)) out.push_back(who + ": mbase must be > 0");
        if (g.participation < 0.0) out.push_back(who + ": participation must be >= 0");
        if (g.dynamics) {
            detail::check_gensal(g.dynamics->machine, who, out);
            detail::check_ieeet1(g.dynamics->exciter, who, out);
            detail::check_ieeeg2(g.dynamics->governor, who, out);
        }
    }

    std::set<int> load_ids;
    std::set<std::string> load_tags;
    for (const auto& l : c.loads) {
        std::string who = "load " + std::to_string(l.id);
        if (!load_ids.insert(l.id).second)
            out.push_back("duplicate load id " + std::to_string(l.id));
        if (!bus_ids.count(l.bus)) out.push_back(who + ": unknown bus " + std::to_string(l.bus));
        if (!l.tag.empty() && !load_tags.insert(l.tag).second)
            out.push_back(who + ": duplicate tag '" + l.tag + "'");
    }
    return out;
}

/// Throws ValidationError listing every violation.
inline void require_valid(const Case& c) {
    auto violations = validate_case(c);
    if (!violations.empty()) throw ValidationError(std::move(violations));
}

}  // namespace gridshock
