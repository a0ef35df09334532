#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridshock/jsonutil.hpp"
#include "gridshock/netmodel.hpp"

namespace gridshock {

inline constexpr int kCaseFormatVersion = 1;

namespace detail {

using nlohmann::json;

inline BusKind bus_kind_from(const std::string& s, const std::string& ctx) {
    if (s == "slack") return BusKind::Slack;
    if (s == "pv") return BusKind::PV;
    if (s == "pq") return BusKind::PQ;
    throw ParseError(ctx, "unknown bus kind '" + s + "' (expected slack|pv|pq)");
}

inline std::string bus_kind_to(BusKind k) {
    switch (k) {
        case BusKind::Slack: return "slack";
        case BusKind::PV: return "pv";
        default: return "pq";
    }
}

inline LoadModel load_model_from(const std::string& s, const std::string& ctx) {
    if (s == "constant_power") return LoadModel::ConstantPower;
    if (s == "constant_impedance") return LoadModel::ConstantImpedance;
    throw ParseError(ctx, "unknown load model '" + s +
                              "' (expected constant_power|constant_impedance)");
}

inline std::string load_model_to(LoadModel m) {
    return m == LoadModel::ConstantPower ? "constant_power" : "constant_impedance";
}

inline GensalParams gensal_from(const json& j, const std::string& ctx) {
    GensalParams m;
    m.h = num_field(j, "h", ctx);
    m.d = num_or(j, "d", 0.0, ctx);
    m.xd = num_field(j, "xd", ctx);
    m.xq = num_field(j, "xq", ctx);
    m.xdp = num_field(j, "xdp", ctx);
    m.xdpp = num_field(j, "xdpp", ctx);
    m.xl = num_field(j, "xl", ctx);
    m.td0p = num_field(j, "td0p", ctx);
    m.td0pp = num_field(j, "td0pp", ctx);
    m.tq0pp = num_field(j, "tq0pp", ctx);
    m.s10 = num_or(j, "s10", 0.0, ctx);
    m.s12 = num_or(j, "s12", 0.0, ctx);
    m.ra = num_or(j, "ra", 0.0, ctx);
    return m;
}

inline Ieeet1Params ieeet1_from(const json& j, const std::string& ctx) {
    Ieeet1Params e;
    e.ka = num_field(j, "ka", ctx);
    e.ta = num_field(j, "ta", ctx);
    e.ke = num_field(j, "ke", ctx);
    e.te = num_field(j, "te", ctx);
    e.kf = num_field(j, "kf", ctx);
    e.tf = num_field(j, "tf", ctx);
    e.vrmax = num_field(j, "vrmax", ctx);
    e.vrmin = num_field(j, "vrmin", ctx);
    e.e1 = num_or(j, "e1", 3.0, ctx);
    e.se1 = num_or(j, "se1", 0.0, ctx);
    e.e2 = num_or(j, "e2", 4.0, ctx);
    e.se2 = num_or(j, "se2", 0.0, ctx);
    return e;
}

inline Ieeeg2Params ieeeg2_from(const json& j, const std::string& ctx) {
    Ieeeg2Params g;
    g.k = num_field(j, "k", ctx);
    g.t1 = num_field(j, "t1", ctx);
    g.t2 = num_field(j, "t2", ctx);
    g.t3 = num_field(j, "t3", ctx);
    g.t4 = num_field(j, "t4", ctx);
    g.pmax = num_field(j, "pmax", ctx);
    g.pmin = num_field(j, "pmin", ctx);
    return g;
}

inline json gensal_to(const GensalParams& m) {
    return json{{"h", m.h},         {"d", m.d},         {"xd", m.xd},     {"xq", m.xq},
                {"xdp", m.xdp},     {"xdpp", m.xdpp},   {"xl", m.xl},     {"td0p", m.td0p},
                {"td0pp", m.td0pp}, {"tq0pp", m.tq0pp}, {"s10", m.s10},   {"s12", m.s12},
                {"ra", m.ra}};
}

inline json ieeet1_to(const Ieeet1Params& e) {
    return json{{"ka", e.ka},       {"ta", e.ta},   {"ke", e.ke},   {"te", e.te},
                {"kf", e.kf},       {"tf", e.tf},   {"vrmax", e.vrmax}, {"vrmin", e.vrmin},
                {"e1", e.e1},       {"se1", e.se1}, {"e2", e.e2},   {"se2", e.se2}};
}

inline json ieeeg2_to(const Ieeeg2Params& g) {
    return json{{"k", g.k},   {"t1", g.t1},     {"t2", g.t2},     {"t3", g.t3},
                {"t4", g.t4}, {"pmax", g.pmax}, {"pmin", g.pmin}};
}

}  // namespace detail

/// Parses and validates a case document. Quantities stay in MW/MVAR/kV
/// at the Case surface; impedances are per-unit on base_mva.
inline Case load_case(const std::string& document) {
    using nlohmann::json;
    json j;
    try {
        j = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("case document", e.what());
    }
    if (!j.is_object()) throw ParseError("case document", "top level must be an object");

    const int version = detail::int_or(j, "format_version", 1, "case");
    if (version != kCaseFormatVersion)
        throw ParseError("case.format_version",
                         "unsupported version " + std::to_string(version));

    Case c;
    c.name = detail::str_or(j, "name", "", "case");
    c.base_mva = detail::num_field(j, "base_mva", "case");
    c.f_nominal = detail::num_or(j, "f_nominal", 60.0, "case");

    int auto_id = 1;
    for (const auto& bj : detail::member(j, "buses", "case")) {
        std::string ctx = "buses[" + std::to_string(c.buses.size()) + "]";
        Bus b;
        b.id = detail::int_field(bj, "id", ctx);
        b.kind = detail::bus_kind_from(
            detail::str_or(bj, "kind", "pq", ctx), ctx + ".kind");
        b.v_nominal_kv = detail::num_field(bj, "v_nominal", ctx);
        b.v_setpoint = detail::num_or(bj, "v_setpoint", 1.0, ctx);
        b.shunt_g = detail::num_or(bj, "shunt_g", 0.0, ctx);
        b.shunt_b = detail::num_or(bj, "shunt_b", 0.0, ctx);
        b.area = detail::int_or(bj, "area", 1, ctx);
        c.buses.push_back(b);
    }
    auto_id = 1;
    for (const auto& rj : detail::member(j, "branches", "case")) {
        std::string ctx = "branches[" + std::to_string(c.branches.size()) + "]";
        Branch br;
        br.id = detail::int_or(rj, "id", auto_id, ctx);
        br.from_bus = detail::int_field(rj, "from_bus", ctx);
        br.to_bus = detail::int_field(rj, "to_bus", ctx);
        br.r = detail::num_field(rj, "r", ctx);
        br.x = detail::num_field(rj, "x", ctx);
        br.b_charging = detail::num_or(rj, "b_charging", 0.0, ctx);
        br.tap = detail::num_or(rj, "tap", 1.0, ctx);
        br.mva_limit = detail::num_or(rj, "mva_limit", 0.0, ctx);
        br.in_service = detail::bool_or(rj, "in_service", true, ctx);
        c.branches.push_back(br);
        ++auto_id;
    }
    auto_id = 1;
    for (const auto& gj : detail::member(j, "generators", "case")) {
        std::string ctx = "generators[" + std::to_string(c.generators.size()) + "]";
        Generator g;
        g.id = detail::int_or(gj, "id", auto_id, ctx);
        g.bus = detail::int_field(gj, "bus", ctx);
        g.p_set = detail::num_field(gj, "p_set", ctx);
        g.q_min = detail::num_or(gj, "q_min", -9999.0, ctx);
        g.q_max = detail::num_or(gj, "q_max", 9999.0, ctx);
        g.v_set = detail::num_or(gj, "v_set", 1.0, ctx);
        g.mbase = detail::num_or(gj, "mbase", c.base_mva, ctx);
        g.participation = detail::num_or(gj, "participation", 1.0, ctx);
        g.in_service = detail::bool_or(gj, "in_service", true, ctx);
        if (gj.contains("dynamics")) {
            const auto& dj = gj.at("dynamics");
            GeneratorDynamics dyn;
            dyn.machine = detail::gensal_from(detail::member(dj, "machine", ctx), ctx + ".machine");
            dyn.exciter = detail::ieeet1_from(detail::member(dj, "exciter", ctx), ctx + ".exciter");
            dyn.governor =
                detail::ieeeg2_from(detail::member(dj, "governor", ctx), ctx + ".governor");
            g.dynamics = dyn;
        }
        c.generators.push_back(g);
        ++auto_id;
    }
    auto_id = 1;
    for (const auto& lj : detail::member(j, "loads", "case")) {
        std::string ctx = "loads[" + std::to_string(c.loads.size()) + "]";
        LoadItem l;
        l.id = detail::int_or(lj, "id", auto_id, ctx);
        l.bus = detail::int_field(lj, "bus", ctx);
        l.p = detail::num_field(lj, "p", ctx);
        l.q = detail::num_field(lj, "q", ctx);
        l.model = detail::load_model_from(
            detail::str_or(lj, "model", "constant_power", ctx), ctx + ".model");
        l.status = detail::bool_or(lj, "status", true, ctx);
        l.tag = detail::str_or(lj, "tag", "", ctx);
        c.loads.push_back(l);
        ++auto_id;
    }

    require_valid(c);
    return c;
}

inline Case load_case_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, "cannot open case file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_case(ss.str());
}

/// Serializes a case; load_case(save_case(c)) is semantically identity.
inline std::string save_case(const Case& c) {
    using nlohmann::json;
    json j;
    j["format_version"] = kCaseFormatVersion;
    j["name"] = c.name;
    j["base_mva"] = c.base_mva;
    j["f_nominal"] = c.f_nominal;
    j["buses"] = json::array();
    for (const auto& b : c.buses) {
        json bj{{"id", b.id},
                {"kind", detail::bus_kind_to(b.kind)},
                {"v_nominal", b.v_nominal_kv},
                {"shunt_g", b.shunt_g},
                {"shunt_b", b.shunt_b},
                {"area", b.area}};
        if (b.kind != BusKind::PQ) bj["v_setpoint"] = b.v_setpoint;
        j["buses"].push_back(bj);
    }
    j["branches"] = json::array();
    for (const auto& br : c.branches) {
        j["branches"].push_back(json{{"id", br.id},
                                     {"from_bus", br.from_bus},
                                     {"to_bus", br.to_bus},
                                     {"r", br.r},
                                     {"x", br.x},
                                     {"b_charging", br.b_charging},
                                     {"tap", br.tap},
                                     {"mva_limit", br.mva_limit},
                                     {"in_service", br.in_service}});
    }
    j["generators"] = json::array();
    for (const auto& g : c.generators) {
        json gj{{"id", g.id},           {"bus", g.bus},
                {"p_set", g.p_set},     {"q_min", g.q_min},
                {"q_max", g.q_max},     {"v_set", g.v_set},
                {"mbase", g.mbase},     {"participation", g.participation},
                {"in_service", g.in_service}};
        if (g.dynamics) {
            gj["dynamics"] = json{{"machine", detail::gensal_to(g.dynamics->machine)},
                                  {"exciter", detail::ieeet1_to(g.dynamics->exciter)},
                                  {"governor", detail::ieeeg2_to(g.dynamics->governor)}};
        }
        j["generators"].push_back(gj);
    }
    j["loads"] = json::array();
    for (const auto& l : c.loads) {
        j["loads"].push_back(json{{"id", l.id},
                                  {"bus", l.bus},
                                  {"p", l.p},
                                  {"q", l.q},
                                  {"model", detail::load_model_to(l.model)},
                                  {"status", l.status},
                                  {"tag", l.tag}});
    }
    return j.dump(2) + "\n";
}

}  // namespace gridshock
