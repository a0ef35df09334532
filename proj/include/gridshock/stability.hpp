#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gridshock/powerflow.hpp"

namespace gridshock {

enum class PVMode {
    ScaleExisting,  // scale base loads at the selected buses, constant pf
    AddAtPf         // add incremental load at a fixed pf (attacker shape)
};

struct PVOptions {
    double step_mw = 5.0;
    double bisect_tol_mw = 1.0;
    PVMode mode = PVMode::ScaleExisting;
    double add_pf = 0.6;  // pf of incremental load in AddAtPf mode
    bool enforce_q_limits = true;
    int max_points = 5000;
    // A converged point whose voltage rises above the previous point by
    // more than this is off the traced branch and counts as collapsed.
    double branch_continuity_pu = 2e-3;
};

struct PVCurve {
    std::vector<int> load_buses;
    std::vector<int> pickup_gens;   // generator ids
    std::vector<int> monitored;     // bus ids
    std::vector<double> extra_mw;   // strictly increasing
    std::vector<std::vector<double>> v;  // [point][monitored index], pu
    double knee_extra_mw = 0.0;
    std::vector<double> knee_v;
    double converged_to_mw = 0.0;   // bisection width at the knee
    bool knee_found = false;        // false when max_points hit first
};

struct QVPoint {
    double v = 0.0;       // pu, held by the fictitious source
    double q_mvar = 0.0;  // its reactive output
};

struct QVCurve {
    int bus = 0;
    std::vector<QVPoint> points;  // in sweep order, v strictly monotone
    std::vector<double> gaps;     // swept voltages that failed to solve
    double valley_v = 0.0;
    double valley_q = 0.0;
    double q_at_natural = 0.0;    // fictitious Q holding the base-case voltage
    double reactive_margin = 0.0; // q_at_natural - valley_q
};

enum class WeakBusMetric { PVMargin, QVMargin };

struct WeakBusEntry {
    int bus = 0;
    double pv_margin_mw = 0.0;
    double qv_margin_mvar = 0.0;
};

struct WeakBusRanking {
    WeakBusMetric metric = WeakBusMetric::PVMargin;
    std::vector<WeakBusEntry> entries;  // ascending, weakest first
};

namespace stabdetail {

/// Case with `extra_mw` landed on the selected buses and picked up by
/// the participating generators.
inline Case loaded_case(const Case& base, const std::vector<int>& load_buses,
                        const std::vector<int>& pickup_gens, double extra_mw,
                        const PVOptions& opts) {
    Case c = base;
    // Allocation share per bus.
    std::map<int, double> weight;
    double wsum = 0.0;
    if (opts.mode == PVMode::ScaleExisting) {
        for (int b : load_buses) {
            double p = 0.0;
            for (const auto& l : base.loads)
                if (l.status && l.bus == b) p += l.p;
            if (p <= 0.0)
                throw BaseCaseInfeasible("pv trace: bus " + std::to_string(b) +
                                         " carries no scalable base load");
            weight[b] = p;
            wsum += p;
        }
        for (auto& l : c.loads) {
            if (!l.status || !weight.count(l.bus)) continue;
            const double bus_extra = extra_mw * weight[l.bus] / wsum;
            double bus_p = weight[l.bus];
            const double f = 1.0 + bus_extra / bus_p;
            l.p *= f;
            l.q *= f;  // constant power factor
        }
    } else {
        for (int b : load_buses) {
            weight[b] = 1.0;
            wsum += 1.0;
        }
        const double tanphi = std::tan(std::acos(opts.add_pf));
        int next_id = 0;
        for (const auto& l : c.loads) next_id = std::max(next_id, l.id);
        for (int b : load_buses) {
            LoadItem l;
            l.id = ++next_id;
            l.bus = b;
            l.p = extra_mw * weight[b] / wsum;
            l.q = l.p * tanphi;
            l.model = LoadModel::ConstantPower;
            l.tag = "pv_extra_" + std::to_string(b);
            c.loads.push_back(l);
        }
    }
    // Pickup by participation.
    double psum = 0.0;
    for (const auto& g : c.generators)
        if (g.in_service &&
            std::find(pickup_gens.begin(), pickup_gens.end(), g.id) != pickup_gens.end())
            psum += g.participation;
    if (psum > 0.0) {
        for (auto& g : c.generators) {
            if (!g.in_service) continue;
            if (std::find(pickup_gens.begin(), pickup_gens.end(), g.id) ==
                pickup_gens.end())
                continue;
            g.p_set += extra_mw * g.participation / psum;
        }
    }
    return c;
}

}  // namespace stabdetail

/// Traces bus voltages against incremental loading until the power flow
/// first fails, then bisects to the loadability knee.
inline PVCurve trace_pv(const Case& base, const std::vector<int>& load_buses,
                        const std::vector<int>& pickup_gens,
                        const std::vector<int>& monitored, const PVOptions& opts = {}) {
    if (load_buses.empty()) throw BaseCaseInfeasible("pv trace: no load buses selected");
    PVCurve curve;
    curve.load_buses = load_buses;
    curve.pickup_gens = pickup_gens;
    curve.monitored = monitored;

    PFOptions pf_opts;
    pf_opts.enforce_q_limits = opts.enforce_q_limits;

    auto solve_at = [&](double extra, const PFSolution* warm) {
        Case c = stabdetail::loaded_case(base, load_buses, pickup_gens, extra, opts);
        return solve_power_flow(c, pf_opts, warm);
    };

    PFSolution last_good = solve_at(0.0, nullptr);
    if (!last_good.converged)
        throw BaseCaseInfeasible("pv trace: base case does not converge");

    auto on_branch = [&](const PFSolution& sol) {
        for (std::size_t i = 0; i < sol.v_mag.size(); ++i)
            if (sol.v_mag[i] > last_good.v_mag[i] + opts.branch_continuity_pu) return false;
        return true;
    };
    auto record = [&](double extra, const PFSolution& sol) {
        curve.extra_mw.push_back(extra);
        std::vector<double> vs;
        vs.reserve(monitored.size());
        for (int b : monitored) vs.push_back(sol.v_at(base, b));
        curve.v.push_back(std::move(vs));
    };
    record(0.0, last_good);

    double good = 0.0;
    double bad = -1.0;
    for (int k = 1; k <= opts.max_points; ++k) {
        const double extra = good + opts.step_mw;
        PFSolution sol = solve_at(extra, &last_good);
        if (sol.converged && on_branch(sol)) {
            good = extra;
            last_good = sol;
            record(extra, sol);
        } else {
            bad = extra;
            break;
        }
    }
    if (bad < 0.0) {
        // Never diverged within the point budget.
        curve.knee_extra_mw = good;
        curve.knee_v = curve.v.back();
        curve.converged_to_mw = opts.step_mw;
        curve.knee_found = false;
        log_warn("pv trace: no collapse within " + std::to_string(good) + " MW");
        return curve;
    }
    while (bad - good > opts.bisect_tol_mw) {
        const double mid = 0.5 * (good + bad);
        PFSolution sol = solve_at(mid, &last_good);
        if (sol.converged && on_branch(sol)) {
            good = mid;
            last_good = sol;
            record(mid, sol);
        } else {
            bad = mid;
        }
    }
    curve.knee_extra_mw = good;
    curve.knee_v = curve.v.back();
    curve.converged_to_mw = bad - good;
    curve.knee_found = true;
    return curve;
}

/// Sweeps a held voltage at one bus with an unlimited fictitious source
/// and records its reactive output. Existing machines at the bus are
/// frozen at their base-case reactive output for the sweep.
inline QVCurve trace_qv(const Case& base, int bus, double v_start = 1.10,
                        double v_end = 0.60, double v_step = 0.01) {
    if (base.bus_index(bus) < 0)
        throw BaseCaseInfeasible("qv trace: unknown bus " + std::to_string(bus));
    if (v_start < 0.5 || v_start > 1.2 || v_end < 0.5 || v_end > 1.2)
        throw BaseCaseInfeasible("qv trace: sweep range must stay within [0.5, 1.2]");

    PFOptions pf_opts;
    pf_opts.enforce_q_limits = true;

    PFSolution base_sol = solve_power_flow(base, pf_opts);
    if (!base_sol.converged)
        throw BaseCaseInfeasible("qv trace: base case does not converge");
    const double v_natural = base_sol.v_at(base, bus);

    Case c = base;
    const int bi = c.bus_index(bus);
    // The fictitious source takes over regulation at the swept bus;
    // machines already there are pinned at their base-case output, so
    // the curve measures the surrounding network's reactive support.
    for (std::size_t gi = 0; gi < c.generators.size(); ++gi) {
        auto& g = c.generators[gi];
        if (!g.in_service || g.bus != bus) continue;
        g.q_min = base_sol.gen_q[gi];
        g.q_max = base_sol.gen_q[gi];
    }
    if (c.buses[bi].kind == BusKind::Slack) {
        // Hand the slack role to the largest remaining machine.
        int best = -1;
        double best_mbase = -1.0;
        for (const auto& g : c.generators) {
            if (!g.in_service || g.bus == bus) continue;
            if (g.mbase > best_mbase) {
                best_mbase = g.mbase;
                best = g.bus;
            }
        }
        if (best < 0)
            throw BaseCaseInfeasible("qv trace: no generator left to serve as slack");
        c.buses[c.bus_index(best)].kind = BusKind::Slack;
    }
    c.buses[bi].kind = BusKind::PV;
    Generator fict;
    fict.id = 0;
    for (const auto& g : c.generators) fict.id = std::max(fict.id, g.id);
    fict.id += 1;
    fict.bus = bus;
    fict.p_set = 0.0;
    fict.q_min = -1e7;
    fict.q_max = 1e7;
    fict.mbase = base.base_mva;
    fict.participation = 0.0;
    c.generators.push_back(fict);
    const std::size_t fict_row = c.generators.size() - 1;

    QVCurve curve;
    curve.bus = bus;
    const double dir = v_end >= v_start ? 1.0 : -1.0;
    const double step = std::abs(v_step);

    PFSolution warm = base_sol;
    auto solve_held = [&](double v_held, double& q_out) {
        c.buses[bi].v_setpoint = v_held;
        c.generators[fict_row].v_set = v_held;
        PFSolution sol = solve_power_flow(c, pf_opts, &warm);
        if (!sol.converged) return false;
        warm = sol;
        q_out = sol.gen_q[fict_row];
        return true;
    };

    for (double v = v_start; dir > 0 ? v <= v_end + 1e-9 : v >= v_end - 1e-9;
         v += dir * step) {
        double q = 0.0;
        if (solve_held(v, q)) {
            curve.points.push_back({v, q});
        } else {
            curve.gaps.push_back(v);
        }
    }
    if (curve.points.empty())
        throw BaseCaseInfeasible("qv trace: no swept point converged at bus " +
                                 std::to_string(bus));

    const auto valley = std::min_element(
        curve.points.begin(), curve.points.end(),
        [](const QVPoint& a, const QVPoint& b) { return a.q_mvar < b.q_mvar; });
    curve.valley_v = valley->v;
    curve.valley_q = valley->q_mvar;

    double q_nat = 0.0;
    warm = base_sol;
    if (solve_held(v_natural, q_nat)) curve.q_at_natural = q_nat;
    curve.reactive_margin = curve.q_at_natural - curve.valley_q;
    return curve;
}

/// Ranks candidate buses weakest-first by single-bus PV margin or QV
/// reactive margin. The incremental PV load uses the attacker shape
/// (fixed pf) so margins are comparable across buses.
inline WeakBusRanking rank_weak_buses(const Case& base, const std::vector<int>& candidates,
                                      WeakBusMetric metric, const PVOptions& pv_opts_in = {}) {
    if (candidates.empty())
        throw BaseCaseInfeasible("rank_weak_buses: no candidate buses");
    PVOptions pv_opts = pv_opts_in;
    pv_opts.mode = PVMode::AddAtPf;

    std::vector<int> pickup;
    for (const auto& g : base.generators)
        if (g.in_service && g.participation > 0.0) pickup.push_back(g.id);

    WeakBusRanking ranking;
    ranking.metric = metric;
    for (int bus : candidates) {
        WeakBusEntry e;
        e.bus = bus;
        PVCurve pv = trace_pv(base, {bus}, pickup, {bus}, pv_opts);
        e.pv_margin_mw = pv.knee_extra_mw;
        QVCurve qv = trace_qv(base, bus);
        e.qv_margin_mvar = qv.reactive_margin;
        ranking.entries.push_back(e);
    }
    std::sort(ranking.entries.begin(), ranking.entries.end(),
              [&](const WeakBusEntry& a, const WeakBusEntry& b) {
                  const double ma = metric == WeakBusMetric::PVMargin ? a.pv_margin_mw
                                                                      : a.qv_margin_mvar;
                  const double mb = metric == WeakBusMetric::PVMargin ? b.pv_margin_mw
                                                                      : b.qv_margin_mvar;
                  if (ma != mb) return ma < mb;
                  return a.bus < b.bus;
              });
    return ranking;
}

}  // namespace gridshock
