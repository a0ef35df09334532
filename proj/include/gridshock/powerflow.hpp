#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridshock/scenario.hpp"
#include "gridshock/ybus.hpp"

namespace gridshock {

struct PFOptions {
    double tol = 1e-8;      // pu mismatch
    int max_iter = 30;
    bool flat_start = false;
    bool enforce_q_limits = false;
    int max_q_rounds = 10;  // outer bus-type switching rounds
};

/// Converged operating point. Non-convergence is a first-class outcome:
/// converged=false with the last mismatch norm, consumed by PV tracing.
struct PFSolution {
    bool converged = false;
    int iterations = 0;
    double max_mismatch_pu = 0.0;
    std::vector<double> v_mag;   // pu, case bus order
    std::vector<double> v_ang;   // rad
    std::vector<double> gen_p;   // MW, case generator order
    std::vector<double> gen_q;   // MVAR
    std::vector<Complex> branch_flow_from;  // MVA into branch at from bus
    std::vector<Complex> branch_flow_to;    // MVA into branch at to bus
    Complex losses;  // MW + j MVAR

    double v_at(const Case& c, int bus_id) const { return v_mag[c.bus_index(bus_id)]; }
    double ang_at(const Case& c, int bus_id) const { return v_ang[c.bus_index(bus_id)]; }
};

namespace pfdetail {

struct BusData {
    BusKind kind;            // effective kind for this solve
    double p_fixed = 0.0;    // pu injection: gen p_set minus constant-power load
    double q_fixed = 0.0;
    double pz = 0.0;         // pu constant-impedance load at 1 pu voltage
    double qz = 0.0;
    double v_set = 1.0;
    double qg_min = 0.0;     // pu, aggregate over in-service generators
    double qg_max = 0.0;
    bool has_gen = false;
    bool pinned_at_max = false;
    bool pinned_at_min = false;
    int pin_count = 0;       // a bus that re-pins stays pinned (no oscillation)
};

/// The algebraic problem behind a power-flow solve: specified
/// injections, effective bus kinds, and the mismatch/Jacobian pair in
/// the unknown ordering [theta(non-slack); v(PQ)].
struct Problem {
    Eigen::MatrixXcd y;
    std::vector<BusData> data;
    int n = 0;
    int slack = -1;
    std::vector<int> ang_idx, vmag_idx;

    void rebuild_index() {
        ang_idx.clear();
        vmag_idx.clear();
        for (int i = 0; i < n; ++i) {
            if (i == slack) continue;
            ang_idx.push_back(i);
            if (data[i].kind == BusKind::PQ) vmag_idx.push_back(i);
        }
    }

    void calc_pq(const Eigen::VectorXd& vm, const Eigen::VectorXd& va, Eigen::VectorXd& pc,
                 Eigen::VectorXd& qc) const {
        pc.setZero(n);
        qc.setZero(n);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < n; ++k) {
                const Complex yik = y(i, k);
                if (yik == Complex(0.0, 0.0)) continue;
                const double th = va(i) - va(k);
                pc(i) += vm(i) * vm(k) * (yik.real() * std::cos(th) + yik.imag() * std::sin(th));
                qc(i) += vm(i) * vm(k) * (yik.real() * std::sin(th) - yik.imag() * std::cos(th));
            }
        }
    }

    /// Specified reactive injection at bus i, including pinned limits
    /// and voltage-dependent load.
    double q_spec(int i, double v) const {
        double q = data[i].q_fixed - data[i].qz * v * v;
        if (data[i].pinned_at_max) q += data[i].qg_max;
        if (data[i].pinned_at_min) q += data[i].qg_min;
        return q;
    }

    double p_spec(int i, double v) const {
        return data[i].p_fixed - data[i].pz * v * v;
    }

    Eigen::VectorXd mismatch(const Eigen::VectorXd& vm, const Eigen::VectorXd& va) const {
        const int na = static_cast<int>(ang_idx.size());
        const int nv = static_cast<int>(vmag_idx.size());
        Eigen::VectorXd pc, qc, mis(na + nv);
        calc_pq(vm, va, pc, qc);
        for (int a = 0; a < na; ++a) {
            const int i = ang_idx[a];
            mis(a) = p_spec(i, vm(i)) - pc(i);
        }
        for (int v = 0; v < nv; ++v) {
            const int i = vmag_idx[v];
            mis(na + v) = q_spec(i, vm(i)) - qc(i);
        }
        return mis;
    }

    /// d(calc - spec)/dx, so that jacobian * dx = mismatch is the
    /// Newton step.
    Eigen::MatrixXd jacobian(const Eigen::VectorXd& vm, const Eigen::VectorXd& va) const {
        const int na = static_cast<int>(ang_idx.size());
        const int nv = static_cast<int>(vmag_idx.size());
        Eigen::VectorXd pc, qc;
        calc_pq(vm, va, pc, qc);
        Eigen::MatrixXd jac(na + nv, na + nv);
        jac.setZero();
        for (int a = 0; a < na; ++a) {
            const int i = ang_idx[a];
            for (int b = 0; b < na; ++b) {
                const int k = ang_idx[b];
                if (i == k) {
                    jac(a, b) = -qc(i) - y(i, i).imag() * vm(i) * vm(i);
                } else {
                    const Complex yik = y(i, k);
                    const double th = va(i) - va(k);
                    jac(a, b) =
                        vm(i) * vm(k) * (yik.real() * std::sin(th) - yik.imag() * std::cos(th));
                }
            }
            for (int v = 0; v < nv; ++v) {
                const int k = vmag_idx[v];
                if (i == k) {
                    jac(a, na + v) =
                        pc(i) / vm(i) + y(i, i).real() * vm(i) + 2.0 * data[i].pz * vm(i);
                } else {
                    const Complex yik = y(i, k);
                    const double th = va(i) - va(k);
                    jac(a, na + v) =
                        vm(i) * (yik.real() * std::cos(th) + yik.imag() * std::sin(th));
                }
            }
        }
        for (int q = 0; q < nv; ++q) {
            const int i = vmag_idx[q];
            for (int b = 0; b < na; ++b) {
                const int k = ang_idx[b];
                if (i == k) {
                    jac(na + q, b) = pc(i) - y(i, i).real() * vm(i) * vm(i);
                } else {
                    const Complex yik = y(i, k);
                    const double th = va(i) - va(k);
                    jac(na + q, b) =
                        -vm(i) * vm(k) * (yik.real() * std::cos(th) + yik.imag() * std::sin(th));
                }
            }
            for (int v = 0; v < nv; ++v) {
                const int k = vmag_idx[v];
                if (i == k) {
                    jac(na + q, na + v) =
                        qc(i) / vm(i) - y(i, i).imag() * vm(i) + 2.0 * data[i].qz * vm(i);
                } else {
                    const Complex yik = y(i, k);
                    const double th = va(i) - va(k);
                    jac(na + q, na + v) =
                        vm(i) * (yik.real() * std::sin(th) - yik.imag() * std::cos(th));
                }
            }
        }
        return jac;
    }
};

inline std::vector<BusData> classify(const Case& c) {
    const double sb = c.base_mva;
    std::vector<BusData> data(c.buses.size());
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        data[i].kind = c.buses[i].kind;
        data[i].v_set = c.buses[i].v_setpoint;
    }
    for (const auto& g : c.generators) {
        if (!g.in_service) continue;
        auto& d = data[c.bus_index(g.bus)];
        d.p_fixed += g.p_set / sb;
        d.qg_min += g.q_min / sb;
        d.qg_max += g.q_max / sb;
        d.has_gen = true;
    }
    for (const auto& l : c.loads) {
        if (!l.status) continue;
        auto& d = data[c.bus_index(l.bus)];
        if (l.model == LoadModel::ConstantPower) {
            d.p_fixed -= l.p / sb;
            d.q_fixed -= l.q / sb;
        } else {
            d.pz += l.p / sb;
            d.qz += l.q / sb;
        }
    }
    // A regulated bus without any live generator cannot hold voltage.
    for (auto& d : data)
        if (d.kind == BusKind::PV && !d.has_gen) d.kind = BusKind::PQ;
    return data;
}

inline Problem make_problem(const Case& c) {
    Problem p;
    p.n = static_cast<int>(c.buses.size());
    p.y = Eigen::MatrixXcd(build_ybus(c));  // cases are small; dense is simpler
    p.data = classify(c);
    for (int i = 0; i < p.n; ++i)
        if (p.data[i].kind == BusKind::Slack) p.slack = i;
    p.rebuild_index();
    return p;
}

}  // namespace pfdetail

/// Testing/diagnostic hook: the power mismatch vector at a given
/// voltage profile, ordering [P(non-slack); Q(PQ)].
inline Eigen::VectorXd pf_mismatch(const Case& c, const Eigen::VectorXd& vm,
                                   const Eigen::VectorXd& va) {
    return pfdetail::make_problem(c).mismatch(vm, va);
}

/// Testing/diagnostic hook: the analytic Newton Jacobian at a voltage
/// profile (sign convention: jacobian * dx = mismatch).
inline Eigen::MatrixXd pf_jacobian(const Case& c, const Eigen::VectorXd& vm,
                                   const Eigen::VectorXd& va) {
    return pfdetail::make_problem(c).jacobian(vm, va);
}

/// Polar Newton-Raphson with the full Jacobian refactorized each
/// iteration. With enforce_q_limits, one PV bus converts per outer
/// round when its aggregate generator Q leaves [q_min, q_max]; pinned
/// buses re-convert when their voltage backs off the limit side.
inline PFSolution solve_power_flow(const Case& c, const PFOptions& opts = {},
                                   const PFSolution* warm_start = nullptr) {
    require_valid(c);
    if (!(opts.tol > 0.0) || opts.max_iter < 1)
        throw ValidationError({"pf options: tol must be > 0 and max_iter >= 1"});
    if (!connected_to_slack(c))
        throw IslandedBusError("case '" + c.name + "' has buses unreachable from the slack");

    const int n = static_cast<int>(c.buses.size());
    const double sb = c.base_mva;
    auto prob = pfdetail::make_problem(c);

    Eigen::VectorXd vm(n), va(n);
    for (int i = 0; i < n; ++i) {
        vm(i) = prob.data[i].kind != BusKind::PQ ? prob.data[i].v_set : 1.0;
        va(i) = 0.0;
    }
    if (!opts.flat_start && warm_start != nullptr &&
        warm_start->v_mag.size() == static_cast<std::size_t>(n)) {
        for (int i = 0; i < n; ++i) {
            vm(i) = warm_start->v_mag[i];
            va(i) = warm_start->v_ang[i];
        }
        for (int i = 0; i < n; ++i)
            if (prob.data[i].kind != BusKind::PQ) vm(i) = prob.data[i].v_set;
    }

    PFSolution sol;
    sol.v_mag.resize(n);
    sol.v_ang.resize(n);

    int total_iters = 0;
    bool inner_converged = false;
    double last_mismatch = 0.0;

    const int rounds = opts.enforce_q_limits ? opts.max_q_rounds : 1;
    for (int round = 0; round < rounds; ++round) {
        prob.rebuild_index();
        const int na = static_cast<int>(prob.ang_idx.size());
        const int nv = static_cast<int>(prob.vmag_idx.size());

        inner_converged = false;
        for (int iter = 0; iter <= opts.max_iter; ++iter) {
            Eigen::VectorXd mis = prob.mismatch(vm, va);
            last_mismatch = mis.size() > 0 ? mis.cwiseAbs().maxCoeff() : 0.0;
            if (last_mismatch <= opts.tol) {
                inner_converged = true;
                total_iters += iter;
                break;
            }
            if (iter == opts.max_iter) {
                total_iters += iter;
                break;
            }
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(prob.jacobian(vm, va));
            Eigen::VectorXd dx = lu.solve(mis);
            if (!dx.allFinite()) break;
            for (int a = 0; a < na; ++a) va(prob.ang_idx[a]) += dx(a);
            for (int v = 0; v < nv; ++v) {
                vm(prob.vmag_idx[v]) += dx(na + v);
                if (vm(prob.vmag_idx[v]) < 1e-3) vm(prob.vmag_idx[v]) = 1e-3;
            }
        }

        if (!inner_converged || !opts.enforce_q_limits) break;

        // Check reactive limits at regulated buses; flip the worst
        // violation (or recover one pinned bus) per round.
        Eigen::VectorXd pc, qc;
        prob.calc_pq(vm, va, pc, qc);
        int worst_bus = -1;
        double worst_amount = 1e-6;
        bool worst_at_max = false;
        for (int i = 0; i < n; ++i) {
            auto& d = prob.data[i];
            if (i == prob.slack || d.kind != BusKind::PV) continue;
            const double q_gen = qc(i) - d.q_fixed + d.qz * vm(i) * vm(i);
            if (q_gen > d.qg_max + worst_amount) {
                worst_bus = i;
                worst_amount = q_gen - d.qg_max;
                worst_at_max = true;
            } else if (q_gen < d.qg_min - worst_amount) {
                worst_bus = i;
                worst_amount = d.qg_min - q_gen;
                worst_at_max = false;
            }
        }
        if (worst_bus >= 0) {
            prob.data[worst_bus].kind = BusKind::PQ;
            prob.data[worst_bus].pinned_at_max = worst_at_max;
            prob.data[worst_bus].pinned_at_min = !worst_at_max;
            prob.data[worst_bus].pin_count += 1;
            log_debug("pf: bus " + std::to_string(c.buses[worst_bus].id) + " pinned at q" +
                      (worst_at_max ? "max" : "min"));
            if (round == rounds - 1) inner_converged = false;  // ran out of rounds
            continue;
        }
        // Recovery: pinned bus whose voltage crossed back over its
        // setpoint. A bus that already re-pinned stays put.
        int recover = -1;
        for (int i = 0; i < n; ++i) {
            const auto& d = prob.data[i];
            if (d.pin_count >= 2) continue;
            if ((d.pinned_at_max && vm(i) > d.v_set + 1e-9) ||
                (d.pinned_at_min && vm(i) < d.v_set - 1e-9)) {
                recover = i;
                break;
            }
        }
        if (recover >= 0) {
            prob.data[recover].kind = BusKind::PV;
            prob.data[recover].pinned_at_max = prob.data[recover].pinned_at_min = false;
            vm(recover) = prob.data[recover].v_set;
            log_debug("pf: bus " + std::to_string(c.buses[recover].id) + " released to PV");
            if (round == rounds - 1) inner_converged = false;
            continue;
        }
        break;  // converged with all limits respected
    }

    sol.converged = inner_converged;
    sol.iterations = total_iters;
    sol.max_mismatch_pu = last_mismatch;
    for (int i = 0; i < n; ++i) {
        sol.v_mag[i] = vm(i);
        sol.v_ang[i] = va(i);
    }
    if (!sol.converged) return sol;

    // Recover generator outputs from the solved voltages.
    Eigen::VectorXd pc, qc;
    prob.calc_pq(vm, va, pc, qc);
    sol.gen_p.assign(c.generators.size(), 0.0);
    sol.gen_q.assign(c.generators.size(), 0.0);
    for (std::size_t gi = 0; gi < c.generators.size(); ++gi) {
        const auto& g = c.generators[gi];
        if (!g.in_service) continue;
        const int i = c.bus_index(g.bus);
        double p_load = 0.0, q_load = 0.0;
        for (const auto& l : c.loads) {
            if (!l.status || l.bus != g.bus) continue;
            const double scale = l.model == LoadModel::ConstantImpedance ? vm(i) * vm(i) : 1.0;
            p_load += l.p / sb * scale;
            q_load += l.q / sb * scale;
        }
        const double p_bus = pc(i) + p_load;
        const double q_bus = qc(i) + q_load;
        // Share among in-service generators at the same bus.
        double psum = 0.0, qrange = 0.0;
        int count = 0;
        for (const auto& og : c.generators) {
            if (!og.in_service || og.bus != g.bus) continue;
            psum += og.p_set;
            qrange += (og.q_max - og.q_min);
            ++count;
        }
        if (c.buses[i].kind == BusKind::Slack) {
            const double share = psum > 0.0 ? g.p_set / psum : 1.0 / count;
            sol.gen_p[gi] = p_bus * sb * share;
        } else {
            sol.gen_p[gi] = g.p_set;
        }
        const double qshare = qrange > 0.0 ? (g.q_max - g.q_min) / qrange : 1.0 / count;
        sol.gen_q[gi] = q_bus * sb * qshare;
    }

    // Branch flows; losses are the total network absorption (series,
    // charging, and bus shunts together).
    sol.branch_flow_from.assign(c.branches.size(), Complex(0, 0));
    sol.branch_flow_to.assign(c.branches.size(), Complex(0, 0));
    for (std::size_t bi = 0; bi < c.branches.size(); ++bi) {
        const auto& br = c.branches[bi];
        if (!br.in_service) continue;
        const int f = c.bus_index(br.from_bus);
        const int t = c.bus_index(br.to_bus);
        const BranchStamp s = branch_stamp(br);
        const Complex vf = std::polar(vm(f), va(f));
        const Complex vt = std::polar(vm(t), va(t));
        sol.branch_flow_from[bi] = vf * std::conj(s.yff * vf + s.yft * vt) * sb;
        sol.branch_flow_to[bi] = vt * std::conj(s.ytf * vf + s.ytt * vt) * sb;
    }
    Complex total_loss(0.0, 0.0);
    for (int i = 0; i < n; ++i) total_loss += Complex(pc(i), qc(i));
    sol.losses = total_loss * sb;
    return sol;
}

/// Materializes a set of already-active scenario events onto a copy of
/// the case: connects become tagged constant-power loads, disconnects
/// drop them, scales resize existing loads relative to their values in
/// the input case (sequential when repeated).
inline Case apply_scenario_snapshot(const Case& c, const std::vector<AttackEvent>& events) {
    Case derived = c;
    int next_load_id = 0;
    for (const auto& l : derived.loads) next_load_id = std::max(next_load_id, l.id);
    for (const auto& e : events) {
        if (derived.bus_index(e.bus) < 0 && e.action != AttackAction::Disconnect)
            throw ValidationError(
                {"scenario event references unknown bus " + std::to_string(e.bus)});
        switch (e.action) {
            case AttackAction::Connect: {
                LoadItem l;
                l.id = ++next_load_id;
                l.bus = e.bus;
                l.p = e.p_mw;
                l.q = e.q_mvar;
                l.model = LoadModel::ConstantPower;
                l.status = true;
                l.tag = e.tag;
                derived.loads.push_back(l);
                break;
            }
            case AttackAction::Disconnect: {
                bool found = false;
                for (auto& l : derived.loads) {
                    if (l.tag == e.tag && l.status) {
                        l.status = false;
                        found = true;
                    }
                }
                if (!found)
                    throw ValidationError(
                        {"disconnect of unknown or inactive tag '" + e.tag + "'"});
                break;
            }
            case AttackAction::ScaleExistingLoad: {
                bool found = false;
                for (auto& l : derived.loads) {
                    if (!l.status) continue;
                    if (!e.tag.empty() ? l.tag == e.tag : l.bus == e.bus) {
                        l.p *= e.scale;
                        l.q *= e.scale;
                        found = true;
                    }
                }
                if (!found)
                    throw ValidationError({"scale event matched no active load (bus " +
                                           std::to_string(e.bus) + ", tag '" + e.tag + "')"});
                break;
            }
        }
    }
    require_valid(derived);
    return derived;
}

/// The subset of scenario events in force at time t: live connects,
/// plus every scale event that has fired.
inline std::vector<AttackEvent> events_active_at(const Scenario& s, double t) {
    std::vector<AttackEvent> active;
    std::map<std::string, std::optional<AttackEvent>> live;
    for (const auto& e : s.events) {
        if (e.t > t) break;
        switch (e.action) {
            case AttackAction::Connect: live[e.tag] = e; break;
            case AttackAction::Disconnect: live[e.tag] = std::nullopt; break;
            case AttackAction::ScaleExistingLoad: active.push_back(e); break;
        }
    }
    for (const auto& [tag, ev] : live)
        if (ev) active.push_back(*ev);
    return active;
}

}  // namespace gridshock
