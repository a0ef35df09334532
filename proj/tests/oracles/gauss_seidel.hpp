#pragma once

// Self-contained Gauss-Seidel power-flow oracle. Assembles its own
// admittance matrix straight from the case data and iterates complex
// voltage updates; shares no solver code with the library.

#include <complex>
#include <vector>

#include "gridshock/netmodel.hpp"

namespace oracles {

struct GsResult {
    bool converged = false;
    int sweeps = 0;
    std::vector<double> v_mag;
    std::vector<double> v_ang;
    double losses_mw = 0.0;
    double losses_mvar = 0.0;
};

inline GsResult gauss_seidel(const gridshock::Case& c, double tol = 1e-10,
                             int max_sweeps = 200000) {
    using gridshock::BusKind;
    using gridshock::LoadModel;
    using C = std::complex<double>;
    const int n = static_cast<int>(c.buses.size());
    const double sb = c.base_mva;

    std::vector<std::vector<C>> y(n, std::vector<C>(n, C(0, 0)));
    auto idx = [&](int bus_id) { return c.bus_index(bus_id); };
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const int f = idx(br.from_bus), t = idx(br.to_bus);
        const C zs(br.r, br.x);
        const C ys = C(1, 0) / zs;
        const C ysh(0, br.b_charging / 2.0);
        const double tap = br.tap;
        y[f][f] += (ys + ysh) / (tap * tap);
        y[f][t] += -ys / tap;
        y[t][f] += -ys / tap;
        y[t][t] += ys + ysh;
    }
    for (int i = 0; i < n; ++i) y[i][i] += C(c.buses[i].shunt_g, c.buses[i].shunt_b);

    // Specified injections: constant-power part and impedance part.
    std::vector<C> s_fixed(n, C(0, 0)), s_z(n, C(0, 0));
    for (const auto& g : c.generators)
        if (g.in_service) s_fixed[idx(g.bus)] += C(g.p_set / sb, 0.0);
    for (const auto& l : c.loads) {
        if (!l.status) continue;
        if (l.model == LoadModel::ConstantPower)
            s_fixed[idx(l.bus)] -= C(l.p / sb, l.q / sb);
        else
            s_z[idx(l.bus)] += C(l.p / sb, l.q / sb);
    }

    std::vector<C> v(n);
    int slack = -1;
    for (int i = 0; i < n; ++i) {
        const auto& b = c.buses[i];
        v[i] = b.kind == BusKind::PQ ? C(1.0, 0.0) : C(b.v_setpoint, 0.0);
        if (b.kind == BusKind::Slack) slack = i;
    }

    auto current_at = [&](int i) {
        C acc(0, 0);
        for (int k = 0; k < n; ++k) acc += y[i][k] * v[k];
        return acc;
    };

    GsResult res;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int i = 0; i < n; ++i) {
            const auto& b = c.buses[i];
            if (i == slack) continue;
            const C s_load_z = s_z[i] * std::norm(v[i]);
            if (b.kind == BusKind::PV) {
                const C inj = v[i] * std::conj(current_at(i));
                C s = C(s_fixed[i].real() - s_load_z.real(), inj.imag());
                C sum(0, 0);
                for (int k = 0; k < n; ++k)
                    if (k != i) sum += y[i][k] * v[k];
                C vnew = (std::conj(s / v[i]) - sum) / y[i][i];
                v[i] = vnew / std::abs(vnew) * b.v_setpoint;
            } else {
                const C s = s_fixed[i] - s_load_z;
                C sum(0, 0);
                for (int k = 0; k < n; ++k)
                    if (k != i) sum += y[i][k] * v[k];
                v[i] = (std::conj(s / v[i]) - sum) / y[i][i];
            }
        }
        // True power mismatch at every non-slack bus.
        double worst = 0.0;
        for (int i = 0; i < n; ++i) {
            if (i == slack) continue;
            const C inj = v[i] * std::conj(current_at(i));
            const C s_spec = s_fixed[i] - s_z[i] * std::norm(v[i]);
            const double dp = std::abs(s_spec.real() - inj.real());
            const double dq = c.buses[i].kind == BusKind::PQ
                                  ? std::abs(s_spec.imag() - inj.imag())
                                  : 0.0;
            worst = std::max(worst, std::max(dp, dq));
        }
        if (worst < tol) {
            res.converged = true;
            res.sweeps = sweep + 1;
            break;
        }
    }

    res.v_mag.resize(n);
    res.v_ang.resize(n);
    C total(0, 0);
    for (int i = 0; i < n; ++i) {
        res.v_mag[i] = std::abs(v[i]);
        res.v_ang[i] = std::arg(v[i]);
        total += v[i] * std::conj(current_at(i));
    }
    res.losses_mw = total.real() * sb;
    res.losses_mvar = total.imag() * sb;
    return res;
}

}  // namespace oracles
