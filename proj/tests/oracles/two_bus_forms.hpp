#pragma once

// Closed-form loadability limits for the slack--line--load two-bus
// system, used as independent oracles for the PV knee and QV valley.

#include <cmath>

namespace oracles {

/// Maximum receiving-end real power over a lossless line of reactance
/// x, constant power factor angle phi (tan = q/p), sending voltage v1:
/// Pmax = v1^2 (sqrt(1+t^2) - t) / (2 x).
inline double two_bus_pv_limit_mw(double v1, double x_pu, double tanphi, double base_mva) {
    const double p_pu = v1 * v1 * (std::sqrt(1.0 + tanphi * tanphi) - tanphi) / (2.0 * x_pu);
    return p_pu * base_mva;
}

/// Fictitious-source reactive output required to hold v2 at the load
/// bus, for a constant-power load p + jq behind a lossless line:
/// delta from the P balance, then Qf = q - (v1 v2 cos(delta) - v2^2)/x.
/// Returns false when the held point cannot carry the load.
inline bool two_bus_qv_point(double v1, double x_pu, double p_pu, double q_pu, double v2,
                             double& qf_pu) {
    const double s = p_pu * x_pu / (v1 * v2);
    if (std::abs(s) > 1.0) return false;
    const double delta = std::asin(s);
    qf_pu = q_pu - (v1 * v2 * std::cos(delta) - v2 * v2) / x_pu;
    return true;
}

/// QV valley by dense scan of the closed form.
inline void two_bus_qv_valley(double v1, double x_pu, double p_pu, double q_pu,
                              double v_lo, double v_hi, double& valley_v,
                              double& valley_q_pu) {
    valley_q_pu = 1e300;
    for (double v = v_lo; v <= v_hi + 1e-12; v += 1e-4) {
        double qf;
        if (!two_bus_qv_point(v1, x_pu, p_pu, q_pu, v, qf)) continue;
        if (qf < valley_q_pu) {
            valley_q_pu = qf;
            valley_v = v;
        }
    }
}

}  // namespace oracles
