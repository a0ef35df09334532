#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridshock/powerflow.hpp"
#include "gridshock/protection.hpp"
#include "gridshock/timeseries.hpp"

namespace gridshock {

struct SimConfig {
    double t_end = 60.0;
    double dt = 0.005;
    int output_every = 2;
    RelaySettings relay_settings;
    // Generators present in the case with in_service=false that close
    // onto the grid mid-run, initialized at their p_set.
    std::vector<std::pair<double, int>> gen_connects;  // (t, generator id)
};

/// Dynamic state of one machine: GENSAL fluxes, IEEE T1 exciter and
/// IEEE G2 governor states, all in system-base per-unit.
struct MachineState {
    double delta = 0.0;   // rad
    double omega = 1.0;   // pu speed
    double eqp = 0.0;     // E'q
    double psi1d = 0.0;   // d-axis damper flux
    double psi2q = 0.0;   // q-axis damper flux
    double efd = 0.0;     // field voltage
    double vr = 0.0;      // regulator output
    double rf = 0.0;      // rate feedback state
    std::array<double, 3> gov_x{0.0, 0.0, 0.0};
    double pm = 0.0;      // mechanical power, derived output
};

namespace dyndetail {

/// Quadratic saturation S(E) = b (E - a)^2 / E fitted through two
/// sample points; zero below the threshold a.
struct SatCurve {
    double a = 0.0;
    double b = 0.0;
    double operator()(double e) const {
        if (b <= 0.0 || e <= a || e <= 0.0) return 0.0;
        const double d = e - a;
        return b * d * d / e;
    }
};

inline SatCurve fit_saturation(double e1, double s1, double e2, double s2) {
    SatCurve c;
    if (s1 <= 1e-12 && s2 <= 1e-12) return c;
    if (s1 <= 1e-12) {
        c.a = e1;
        c.b = s2 * e2 / ((e2 - e1) * (e2 - e1));
        return c;
    }
    const double r = std::sqrt((s2 * e2) / (s1 * e1));
    if (std::abs(r - 1.0) < 1e-9) {
        c.a = 0.0;
        c.b = s1 * e1 / (e1 * e1);
        return c;
    }
    c.a = (r * e1 - e2) / (r - 1.0);
    c.b = s1 * e1 / ((e1 - c.a) * (e1 - c.a));
    return c;
}

/// Machine constants converted to system base at construction.
struct MachineModel {
    int gen_id = 0;
    int bus = 0;   // bus id
    int bus_idx = 0;
    double two_h = 10.0;
    double damping = 0.0;
    double xd = 0, xq = 0, xdp = 0, xdpp = 0, xl = 0, ra = 0;
    double td0p = 1, td0pp = 1, tq0pp = 1;
    double gamma_d1 = 0, gamma_d2 = 0;
    SatCurve sat_m;
    // exciter
    double ka = 0, ta = 1, ke = 1, te = 1, kf = 0, tf = 1, vrmax = 0, vrmin = 0;
    SatCurve sat_x;
    // governor
    double gk = 0, gt1 = 1, gt2 = 0, gt3 = 1, gt4 = 0, gpmax = 0, gpmin = 0;
    Complex y_norton;
    // operating references fixed at initialization
    double vref = 1.0;
    double pref = 0.0;
};

inline MachineModel make_machine(const Case& c, const Generator& g) {
    if (!g.dynamics)
        throw InitInfeasible("generator " + std::to_string(g.id) + " has no dynamics block");
    const auto& dyn = *g.dynamics;
    const double zb = c.base_mva / g.mbase;  // impedance conversion factor
    const double pb = g.mbase / c.base_mva;  // power conversion factor
    MachineModel m;
    m.gen_id = g.id;
    m.bus = g.bus;
    m.bus_idx = c.bus_index(g.bus);
    m.two_h = 2.0 * dyn.machine.h * pb;
    m.damping = dyn.machine.d * pb;
    m.xd = dyn.machine.xd * zb;
    m.xq = dyn.machine.xq * zb;
    m.xdp = dyn.machine.xdp * zb;
    m.xdpp = dyn.machine.xdpp * zb;
    m.xl = dyn.machine.xl * zb;
    m.ra = dyn.machine.ra * zb;
    m.td0p = dyn.machine.td0p;
    m.td0pp = dyn.machine.td0pp;
    m.tq0pp = dyn.machine.tq0pp;
    m.gamma_d1 = (m.xdpp - m.xl) / (m.xdp - m.xl);
    m.gamma_d2 = (m.xdp - m.xdpp) / ((m.xdp - m.xl) * (m.xdp - m.xl));
    m.sat_m = fit_saturation(1.0, dyn.machine.s10, 1.2, dyn.machine.s12);
    m.ka = dyn.exciter.ka;
    m.ta = dyn.exciter.ta;
    m.ke = dyn.exciter.ke;
    m.te = dyn.exciter.te;
    m.kf = dyn.exciter.kf;
    m.tf = dyn.exciter.tf;
    m.vrmax = dyn.exciter.vrmax;
    m.vrmin = dyn.exciter.vrmin;
    m.sat_x = fit_saturation(dyn.exciter.e1, dyn.exciter.se1, dyn.exciter.e2, dyn.exciter.se2);
    m.gk = dyn.governor.k * pb;
    m.gt1 = dyn.governor.t1;
    m.gt2 = dyn.governor.t2;
    m.gt3 = dyn.governor.t3;
    m.gt4 = dyn.governor.t4;
    m.gpmax = dyn.governor.pmax * pb;
    m.gpmin = dyn.governor.pmin * pb;
    m.y_norton = 1.0 / Complex(m.ra, m.xdpp);
    return m;
}

inline Complex rotor_rotation(double delta) { return std::polar(1.0, delta - kPi / 2.0); }

/// Subtransient EMF phasor in the network frame (classical constant-flux
/// form, no speed scaling). e''d = -psi2q, e''q = psi''d.
inline Complex internal_emf(const MachineModel& m, const MachineState& s) {
    const double psi_dpp = m.gamma_d1 * s.eqp + (1.0 - m.gamma_d1) * s.psi1d;
    const Complex e_dq(-s.psi2q, psi_dpp);
    return e_dq * rotor_rotation(s.delta);
}

/// Governor output before limits, from its canonical states.
inline double governor_output(const MachineModel& m, const MachineState& s) {
    const double y1 = m.gk * (s.gov_x[0] + m.gt2 * s.gov_x[1]);
    if (m.gt4 > 1e-9) return 3.0 * s.gov_x[2] - 2.0 * y1;
    return y1;
}

inline double mech_power(const MachineModel& m, const MachineState& s) {
    return std::clamp(m.pref + governor_output(m, s), m.gpmin, m.gpmax);
}

struct MachineDeriv {
    double delta, omega, eqp, psi1d, psi2q, efd, vr, rf;
    std::array<double, 3> gov_x;
};

/// Full right-hand side given the machine's terminal voltage.
inline MachineDeriv machine_rhs(const MachineModel& m, const MachineState& s, Complex v_term,
                                double omega_s) {
    MachineDeriv d{};
    const Complex rot = rotor_rotation(s.delta);
    const Complex e_net = internal_emf(m, s);
    const Complex i_net = (e_net - v_term) * m.y_norton;  // generator convention
    const Complex i_dq = i_net / rot;
    const double id = i_dq.real(), iq = i_dq.imag();

    const double pe = (e_net * std::conj(i_net)).real();
    d.delta = omega_s * (s.omega - 1.0);
    d.omega = (s.pm - pe - m.damping * (s.omega - 1.0)) / m.two_h;

    const double xad_ifd =
        s.eqp * (1.0 + m.sat_m(s.eqp)) +
        (m.xd - m.xdp) * (id + m.gamma_d2 * (s.eqp - s.psi1d - (m.xdp - m.xl) * id));
    d.eqp = (s.efd - xad_ifd) / m.td0p;
    d.psi1d = (s.eqp - s.psi1d - (m.xdp - m.xl) * id) / m.td0pp;
    d.psi2q = (-s.psi2q - (m.xq - m.xdpp) * iq) / m.tq0pp;

    const double vt = std::abs(v_term);
    const double vf = (m.kf / m.tf) * s.efd - s.rf;
    double dvr = (m.ka * (m.vref - vt - vf) - s.vr) / m.ta;
    if (s.vr >= m.vrmax && dvr > 0.0) dvr = 0.0;  // non-windup ceiling
    if (s.vr <= m.vrmin && dvr < 0.0) dvr = 0.0;
    d.vr = dvr;
    d.efd = (s.vr - (m.ke * s.efd + m.sat_x(s.efd) * s.efd)) / m.te;
    d.rf = ((m.kf / m.tf) * s.efd - s.rf) / m.tf;

    const double u = -(s.omega - 1.0);
    d.gov_x[0] = s.gov_x[1];
    d.gov_x[1] = (u - s.gov_x[0] - (m.gt1 + m.gt3) * s.gov_x[1]) / (m.gt1 * m.gt3);
    if (m.gt4 > 1e-9) {
        const double y1 = m.gk * (s.gov_x[0] + m.gt2 * s.gov_x[1]);
        d.gov_x[2] = (y1 - s.gov_x[2]) / (m.gt4 / 2.0);
    } else {
        d.gov_x[2] = 0.0;
    }
    return d;
}

inline void axpy(MachineState& out, const MachineState& base, const MachineDeriv& d,
                 double h) {
    out.delta = base.delta + h * d.delta;
    out.omega = base.omega + h * d.omega;
    out.eqp = base.eqp + h * d.eqp;
    out.psi1d = base.psi1d + h * d.psi1d;
    out.psi2q = base.psi2q + h * d.psi2q;
    out.efd = base.efd + h * d.efd;
    out.vr = base.vr + h * d.vr;
    out.rf = base.rf + h * d.rf;
    for (int i = 0; i < 3; ++i) out.gov_x[i] = base.gov_x[i] + h * d.gov_x[i];
    out.pm = base.pm;
}

struct ActiveLoad {
    int bus_idx = 0;
    Complex s_base;     // pu at 1.0 pu voltage (impedance model anchor)
    Complex s_now;      // pu, after any scale events
    LoadModel model = LoadModel::ConstantPower;
    std::string tag;
    bool live = true;
};

}  // namespace dyndetail

/// Initializes every in-service machine at the converged power flow so
/// that the operating point is an exact fixed point of the ODEs.
inline std::vector<MachineState> init_machine_state(const Case& c, const PFSolution& pf,
                                                    const std::vector<dyndetail::MachineModel>& models,
                                                    const std::vector<int>& gen_rows) {
    std::vector<MachineState> states(models.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
        const auto& m = models[k];
        const int gi = gen_rows[k];
        const double sb = c.base_mva;
        const Complex v = std::polar(pf.v_mag[m.bus_idx], pf.v_ang[m.bus_idx]);
        const Complex s(pf.gen_p[gi] / sb, pf.gen_q[gi] / sb);
        const Complex i = std::conj(s / v);

        const Complex eq_locator = v + Complex(m.ra, m.xq) * i;
        MachineState st;
        st.delta = std::arg(eq_locator);
        st.omega = 1.0;
        const Complex rot = dyndetail::rotor_rotation(st.delta);
        const Complex v_dq = v / rot;
        const Complex i_dq = i / rot;
        const double vd = v_dq.real(), vq = v_dq.imag();
        const double id = i_dq.real(), iq = i_dq.imag();

        st.eqp = vq + m.ra * iq + m.xdp * id;
        st.psi1d = st.eqp - (m.xdp - m.xl) * id;
        st.psi2q = -(m.xq - m.xdpp) * iq;

        const double edpp = -st.psi2q;
        const double eqpp = st.eqp - (m.xdp - m.xdpp) * id;
        st.pm = edpp * id + eqpp * iq;  // air-gap power at synchronous speed

        st.efd = st.eqp * (1.0 + m.sat_m(st.eqp)) + (m.xd - m.xdp) * id;
        st.vr = m.ke * st.efd + m.sat_x(st.efd) * st.efd;
        st.rf = (m.kf / m.tf) * st.efd;
        (void)vd;
        states[k] = st;
    }
    return states;
}

namespace dyndetail {

/// Sets the fixed references so the initialized point is stationary,
/// checking regulator and governor capability.
inline void fix_references(MachineModel& m, const MachineState& st, double vt) {
    if (st.vr > m.vrmax + 1e-9 || st.vr < m.vrmin - 1e-9)
        throw InitInfeasible("generator " + std::to_string(m.gen_id) +
                             ": required regulator output " + std::to_string(st.vr) +
                             " outside [" + std::to_string(m.vrmin) + ", " +
                             std::to_string(m.vrmax) + "]");
    if (st.pm > m.gpmax + 1e-9 || st.pm < m.gpmin - 1e-9)
        throw InitInfeasible("generator " + std::to_string(m.gen_id) +
                             ": mechanical power " + std::to_string(st.pm) +
                             " outside governor limits");
    m.vref = vt + st.vr / m.ka;
    m.pref = st.pm;
}

}  // namespace dyndetail

/// Time-domain transient simulator: GENSAL machines behind their
/// subtransient impedance, constant-power loads resolved by an inner
/// Newton solve each RK4 stage, scenario events and relay trips on
/// step boundaries.
class Simulator {
  public:
    Simulator(const Case& c, const Scenario& scenario, const SimConfig& cfg)
        : case_(c), cfg_(cfg), scenario_(scenario) {
        require_valid(c);
        require_valid(scenario);
        if (!(cfg.dt > 0.0 && cfg.dt <= 0.02))
            throw ValidationError({"sim config: dt must be within (0, 0.02]"});
        if (!(cfg.t_end > 0.0)) throw ValidationError({"sim config: t_end must be > 0"});
        if (cfg.output_every < 1)
            throw ValidationError({"sim config: output_every must be >= 1"});
        if (scenario.relay_settings) relay_settings_ = *scenario.relay_settings;
        else relay_settings_ = cfg.relay_settings;
        auto rv = validate_relay_settings(relay_settings_, c.f_nominal);
        if (!rv.empty()) throw ValidationError(std::move(rv));
        omega_s_ = 2.0 * kPi * c.f_nominal;
    }

    /// Runs the scenario to t_end (or collapse) and returns the sampled
    /// trajectory plus the event log.
    std::pair<TimeSeries, EventLog> run() {
        initialize();
        const int n_steps = static_cast<int>(std::llround(cfg_.t_end / cfg_.dt));
        sample(0.0);
        for (int k = 0; k < n_steps; ++k) {
            const double t = k * cfg_.dt;
            apply_events_at_step(k);
            if (!step(t)) {
                series_.collapsed = true;
                series_.collapse_time = t;
                log_.push_back({t, "network", "flag", "AlgebraicSolveFailure"});
                log_warn("dynamics: algebraic solve failed at t=" + std::to_string(t) +
                         " s; trajectory flagged collapsed");
                break;
            }
            const double t_new = (k + 1) * cfg_.dt;
            scan_relays(t_new);
            detect_instability(t_new);
            if ((k + 1) % cfg_.output_every == 0) sample(t_new);
        }
        finalize_series();
        return {series_, log_};
    }

    /// Largest machine-state derivative magnitude at the initialized
    /// operating point (equilibrium residual).
    double equilibrium_residual() {
        initialize();
        double worst = 0.0;
        for (std::size_t k = 0; k < models_.size(); ++k) {
            if (!online_[k]) continue;
            const auto d = dyndetail::machine_rhs(models_[k], states_[k],
                                                  v_now_[models_[k].bus_idx], omega_s_);
            for (double x : {d.delta, d.omega, d.eqp, d.psi1d, d.psi2q, d.efd, d.vr, d.rf,
                             d.gov_x[0], d.gov_x[1], d.gov_x[2]})
                worst = std::max(worst, std::abs(x));
        }
        return worst;
    }

    const Case& case_data() const { return case_; }

  private:
    void initialize() {
        if (initialized_) return;
        PFOptions pf_opts;
        pf_opts.tol = 1e-10;
        pf_opts.max_iter = 50;
        pf_ = solve_power_flow(case_, pf_opts);
        if (!pf_.converged)
            throw BaseCaseInfeasible("power flow for '" + case_.name +
                                     "' did not converge; cannot initialize dynamics");
        for (std::size_t gi = 0; gi < case_.generators.size(); ++gi) {
            const auto& g = case_.generators[gi];
            if (!g.in_service) continue;
            models_.push_back(dyndetail::make_machine(case_, g));
            gen_rows_.push_back(static_cast<int>(gi));
        }
        if (models_.empty())
            throw InitInfeasible("case '" + case_.name + "' has no in-service machines");
        states_ = init_machine_state(case_, pf_, models_, gen_rows_);
        online_.assign(models_.size(), true);
        for (std::size_t k = 0; k < models_.size(); ++k)
            dyndetail::fix_references(models_[k], states_[k],
                                      pf_.v_mag[models_[k].bus_idx]);

        const int n = static_cast<int>(case_.buses.size());
        v_now_.resize(n);
        for (int i = 0; i < n; ++i) v_now_[i] = std::polar(pf_.v_mag[i], pf_.v_ang[i]);

        for (const auto& l : case_.loads) {
            if (!l.status) continue;
            dyndetail::ActiveLoad al;
            al.bus_idx = case_.bus_index(l.bus);
            al.s_base = Complex(l.p, l.q) / case_.base_mva;
            al.s_now = al.s_base;
            al.model = l.model;
            al.tag = l.tag;
            loads_.push_back(al);
        }
        branches_live_.clear();
        for (const auto& br : case_.branches) branches_live_[br.id] = br.in_service;
        rebuild_network();
        scanner_.emplace(relay_settings_);
        schedule_events();
        initialized_ = true;
    }

    void schedule_events() {
        for (const auto& e : scenario_.events) {
            const long long k = std::llround(e.t / cfg_.dt);
            const double err = std::abs(e.t - k * cfg_.dt);
            if (err > cfg_.dt / 2.0 - 1e-12 && err > 1e-12)
                log_warn("scenario event at t=" + std::to_string(e.t) +
                         " rounded by more than dt/2");
            step_events_[k].push_back(e);
        }
        for (const auto& [t, gen_id] : cfg_.gen_connects) {
            const long long k = std::llround(t / cfg_.dt);
            step_gen_connects_[k].push_back(gen_id);
        }
    }

    void rebuild_network() {
        Case live = case_;
        for (auto& br : live.branches) br.in_service = branches_live_[br.id];
        ydyn_ = Eigen::MatrixXcd(build_ybus(live));
        for (std::size_t k = 0; k < models_.size(); ++k)
            if (online_[k]) ydyn_(models_[k].bus_idx, models_[k].bus_idx) += models_[k].y_norton;
        for (const auto& l : loads_)
            if (l.live && l.model == LoadModel::ConstantImpedance)
                ydyn_(l.bus_idx, l.bus_idx) += std::conj(l.s_now);
    }

    /// Residual and Jacobian of the network equations at v, with the
    /// machine Norton sources fixed.
    void network_residual(const std::vector<Complex>& i_src, const std::vector<Complex>& v,
                          Eigen::VectorXd& f, Eigen::MatrixXd* jac) const {
        const int n = static_cast<int>(case_.buses.size());
        constexpr double v_freeze = 0.4;
        f.setZero(2 * n);
        if (jac != nullptr) jac->setZero();
        for (int i = 0; i < n; ++i) {
            Complex acc = -i_src[i];
            for (int j = 0; j < n; ++j) {
                const Complex yij = ydyn_(i, j);
                if (yij == Complex(0, 0)) continue;
                acc += yij * v[j];
                if (jac != nullptr) {
                    (*jac)(2 * i, 2 * j) += yij.real();
                    (*jac)(2 * i, 2 * j + 1) += -yij.imag();
                    (*jac)(2 * i + 1, 2 * j) += yij.imag();
                    (*jac)(2 * i + 1, 2 * j + 1) += yij.real();
                }
            }
            f(2 * i) = acc.real();
            f(2 * i + 1) = acc.imag();
        }
        // Constant-power loads (frozen to impedance at low voltage).
        for (const auto& l : loads_) {
            if (!l.live || l.model != LoadModel::ConstantPower) continue;
            const int i = l.bus_idx;
            const Complex vi = v[i];
            if (std::abs(vi) >= v_freeze) {
                const Complex cv = std::conj(vi);
                const Complex w = std::conj(l.s_now) / cv;
                f(2 * i) += w.real();
                f(2 * i + 1) += w.imag();
                if (jac != nullptr) {
                    // F += conj(S)/conj(V); holomorphic in conj(V).
                    const Complex dw_da = -std::conj(l.s_now) / (cv * cv);
                    const Complex dw_db = Complex(0, 1) * std::conj(l.s_now) / (cv * cv);
                    (*jac)(2 * i, 2 * i) += dw_da.real();
                    (*jac)(2 * i, 2 * i + 1) += dw_db.real();
                    (*jac)(2 * i + 1, 2 * i) += dw_da.imag();
                    (*jac)(2 * i + 1, 2 * i + 1) += dw_db.imag();
                }
            } else {
                const Complex yf = std::conj(l.s_now) / (v_freeze * v_freeze);
                const Complex w = yf * vi;
                f(2 * i) += w.real();
                f(2 * i + 1) += w.imag();
                if (jac != nullptr) {
                    (*jac)(2 * i, 2 * i) += yf.real();
                    (*jac)(2 * i, 2 * i + 1) += -yf.imag();
                    (*jac)(2 * i + 1, 2 * i) += yf.imag();
                    (*jac)(2 * i + 1, 2 * i + 1) += yf.real();
                }
            }
        }
    }

    /// Inner damped Newton on the network equations with machine EMFs
    /// frozen. Steps are halved while they would grow the residual, and
    /// a failed warm start is retried from a flat profile before the
    /// solve is declared lost.
    bool solve_network(const std::vector<MachineState>& sts, std::vector<Complex>& v) {
        const int n = static_cast<int>(case_.buses.size());
        std::vector<Complex> i_src(n, Complex(0, 0));
        for (std::size_t k = 0; k < models_.size(); ++k)
            if (online_[k])
                i_src[models_[k].bus_idx] +=
                    dyndetail::internal_emf(models_[k], sts[k]) * models_[k].y_norton;

        auto attempt = [&](std::vector<Complex>& vv) {
            constexpr int max_iter = 40;
            Eigen::VectorXd f;
            Eigen::MatrixXd jac(2 * n, 2 * n);
            network_residual(i_src, vv, f, &jac);
            if (!f.allFinite()) return false;
            double fnorm = f.cwiseAbs().maxCoeff();
            for (int iter = 0; iter < max_iter; ++iter) {
                if (fnorm < 1e-10) return true;
                Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
                Eigen::VectorXd dx = lu.solve(-f);
                if (!dx.allFinite()) return false;
                double alpha = 1.0;
                std::vector<Complex> vnew(n);
                double fnew_norm = 0.0;
                Eigen::VectorXd fnew;
                bool improved = false;
                for (int halve = 0; halve < 8; ++halve) {
                    for (int i = 0; i < n; ++i)
                        vnew[i] = vv[i] + alpha * Complex(dx(2 * i), dx(2 * i + 1));
                    network_residual(i_src, vnew, fnew, nullptr);
                    fnew_norm = fnew.allFinite() ? fnew.cwiseAbs().maxCoeff() : 1e300;
                    if (fnew_norm < fnorm) {
                        improved = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if (!improved) return false;
                vv = vnew;
                network_residual(i_src, vv, f, &jac);
                fnorm = f.cwiseAbs().maxCoeff();
            }
            return false;
        };

        std::vector<Complex> trial = v;
        if (attempt(trial)) {
            v = trial;
            return true;
        }
        // Retry from a flat profile: a warm start can sit on the wrong
        // side of a sharp event discontinuity.
        std::vector<Complex> flat(n, Complex(1.0, 0.0));
        for (std::size_t k = 0; k < models_.size(); ++k)
            if (online_[k]) flat[models_[k].bus_idx] = v[models_[k].bus_idx];
        if (attempt(flat)) {
            v = flat;
            return true;
        }
        return false;
    }

    bool eval_derivs(const std::vector<MachineState>& sts, std::vector<Complex>& v,
                     std::vector<dyndetail::MachineDeriv>& out) {
        if (!solve_network(sts, v)) return false;
        out.resize(models_.size());
        for (std::size_t k = 0; k < models_.size(); ++k) {
            if (!online_[k]) {
                out[k] = dyndetail::MachineDeriv{};
                continue;
            }
            out[k] = dyndetail::machine_rhs(models_[k], sts[k], v[models_[k].bus_idx],
                                            omega_s_);
        }
        return true;
    }

    bool step(double /*t*/) {
        const double dt = cfg_.dt;
        const std::size_t nm = models_.size();
        for (std::size_t k = 0; k < nm; ++k)
            if (online_[k]) states_[k].pm = dyndetail::mech_power(models_[k], states_[k]);

        std::vector<dyndetail::MachineDeriv> k1, k2, k3, k4;
        std::vector<MachineState> tmp(nm);
        std::vector<Complex> v = v_now_;

        if (!eval_derivs(states_, v, k1)) return false;
        for (std::size_t k = 0; k < nm; ++k) dyndetail::axpy(tmp[k], states_[k], k1[k], dt / 2);
        refresh_pm(tmp);
        if (!eval_derivs(tmp, v, k2)) return false;
        for (std::size_t k = 0; k < nm; ++k) dyndetail::axpy(tmp[k], states_[k], k2[k], dt / 2);
        refresh_pm(tmp);
        if (!eval_derivs(tmp, v, k3)) return false;
        for (std::size_t k = 0; k < nm; ++k) dyndetail::axpy(tmp[k], states_[k], k3[k], dt);
        refresh_pm(tmp);
        if (!eval_derivs(tmp, v, k4)) return false;

        for (std::size_t k = 0; k < nm; ++k) {
            if (!online_[k]) continue;
            auto& s = states_[k];
            auto comb = [&](double a, double b, double c2, double d2) {
                return (a + 2 * b + 2 * c2 + d2) / 6.0;
            };
            s.delta += dt * comb(k1[k].delta, k2[k].delta, k3[k].delta, k4[k].delta);
            s.omega += dt * comb(k1[k].omega, k2[k].omega, k3[k].omega, k4[k].omega);
            s.eqp += dt * comb(k1[k].eqp, k2[k].eqp, k3[k].eqp, k4[k].eqp);
            s.psi1d += dt * comb(k1[k].psi1d, k2[k].psi1d, k3[k].psi1d, k4[k].psi1d);
            s.psi2q += dt * comb(k1[k].psi2q, k2[k].psi2q, k3[k].psi2q, k4[k].psi2q);
            s.efd += dt * comb(k1[k].efd, k2[k].efd, k3[k].efd, k4[k].efd);
            s.vr += dt * comb(k1[k].vr, k2[k].vr, k3[k].vr, k4[k].vr);
            s.vr = std::clamp(s.vr, models_[k].vrmin, models_[k].vrmax);
            s.rf += dt * comb(k1[k].rf, k2[k].rf, k3[k].rf, k4[k].rf);
            for (int i = 0; i < 3; ++i)
                s.gov_x[i] +=
                    dt * comb(k1[k].gov_x[i], k2[k].gov_x[i], k3[k].gov_x[i], k4[k].gov_x[i]);
            s.pm = dyndetail::mech_power(models_[k], s);
        }
        // Settle the network at the end-of-step states for sampling.
        if (!solve_network(states_, v)) return false;
        v_now_ = v;
        return true;
    }

    void refresh_pm(std::vector<MachineState>& sts) {
        for (std::size_t k = 0; k < sts.size(); ++k)
            if (online_[k]) sts[k].pm = dyndetail::mech_power(models_[k], sts[k]);
    }

    void apply_events_at_step(long long k) {
        auto it = step_events_.find(k);
        if (it != step_events_.end()) {
            for (const auto& e : it->second) apply_event(e, k * cfg_.dt);
        }
        auto gt = step_gen_connects_.find(k);
        if (gt != step_gen_connects_.end()) {
            for (int gen_id : gt->second) connect_generator(gen_id, k * cfg_.dt);
        }
    }

    void apply_event(const AttackEvent& e, double t) {
        switch (e.action) {
            case AttackAction::Connect: {
                dyndetail::ActiveLoad al;
                const int bi = case_.bus_index(e.bus);
                if (bi < 0)
                    throw ValidationError({"scenario references unknown bus " +
                                           std::to_string(e.bus)});
                al.bus_idx = bi;
                al.s_base = Complex(e.p_mw, e.q_mvar) / case_.base_mva;
                al.s_now = al.s_base;
                al.model = LoadModel::ConstantPower;
                al.tag = e.tag;
                loads_.push_back(al);
                log_.push_back({t, "load " + e.tag, "connect",
                                std::to_string(e.p_mw) + " MW " + std::to_string(e.q_mvar) +
                                    " MVAR at bus " + std::to_string(e.bus)});
                break;
            }
            case AttackAction::Disconnect: {
                bool found = false;
                for (auto& l : loads_) {
                    if (l.tag == e.tag && l.live) {
                        l.live = false;
                        found = true;
                    }
                }
                if (!found)
                    throw ValidationError({"disconnect of unknown tag '" + e.tag + "'"});
                log_.push_back({t, "load " + e.tag, "disconnect", ""});
                break;
            }
            case AttackAction::ScaleExistingLoad: {
                bool found = false;
                for (auto& l : loads_) {
                    if (!l.live) continue;
                    const bool match = !e.tag.empty()
                                           ? l.tag == e.tag
                                           : l.bus_idx == case_.bus_index(e.bus);
                    if (match) {
                        l.s_now = l.s_base * e.scale;  // relative to base value
                        found = true;
                    }
                }
                if (!found)
                    throw ValidationError({"scale event matched no active load at bus " +
                                           std::to_string(e.bus)});
                log_.push_back({t, "load bus " + std::to_string(e.bus), "scale",
                                "factor " + std::to_string(e.scale)});
                break;
            }
        }
        rebuild_network();
    }

    /// Closes an out-of-service generator onto the grid at its p_set,
    /// initialized against the present bus voltage.
    void connect_generator(int gen_id, double t) {
        for (std::size_t gi = 0; gi < case_.generators.size(); ++gi) {
            const auto& g = case_.generators[gi];
            if (g.id != gen_id) continue;
            auto m = dyndetail::make_machine(case_, g);
            const Complex v = v_now_[m.bus_idx];
            PFSolution fake;
            fake.v_mag.assign(case_.buses.size(), 0.0);
            fake.v_ang.assign(case_.buses.size(), 0.0);
            fake.gen_p.assign(case_.generators.size(), 0.0);
            fake.gen_q.assign(case_.generators.size(), 0.0);
            fake.v_mag[m.bus_idx] = std::abs(v);
            fake.v_ang[m.bus_idx] = std::arg(v);
            fake.gen_p[gi] = g.p_set;
            fake.gen_q[gi] = 0.0;
            auto st = init_machine_state(case_, fake, {m}, {static_cast<int>(gi)});
            dyndetail::fix_references(m, st[0], std::abs(v));
            models_.push_back(m);
            gen_rows_.push_back(static_cast<int>(gi));
            states_.push_back(st[0]);
            online_.push_back(true);
            // Backfill the new machine's channels for earlier samples.
            auto& rec = sample_gen_[gen_id];
            const std::size_t have = sample_t_.size();
            rec.delta.assign(have, 0.0);
            rec.omega_hz.assign(have, case_.f_nominal);
            rec.p.assign(have, 0.0);
            rec.q.assign(have, 0.0);
            rec.pm.assign(have, 0.0);
            rec.efd.assign(have, 0.0);
            log_.push_back({t, "gen " + std::to_string(gen_id), "connect",
                            std::to_string(g.p_set) + " MW"});
            rebuild_network();
            return;
        }
        throw ValidationError({"gen connect event references unknown generator " +
                               std::to_string(gen_id)});
    }

    void scan_relays(double t) {
        std::map<int, double> machine_freq;
        for (std::size_t k = 0; k < models_.size(); ++k)
            if (online_[k])
                machine_freq[models_[k].gen_id] = case_.f_nominal * states_[k].omega;
        std::map<int, std::pair<double, double>> branch_mva;
        if (relay_settings_.line_overload_enabled) {
            for (const auto& br : case_.branches) {
                if (!branches_live_[br.id] || br.mva_limit <= 0.0) continue;
                const int f = case_.bus_index(br.from_bus);
                const int to = case_.bus_index(br.to_bus);
                const auto st = branch_stamp(br);
                const Complex sf =
                    v_now_[f] * std::conj(st.yff * v_now_[f] + st.yft * v_now_[to]);
                const Complex stc =
                    v_now_[to] * std::conj(st.ytf * v_now_[f] + st.ytt * v_now_[to]);
                const double mva =
                    std::max(std::abs(sf), std::abs(stc)) * case_.base_mva;
                branch_mva[br.id] = {mva, br.mva_limit};
            }
        }
        auto trips = scanner_->scan(t, cfg_.dt, machine_freq, branch_mva);
        bool topology_changed = false;
        for (const auto& trip : trips) {
            if (trip.kind == ElementKind::Generator) {
                for (std::size_t k = 0; k < models_.size(); ++k) {
                    if (models_[k].gen_id == trip.element_id && online_[k]) {
                        online_[k] = false;  // state frozen at trip
                        topology_changed = true;
                        log_.push_back({t, "gen " + std::to_string(trip.element_id), "trip",
                                        trip_reason_name(trip.reason) + " at " +
                                            std::to_string(trip.measured)});
                    }
                }
            } else if (trip.kind == ElementKind::Branch) {
                branches_live_[trip.element_id] = false;
                topology_changed = true;
                log_.push_back({t, "branch " + std::to_string(trip.element_id), "trip",
                                trip_reason_name(trip.reason) + " at " +
                                    std::to_string(trip.measured)});
            }
        }
        if (topology_changed) rebuild_network();
    }

    void detect_instability(double t) {
        if (series_.unstable) return;
        double max_sep = 0.0;
        for (std::size_t a = 0; a < models_.size(); ++a) {
            if (!online_[a]) continue;
            for (std::size_t b = a + 1; b < models_.size(); ++b) {
                if (!online_[b]) continue;
                max_sep = std::max(max_sep, std::abs(states_[a].delta - states_[b].delta));
            }
        }
        if (max_sep > kPi) {
            sep_timer_ += cfg_.dt;
            if (sep_timer_ >= 0.5) {
                series_.unstable = true;
                series_.instability_time = t;
                log_.push_back({t, "system", "flag", "LossOfSynchronism"});
                log_info("dynamics: sustained rotor separation > 180 deg at t=" +
                         std::to_string(t));
            }
        } else {
            sep_timer_ = 0.0;
        }
    }

    void sample(double t) {
        sample_t_.push_back(t);
        const int n = static_cast<int>(case_.buses.size());
        for (int i = 0; i < n; ++i) {
            sample_vmag_[i].push_back(std::abs(v_now_[i]));
            sample_vang_[i].push_back(std::arg(v_now_[i]));
        }
        for (std::size_t k = 0; k < models_.size(); ++k) {
            const auto& m = models_[k];
            auto& rec = sample_gen_[m.gen_id];
            const Complex v = v_now_[m.bus_idx];
            Complex i_out(0, 0);
            if (online_[k])
                i_out = (dyndetail::internal_emf(m, states_[k]) - v) * m.y_norton;
            const Complex s_term = v * std::conj(i_out) * case_.base_mva;
            rec.delta.push_back(states_[k].delta);
            rec.omega_hz.push_back(online_[k] ? case_.f_nominal * states_[k].omega
                                              : case_.f_nominal);
            rec.p.push_back(online_[k] ? s_term.real() : 0.0);
            rec.q.push_back(online_[k] ? s_term.imag() : 0.0);
            rec.pm.push_back(online_[k] ? states_[k].pm * case_.base_mva : 0.0);
            rec.efd.push_back(states_[k].efd);
        }
    }

    void finalize_series() {
        series_.t = sample_t_;
        const int n = static_cast<int>(case_.buses.size());
        series_.bus_ids.clear();
        for (const auto& b : case_.buses) series_.bus_ids.push_back(b.id);
        series_.bus_v.resize(n);
        for (int i = 0; i < n; ++i) series_.bus_v[i] = sample_vmag_[i];
        // Bus frequency from the sampled angles.
        std::vector<std::vector<double>> angles(n);
        for (int i = 0; i < n; ++i) angles[i] = sample_vang_[i];
        series_.bus_f = bus_frequency_channels(angles, cfg_.dt * cfg_.output_every,
                                               case_.f_nominal);
        for (auto& [gen_id, rec] : sample_gen_) {
            series_.gen_ids.push_back(gen_id);
            series_.gen_delta.push_back(rec.delta);
            series_.gen_omega_hz.push_back(rec.omega_hz);
            series_.gen_p.push_back(rec.p);
            series_.gen_q.push_back(rec.q);
            series_.gen_pm.push_back(rec.pm);
            series_.gen_efd.push_back(rec.efd);
        }
    }

  public:
    /// Washout-filtered angle derivative: f = f_nominal + dtheta/dt /
    /// (2 pi) through s/(1 + s Tf), Tustin-discretized at the sample
    /// step. Angles are unwrapped first.
    static std::vector<std::vector<double>> bus_frequency_channels(
        const std::vector<std::vector<double>>& v_ang, double dt_sample, double f_nominal,
        double tf = 0.05) {
        std::vector<std::vector<double>> out(v_ang.size());
        for (std::size_t b = 0; b < v_ang.size(); ++b) {
            const auto& raw = v_ang[b];
            std::vector<double> th(raw.size());
            double offset = 0.0;
            for (std::size_t k = 0; k < raw.size(); ++k) {
                if (k > 0) {
                    double d = raw[k] - raw[k - 1];
                    if (d > kPi) offset -= 2.0 * kPi;
                    if (d < -kPi) offset += 2.0 * kPi;
                }
                th[k] = raw[k] + offset;
            }
            std::vector<double> f(th.size(), f_nominal);
            double y = 0.0;
            for (std::size_t k = 1; k < th.size(); ++k) {
                y = ((2.0 * tf - dt_sample) * y + 2.0 * (th[k] - th[k - 1])) /
                    (2.0 * tf + dt_sample);
                f[k] = f_nominal + y / (2.0 * kPi);
            }
            out[b] = f;
        }
        return out;
    }

  private:
    struct GenRecord {
        std::vector<double> delta, omega_hz, p, q, pm, efd;
    };

    Case case_;
    SimConfig cfg_;
    Scenario scenario_;
    RelaySettings relay_settings_;
    double omega_s_ = 2.0 * kPi * 60.0;

    PFSolution pf_;
    std::vector<dyndetail::MachineModel> models_;
    std::vector<int> gen_rows_;
    std::vector<MachineState> states_;
    std::vector<bool> online_;
    std::vector<dyndetail::ActiveLoad> loads_;
    std::map<int, bool> branches_live_;
    Eigen::MatrixXcd ydyn_;
    std::vector<Complex> v_now_;
    std::optional<RelayScanner> scanner_;
    std::map<long long, std::vector<AttackEvent>> step_events_;
    std::map<long long, std::vector<int>> step_gen_connects_;
    double sep_timer_ = 0.0;
    bool initialized_ = false;

    TimeSeries series_;
    EventLog log_;
    std::vector<double> sample_t_;
    std::map<int, std::vector<double>> sample_vmag_;
    std::map<int, std::vector<double>> sample_vang_;
    std::map<int, GenRecord> sample_gen_;
};

/// Initializes machines at a converged power flow; the returned states
/// are an exact fixed point (references are re-derived inside any
/// simulation built from the same case).
inline std::vector<MachineState> init_equilibrium(const Case& c, const PFSolution& pf) {
    if (!pf.converged) throw InitInfeasible("power flow not converged");
    std::vector<dyndetail::MachineModel> models;
    std::vector<int> rows;
    for (std::size_t gi = 0; gi < c.generators.size(); ++gi) {
        const auto& g = c.generators[gi];
        if (!g.in_service) continue;
        models.push_back(dyndetail::make_machine(c, g));
        rows.push_back(static_cast<int>(gi));
    }
    auto states = init_machine_state(c, pf, models, rows);
    for (std::size_t k = 0; k < models.size(); ++k)
        dyndetail::fix_references(models[k], states[k], pf.v_mag[models[k].bus_idx]);
    return states;
}

/// Convenience wrapper over the Simulator.
inline std::pair<TimeSeries, EventLog> run_simulation(const Case& c, const Scenario& scenario,
                                                      const SimConfig& cfg) {
    Simulator sim(c, scenario, cfg);
    return sim.run();
}

/// Washout-filtered bus frequency for a single angle channel.
inline std::vector<double> bus_frequency(const std::vector<double>& v_ang, double dt_sample,
                                         double f_nominal, double tf = 0.05) {
    return Simulator::bus_frequency_channels({v_ang}, dt_sample, f_nominal, tf)[0];
}

}  // namespace gridshock
