#pragma once

#include <string>
#include <vector>

#include "gridshock/caseio.hpp"
#include "gridshock/netmodel.hpp"

namespace gridshock {

namespace builtin {

inline GeneratorDynamics wscc_dynamics(double h, double xd, double xq, double xdp,
                                       double xdpp, double xl, double td0p, double pmax) {
    GeneratorDynamics dyn;
    dyn.machine.h = h;
    dyn.machine.d = 1.0;
    dyn.machine.xd = xd;
    dyn.machine.xq = xq;
    dyn.machine.xdp = xdp;
    dyn.machine.xdpp = xdpp;
    dyn.machine.xl = xl;
    dyn.machine.td0p = td0p;
    dyn.machine.td0pp = 0.04;
    dyn.machine.tq0pp = 0.06;
    dyn.machine.s10 = 0.05;
    dyn.machine.s12 = 0.2;
    dyn.machine.ra = 0.0;

    dyn.exciter.ka = 8.0;
    dyn.exciter.ta = 0.2;
    dyn.exciter.ke = 1.0;
    dyn.exciter.te = 0.314;
    dyn.exciter.kf = 0.063;
    dyn.exciter.tf = 0.35;
    dyn.exciter.vrmax = 5.0;
    dyn.exciter.vrmin = 0.0;
    dyn.exciter.e1 = 3.0;
    dyn.exciter.se1 = 0.33;
    dyn.exciter.e2 = 4.0;
    dyn.exciter.se2 = 1.0;

    // Temporary-droop compensation: transient gain ~K*t2/t1, DC gain K.
    dyn.governor.k = 20.0;
    dyn.governor.t1 = 12.0;
    dyn.governor.t2 = 2.0;
    dyn.governor.t3 = 0.3;
    dyn.governor.t4 = 0.8;
    dyn.governor.pmax = pmax;
    dyn.governor.pmin = 0.0;
    return dyn;
}

/// WSCC 9-bus test system, standard published static data on a 100 MVA
/// base. Dynamic parameters are conventional WSCC-style values.
inline Case wscc9() {
    Case c;
    c.name = "wscc9";
    c.base_mva = 100.0;
    c.f_nominal = 60.0;

    c.buses = {
        {1, BusKind::Slack, 16.5, 1.040, 0.0, 0.0, 1},
        {2, BusKind::PV, 18.0, 1.030, 0.0, 0.0, 1},
        {3, BusKind::PV, 13.8, 1.030, 0.0, 0.0, 1},
        {4, BusKind::PQ, 230.0, 1.0, 0.0, 0.0, 1},
        {5, BusKind::PQ, 230.0, 1.0, 0.0, 0.0, 1},
        {6, BusKind::PQ, 230.0, 1.0, 0.0, 0.0, 1},
        {7, BusKind::PQ, 230.0, 1.0, 0.0, 0.0, 1},
        {8, BusKind::PQ, 230.0, 1.0, 0.0, 0.0, 1},
        {9, BusKind::PQ, 230.0, 1.0, 0.0, 0.0, 1},
    };
    c.branches = {
        {1, 1, 4, 0.0, 0.0576, 0.0, 1.0, 300.0, true},
        {2, 4, 5, 0.010, 0.085, 0.176, 1.0, 250.0, true},
        {3, 5, 7, 0.032, 0.161, 0.306, 1.0, 250.0, true},
        {4, 2, 7, 0.0, 0.0625, 0.0, 1.0, 300.0, true},
        {5, 7, 8, 0.0085, 0.072, 0.149, 1.0, 250.0, true},
        {6, 8, 9, 0.0119, 0.1008, 0.209, 1.0, 250.0, true},
        {7, 3, 9, 0.0, 0.0586, 0.0, 1.0, 300.0, true},
        {8, 6, 9, 0.039, 0.170, 0.358, 1.0, 250.0, true},
        {9, 4, 6, 0.017, 0.092, 0.158, 1.0, 250.0, true},
    };
    c.generators = {
        {1, 1, 71.6, -300.0, 300.0, 1.040, 100.0, 1.0,
         wscc_dynamics(23.64, 0.146, 0.0969, 0.0608, 0.045, 0.0336, 8.96, 2.5), true},
        {2, 2, 163.0, -300.0, 300.0, 1.030, 100.0, 1.0,
         wscc_dynamics(6.40, 0.8958, 0.8645, 0.1198, 0.090, 0.0521, 6.00, 2.2), true},
        {3, 3, 85.0, -300.0, 300.0, 1.030, 100.0, 1.0,
         wscc_dynamics(3.01, 1.3125, 1.2578, 0.1813, 0.130, 0.0742, 5.89, 1.5), true},
    };
    c.loads = {
        {1, 5, 125.0, 50.0, LoadModel::ConstantPower, true, "load_b5"},
        {2, 6, 90.0, 30.0, LoadModel::ConstantPower, true, "load_b6"},
        {3, 8, 100.0, 35.0, LoadModel::ConstantPower, true, "load_b8"},
    };
    return c;
}

inline GeneratorDynamics hydro_dynamics(double h, double pmax, double vrmax,
                                        double ka = 20.0, double ta = 0.2,
                                        double kf = 0.063, double d = 1.0) {
    GeneratorDynamics dyn;
    dyn.machine.h = h;
    dyn.machine.d = d;
    dyn.machine.xd = 1.10;
    dyn.machine.xq = 0.70;
    dyn.machine.xdp = 0.320;
    dyn.machine.xdpp = 0.180;
    dyn.machine.xl = 0.120;
    dyn.machine.td0p = 6.5;
    dyn.machine.td0pp = 0.05;
    dyn.machine.tq0pp = 0.08;
    dyn.machine.s10 = 0.05;
    dyn.machine.s12 = 0.2;
    dyn.machine.ra = 0.0;

    dyn.exciter.ka = ka;
    dyn.exciter.ta = ta;
    dyn.exciter.ke = 1.0;
    dyn.exciter.te = 0.314;
    dyn.exciter.kf = kf;
    dyn.exciter.tf = 0.35;
    dyn.exciter.vrmax = vrmax;
    dyn.exciter.vrmin = 0.0;
    dyn.exciter.e1 = 3.0;
    dyn.exciter.se1 = 0.33;
    dyn.exciter.e2 = 4.0;
    dyn.exciter.se2 = 1.0;

    dyn.governor.k = 12.0;
    dyn.governor.t1 = 12.0;
    dyn.governor.t2 = 1.6;
    dyn.governor.t3 = 0.3;
    dyn.governor.t4 = 1.6;
    dyn.governor.pmax = pmax;
    dyn.governor.pmin = 0.0;
    return dyn;
}

/// Seven-bus, three-area system in the style of the Glover textbook
/// case. Line constants and limits are calibrated so the bundled
/// overload cascade study reproduces its published trip order; they
/// are not vendor data.
inline Case glover7() {
    Case c;
    c.name = "glover7";
    c.base_mva = 100.0;
    c.f_nominal = 60.0;

    c.buses = {
        {1, BusKind::PV, 138.0, 1.050, 0.0, 0.0, 1},
        {2, BusKind::PQ, 138.0, 1.0, 0.0, 0.20, 1},
        {3, BusKind::PQ, 138.0, 1.0, 0.0, 0.55, 1},
        {4, BusKind::PQ, 138.0, 1.0, 0.0, 0.65, 1},
        {5, BusKind::PQ, 138.0, 1.0, 0.0, 0.30, 1},
        {6, BusKind::PV, 138.0, 1.040, 0.0, 0.0, 2},
        {7, BusKind::Slack, 138.0, 1.040, 0.0, 0.0, 3},
    };
    c.branches = {
        {1, 1, 2, 0.006, 0.040, 0.060, 1.0, 520.0, true},
        {2, 1, 3, 0.010, 0.065, 0.080, 1.0, 182.0, true},
        {3, 2, 3, 0.012, 0.090, 0.100, 1.0, 140.0, true},
        {4, 2, 4, 0.008, 0.060, 0.080, 1.0, 170.0, true},
        {5, 2, 5, 0.012, 0.090, 0.100, 1.0, 140.0, true},
        {6, 3, 4, 0.007, 0.045, 0.060, 1.0, 125.0, true},
        {7, 4, 5, 0.008, 0.055, 0.080, 1.0, 260.0, true},
        {8, 5, 6, 0.020, 0.220, 0.100, 1.0, 300.0, true},
        {9, 5, 7, 0.020, 0.220, 0.100, 1.0, 300.0, true},
        {10, 6, 7, 0.015, 0.100, 0.100, 1.0, 300.0, true},
    };
    c.generators = {
        {1, 1, 360.0, -100.0, 250.0, 1.050, 400.0, 1.0, hydro_dynamics(4.0, 1.15, 3.5), true},
        {2, 6, 150.0, -100.0, 200.0, 1.040, 250.0, 1.0, hydro_dynamics(3.5, 1.1, 5.0), true},
        {3, 7, 180.0, -150.0, 300.0, 1.040, 450.0, 1.5, hydro_dynamics(3.5, 1.1, 5.0), true},
    };
    c.loads = {
        {1, 2, 40.0, 15.0, LoadModel::ConstantPower, true, "load_b2"},
        {2, 3, 160.0, 55.0, LoadModel::ConstantPower, true, "load_b3"},
        {3, 4, 190.0, 65.0, LoadModel::ConstantPower, true, "load_b4"},
        {4, 5, 170.0, 60.0, LoadModel::ConstantPower, true, "load_b5"},
        {5, 6, 100.0, 35.0, LoadModel::ConstantPower, true, "load_b6"},
        {6, 7, 100.0, 35.0, LoadModel::ConstantPower, true, "load_b7"},
    };
    return c;
}

/// The comparison-study variant: 800 MW of load, raised line limits,
/// re-derived line constants for the post-upgrade network, and a
/// cost-ordered dispatch. The import-fed pocket at buses 2-3 carries
/// stiff industrial demand; the heavy outer loads behave as impedance.
inline Case glover7mod() {
    Case c;
    c.name = "glover7mod";
    c.base_mva = 100.0;
    c.f_nominal = 60.0;

    c.buses = {
        {1, BusKind::PV, 138.0, 1.050, 0.0, 0.0, 1},
        {2, BusKind::PQ, 138.0, 1.0, 0.0, 0.02, 1},
        {3, BusKind::PQ, 138.0, 1.0, 0.0, 0.37, 1},
        {4, BusKind::PQ, 138.0, 1.0, 0.0, 0.13, 1},
        {5, BusKind::PQ, 138.0, 1.0, 0.0, 0.06, 1},
        {6, BusKind::PV, 138.0, 1.040, 0.0, 0.0, 2},
        {7, BusKind::Slack, 138.0, 1.040, 0.0, 0.0, 3},
    };
    c.branches = {
        {1, 1, 2, 0.025, 0.250, 0.100, 1.0, 1300.0, true},
        {2, 1, 3, 0.010, 0.065, 0.080, 1.0, 455.0, true},
        {3, 2, 3, 0.014, 0.140, 0.100, 1.0, 350.0, true},
        {4, 2, 4, 0.080, 0.850, 0.060, 1.0, 425.0, true},
        {5, 2, 5, 0.080, 0.850, 0.060, 1.0, 350.0, true},
        {6, 3, 4, 0.075, 0.800, 0.060, 1.0, 312.0, true},
        {7, 4, 5, 0.005, 0.030, 0.060, 1.0, 650.0, true},
        {8, 5, 6, 0.015, 0.150, 0.100, 1.0, 750.0, true},
        {9, 5, 7, 0.015, 0.150, 0.100, 1.0, 750.0, true},
        {10, 6, 7, 0.008, 0.040, 0.100, 1.0, 750.0, true},
    };
    c.generators = {
        {1, 1, 160.0, -60.0, 120.0, 1.050, 180.0, 0.3,
         hydro_dynamics(4.0, 1.15, 2.3, 40.0, 0.05, 0.02, 0.3), true},
        {2, 6, 240.0, -100.0, 220.0, 1.040, 250.0, 1.0, hydro_dynamics(3.5, 1.1, 5.0), true},
        {3, 7, 410.0, -150.0, 300.0, 1.040, 450.0, 1.5, hydro_dynamics(3.5, 1.1, 5.0), true},
    };
    c.loads = {
        {1, 2, 80.0, 45.0, LoadModel::ConstantPower, true, "load_b2"},
        {2, 3, 140.0, 70.0, LoadModel::ConstantPower, true, "load_b3"},
        {3, 4, 180.0, 55.0, LoadModel::ConstantImpedance, true, "load_b4"},
        {4, 5, 160.0, 55.0, LoadModel::ConstantImpedance, true, "load_b5"},
        {5, 6, 130.0, 45.0, LoadModel::ConstantPower, true, "load_b6"},
        {6, 7, 110.0, 35.0, LoadModel::ConstantPower, true, "load_b7"},
    };
    return c;
}

}  // namespace builtin

/// Case bundled with the library, by name.
inline Case builtin_case(const std::string& name) {
    if (name == "wscc9") return builtin::wscc9();
    if (name == "glover7") return builtin::glover7();
    if (name == "glover7mod") return builtin::glover7mod();
    throw ParseError("builtin case", "unknown case '" + name +
                                         "' (available: wscc9, glover7, glover7mod)");
}

inline std::vector<std::string> builtin_case_names() {
    return {"wscc9", "glover7", "glover7mod"};
}

/// The bundled case rendered as a case-file document.
inline std::string builtin_case_text(const std::string& name) {
    return save_case(builtin_case(name));
}

/// Loads either a bundled case name or a case file path.
inline Case load_case_or_builtin(const std::string& name_or_path) {
    for (const auto& n : builtin_case_names())
        if (n == name_or_path) return load_case(builtin_case_text(n));
    return load_case_file(name_or_path);
}

}  // namespace gridshock
