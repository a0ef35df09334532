#pragma once

#include <string>
#include <vector>

#include "gridshock/common.hpp"

namespace gridshock {

/// Sampled trajectory of a dynamic run. All channels share the length
/// of t; t is strictly increasing.
struct TimeSeries {
    std::vector<double> t;  // s

    std::vector<int> bus_ids;
    std::vector<int> gen_ids;

    // Indexed [bus][sample] / [machine][sample].
    std::vector<std::vector<double>> bus_v;        // pu
    std::vector<std::vector<double>> bus_f;        // Hz
    std::vector<std::vector<double>> gen_delta;    // rad
    std::vector<std::vector<double>> gen_omega_hz; // Hz
    std::vector<std::vector<double>> gen_p;        // MW (terminal)
    std::vector<std::vector<double>> gen_q;        // MVAR (terminal)
    std::vector<std::vector<double>> gen_pm;       // MW
    std::vector<std::vector<double>> gen_efd;      // pu

    // Set when the algebraic network solve diverged and integration
    // stopped early; the trajectory holds the pre-failure samples.
    bool collapsed = false;
    double collapse_time = 0.0;

    // Set when sustained rotor separation > 180 deg was observed.
    bool unstable = false;
    double instability_time = 0.0;

    std::size_t size() const { return t.size(); }

    int bus_channel(int bus_id) const {
        for (std::size_t i = 0; i < bus_ids.size(); ++i)
            if (bus_ids[i] == bus_id) return static_cast<int>(i);
        return -1;
    }
    int gen_channel(int gen_id) const {
        for (std::size_t i = 0; i < gen_ids.size(); ++i)
            if (gen_ids[i] == gen_id) return static_cast<int>(i);
        return -1;
    }
};

struct LogEntry {
    double t = 0.0;
    std::string element;  // "gen 2", "branch 5", "load ev_b5"
    std::string action;   // "connect", "disconnect", "scale", "trip", "flag"
    std::string reason;
};

using EventLog = std::vector<LogEntry>;

}  // namespace gridshock
