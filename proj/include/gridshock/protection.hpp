#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridshock/timeseries.hpp"

namespace gridshock {

/// Relay thresholds and pickup delays. The generator frequency band
/// defaults to +/-4% of 60 Hz; voltage relays are monitors, not trips.
struct RelaySettings {
    double gen_over_freq = 62.4;   // Hz
    double gen_under_freq = 57.6;  // Hz
    double freq_pickup_delay = 0.1;   // s
    double v_high = 1.05;  // pu
    double v_low = 0.95;   // pu
    double line_overload_factor = 1.0;  // ratio of mva_limit
    double line_pickup_delay = 0.5;     // s
    bool gen_freq_enabled = true;
    bool line_overload_enabled = false;  // cascade module covers quasi-static trips
};

inline std::vector<std::string> validate_relay_settings(const RelaySettings& s,
                                                        double f_nominal) {
    std::vector<std::string> out;
    if (!(s.gen_under_freq < f_nominal && f_nominal < s.gen_over_freq))
        out.push_back("relay_settings: requires gen_under_freq < f_nominal < gen_over_freq");
    if (!(s.v_low < 1.0 && 1.0 < s.v_high))
        out.push_back("relay_settings: requires v_low < 1.0 < v_high");
    if (s.freq_pickup_delay < 0.0 || s.line_pickup_delay < 0.0)
        out.push_back("relay_settings: pickup delays must be >= 0");
    if (!(s.line_overload_factor > 0.0))
        out.push_back("relay_settings: line_overload_factor must be > 0");
    return out;
}

enum class TripReason { OverFreq, UnderFreq, LineOverload };

inline std::string trip_reason_name(TripReason r) {
    switch (r) {
        case TripReason::OverFreq: return "OverFreq";
        case TripReason::UnderFreq: return "UnderFreq";
        default: return "LineOverload";
    }
}

enum class ElementKind { Generator, Branch, Load };

struct TripEvent {
    double t = 0.0;
    ElementKind kind = ElementKind::Generator;
    int element_id = 0;
    TripReason reason = TripReason::OverFreq;
    double measured = 0.0;  // value at trip
};

/// Per-run relay state: pickup timers and one-shot trip latches. A
/// condition must persist for its pickup delay before the trip fires;
/// each element trips at most once.
class RelayScanner {
  public:
    explicit RelayScanner(RelaySettings settings) : settings_(settings) {}

    const RelaySettings& settings() const { return settings_; }

    /// One integration step. Machine frequencies in Hz keyed by
    /// generator id, branch apparent flows in MVA keyed by branch id
    /// (paired with their limits). Returns the trips firing this step.
    std::vector<TripEvent> scan(double t, double dt,
                                const std::map<int, double>& machine_freq_hz,
                                const std::map<int, std::pair<double, double>>& branch_mva_limit) {
        std::vector<TripEvent> trips;
        if (settings_.gen_freq_enabled) {
            for (const auto& [gen_id, f] : machine_freq_hz) {
                if (tripped_gens_.count(gen_id)) continue;
                const bool over = f > settings_.gen_over_freq;
                const bool under = f < settings_.gen_under_freq;
                double& timer = gen_timer_[gen_id];
                if (over || under) {
                    timer += dt;
                    if (timer >= settings_.freq_pickup_delay) {
                        tripped_gens_.insert(gen_id);
                        trips.push_back({t, ElementKind::Generator, gen_id,
                                         over ? TripReason::OverFreq : TripReason::UnderFreq,
                                         f});
                    }
                } else {
                    timer = 0.0;
                }
            }
        }
        if (settings_.line_overload_enabled) {
            for (const auto& [branch_id, mva_limit] : branch_mva_limit) {
                const auto [mva, limit] = mva_limit;
                if (limit <= 0.0 || tripped_branches_.count(branch_id)) continue;
                double& timer = line_timer_[branch_id];
                if (mva > settings_.line_overload_factor * limit) {
                    timer += dt;
                    if (timer >= settings_.line_pickup_delay) {
                        tripped_branches_.insert(branch_id);
                        trips.push_back({t, ElementKind::Branch, branch_id,
                                         TripReason::LineOverload, mva});
                    }
                } else {
                    timer = 0.0;
                }
            }
        }
        return trips;
    }

  private:
    RelaySettings settings_;
    std::map<int, double> gen_timer_;
    std::map<int, double> line_timer_;
    std::set<int> tripped_gens_;
    std::set<int> tripped_branches_;
};

struct VoltageViolation {
    int bus = 0;
    double first_violation_time = 0.0;
    double extreme_v = 0.0;   // worst sample, pu
    bool settled = false;     // still violating in the final 10% of the run
    bool high = false;        // true above v_high, false below v_low
};

/// Scans a completed trajectory for voltage-band violations,
/// distinguishing transient-only excursions from ones persisting in
/// the final 10% of the run.
inline std::vector<VoltageViolation> voltage_violations(const TimeSeries& series,
                                                        const RelaySettings& settings) {
    std::vector<VoltageViolation> report;
    if (series.t.empty()) return report;
    const double t_tail = series.t.front() + 0.9 * (series.t.back() - series.t.front());
    for (std::size_t b = 0; b < series.bus_ids.size(); ++b) {
        std::optional<VoltageViolation> high, low;
        bool high_in_tail = false, low_in_tail = false;
        std::size_t tail_count = 0, high_tail_hits = 0, low_tail_hits = 0;
        for (std::size_t k = 0; k < series.t.size(); ++k) {
            const double v = series.bus_v[b][k];
            const bool in_tail = series.t[k] >= t_tail;
            if (in_tail) ++tail_count;
            if (v > settings.v_high) {
                if (!high) high = VoltageViolation{series.bus_ids[b], series.t[k], v, false, true};
                high->extreme_v = std::max(high->extreme_v, v);
                if (in_tail) ++high_tail_hits;
            } else if (v < settings.v_low) {
                if (!low) low = VoltageViolation{series.bus_ids[b], series.t[k], v, false, false};
                low->extreme_v = std::min(low->extreme_v, v);
                if (in_tail) ++low_tail_hits;
            }
        }
        // Settled means the violation holds for the whole final window.
        high_in_tail = tail_count > 0 && high_tail_hits == tail_count;
        low_in_tail = tail_count > 0 && low_tail_hits == tail_count;
        if (high) {
            high->settled = high_in_tail;
            report.push_back(*high);
        }
        if (low) {
            low->settled = low_in_tail;
            report.push_back(*low);
        }
    }
    return report;
}

}  // namespace gridshock
