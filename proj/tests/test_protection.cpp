#include <catch2/catch_amalgamated.hpp>

#include "gridshock/protection.hpp"

using namespace gridshock;
using Catch::Approx;

namespace {

TimeSeries synthetic_series(const std::vector<int>& buses,
                            const std::vector<std::vector<double>>& v, double dt = 0.1) {
    TimeSeries ts;
    ts.bus_ids = buses;
    ts.bus_v = v;
    ts.bus_f.assign(buses.size(), std::vector<double>(v[0].size(), 60.0));
    for (std::size_t k = 0; k < v[0].size(); ++k) ts.t.push_back(k * dt);
    return ts;
}

}  // namespace

TEST_CASE("sustained over-frequency trips after the pickup delay", "[protection]") {
    RelaySettings rs;
    RelayScanner scanner(rs);
    const double dt = 0.02;
    std::vector<TripEvent> fired;
    for (int step = 0; step < 20; ++step) {
        // The simulator scans after advancing the step.
        auto trips = scanner.scan((step + 1) * dt, dt, {{1, 62.5}}, {});
        fired.insert(fired.end(), trips.begin(), trips.end());
    }
    REQUIRE(fired.size() == 1);
    CHECK(fired[0].reason == TripReason::OverFreq);
    CHECK(fired[0].element_id == 1);
    CHECK(fired[0].t >= rs.freq_pickup_delay - 1e-12);
    CHECK(fired[0].measured == Approx(62.5));
}

TEST_CASE("nominal frequency never trips", "[protection]") {
    RelayScanner scanner(RelaySettings{});
    for (int step = 0; step < 1000; ++step) {
        auto trips = scanner.scan(step * 0.01, 0.01, {{1, 60.0}, {2, 60.0}}, {});
        REQUIRE(trips.empty());
    }
}

TEST_CASE("one-step excursion resets the pickup timer", "[protection]") {
    RelayScanner scanner(RelaySettings{});
    const double dt = 0.02;
    std::vector<TripEvent> fired;
    for (int step = 0; step < 500; ++step) {
        const double f = step % 4 == 0 ? 62.5 : 60.0;  // never sustained
        auto trips = scanner.scan(step * dt, dt, {{1, f}}, {});
        fired.insert(fired.end(), trips.begin(), trips.end());
    }
    CHECK(fired.empty());
}

TEST_CASE("each element trips at most once", "[protection]") {
    RelayScanner scanner(RelaySettings{});
    int count = 0;
    for (int step = 0; step < 200; ++step)
        count += static_cast<int>(scanner.scan(step * 0.02, 0.02, {{1, 63.0}}, {}).size());
    CHECK(count == 1);
}

TEST_CASE("under-frequency and line overload relays fire", "[protection]") {
    RelaySettings rs;
    rs.line_overload_enabled = true;
    RelayScanner scanner(rs);
    std::vector<TripEvent> fired;
    for (int step = 0; step < 100; ++step) {
        auto trips =
            scanner.scan((step + 1) * 0.02, 0.02, {{1, 57.0}}, {{4, {150.0, 100.0}}});
        fired.insert(fired.end(), trips.begin(), trips.end());
    }
    REQUIRE(fired.size() == 2);
    CHECK(fired[0].reason == TripReason::UnderFreq);
    CHECK(fired[1].reason == TripReason::LineOverload);
    CHECK(fired[1].t >= rs.line_pickup_delay - 1e-12);
}

TEST_CASE("disabled relay classes stay silent", "[protection]") {
    RelaySettings rs;
    rs.gen_freq_enabled = false;
    rs.line_overload_enabled = false;
    RelayScanner scanner(rs);
    for (int step = 0; step < 100; ++step)
        REQUIRE(scanner.scan(step * 0.02, 0.02, {{1, 70.0}}, {{4, {900.0, 100.0}}}).empty());
}

TEST_CASE("loosening thresholds never adds trips", "[protection][property]") {
    // Fixed synthetic trajectory: machine 1 rides 62.6 Hz for 0.3 s.
    auto run = [](const RelaySettings& rs) {
        RelayScanner scanner(rs);
        int total = 0;
        for (int step = 0; step < 300; ++step) {
            const double t = step * 0.01;
            const double f = (t >= 1.0 && t < 1.3) ? 62.6 : 60.0;
            total += static_cast<int>(scanner.scan(t, 0.01, {{1, f}}, {}).size());
        }
        return total;
    };
    RelaySettings tight;
    const int base = run(tight);
    RelaySettings wider = tight;
    wider.gen_over_freq = 62.8;
    CHECK(run(wider) <= base);
    RelaySettings slower = tight;
    slower.freq_pickup_delay = 0.5;
    CHECK(run(slower) <= base);
}

TEST_CASE("identical trajectories produce identical trip lists", "[protection][property]") {
    auto run = [] {
        RelayScanner scanner(RelaySettings{});
        std::vector<TripEvent> fired;
        for (int step = 0; step < 400; ++step) {
            const double t = step * 0.01;
            std::map<int, double> freqs{{1, t > 2.0 ? 62.7 : 60.0}, {2, 60.0}};
            auto trips = scanner.scan(t, 0.01, freqs, {});
            fired.insert(fired.end(), trips.begin(), trips.end());
        }
        return fired;
    };
    auto a = run();
    auto b = run();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].t == b[i].t);
        CHECK(a[i].element_id == b[i].element_id);
    }
}

TEST_CASE("clean voltage trajectory yields an empty report", "[protection][voltage]") {
    auto ts = synthetic_series({4}, {std::vector<double>(100, 1.0)});
    CHECK(voltage_violations(ts, RelaySettings{}).empty());
}

TEST_CASE("persistent high voltage is a settled violation", "[protection][voltage]") {
    std::vector<double> v(100, 1.06);
    auto ts = synthetic_series({4}, {v});
    auto report = voltage_violations(ts, RelaySettings{});
    REQUIRE(report.size() == 1);
    CHECK(report[0].bus == 4);
    CHECK(report[0].settled);
    CHECK(report[0].high);
}

TEST_CASE("transient spike is reported but not settled", "[protection][voltage]") {
    std::vector<double> v(200, 1.02);
    for (int k = 30; k < 40; ++k) v[k] = 1.07;  // spike near t=15.2 s analogue
    auto ts = synthetic_series({7}, {v});
    auto report = voltage_violations(ts, RelaySettings{});
    REQUIRE(report.size() == 1);
    CHECK(report[0].bus == 7);
    CHECK_FALSE(report[0].settled);
    CHECK(report[0].extreme_v == Approx(1.07));
    CHECK(report[0].first_violation_time == Approx(3.0));
}
