#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gridshock/cases.hpp"
#include "gridshock/stability.hpp"
#include "oracles/two_bus_forms.hpp"

using namespace gridshock;
using Catch::Approx;

namespace {

Case two_bus_case(double x = 0.1, double p_mw = 10.0, double pf = 0.95) {
    Case c;
    c.name = "two_bus_pv";
    c.base_mva = 100.0;
    c.buses = {{1, BusKind::Slack, 138.0, 1.0, 0, 0, 1}, {2, BusKind::PQ, 138.0, 1.0, 0, 0, 1}};
    c.branches = {{1, 1, 2, 0.0, x, 0.0, 1.0, 0.0, true}};
    c.generators = {{1, 1, 0.0, -1e6, 1e6, 1.0, 100.0, 1.0, std::nullopt, true}};
    const double q = p_mw * std::tan(std::acos(pf));
    c.loads = {{1, 2, p_mw, q, LoadModel::ConstantPower, true, "ld"}};
    return c;
}

}  // namespace

TEST_CASE("pv trace starts at the base point", "[stability][pv]") {
    Case c = builtin::wscc9();
    PVOptions opts;
    opts.step_mw = 10.0;
    auto curve = trace_pv(c, {5, 6, 8}, {1, 2, 3}, {5}, opts);
    REQUIRE_FALSE(curve.extra_mw.empty());
    CHECK(curve.extra_mw.front() == 0.0);
    auto base = solve_power_flow(c);
    CHECK(curve.v.front()[0] == Approx(base.v_at(c, 5)).margin(1e-6));
    CHECK(curve.knee_found);
    CHECK(curve.knee_extra_mw > 50.0);
}

TEST_CASE("two-bus knee matches the analytic transfer limit", "[stability][pv][oracle]") {
    const double x = 0.1, pf = 0.95;
    Case c = two_bus_case(x, 10.0, pf);
    PVOptions opts;
    opts.step_mw = 20.0;
    opts.bisect_tol_mw = 0.5;
    opts.mode = PVMode::ScaleExisting;
    auto curve = trace_pv(c, {2}, {}, {2}, opts);
    REQUIRE(curve.knee_found);
    const double tanphi = std::tan(std::acos(pf));
    const double p_max = oracles::two_bus_pv_limit_mw(1.0, x, tanphi, c.base_mva);
    const double knee_total = 10.0 + curve.knee_extra_mw;
    CHECK(knee_total == Approx(p_max).margin(2.0));
}

TEST_CASE("pv knee is step-size self-consistent", "[stability][pv][property]") {
    Case c = builtin::wscc9();
    PVOptions coarse;
    coarse.step_mw = 5.0;
    coarse.bisect_tol_mw = 1.0;
    PVOptions fine = coarse;
    fine.step_mw = 1.0;
    auto a = trace_pv(c, {5, 6, 8}, {1, 2, 3}, {5}, coarse);
    auto b = trace_pv(c, {5, 6, 8}, {1, 2, 3}, {5}, fine);
    REQUIRE(a.knee_found);
    REQUIRE(b.knee_found);
    CHECK(std::abs(a.knee_extra_mw - b.knee_extra_mw) <
          a.converged_to_mw + b.converged_to_mw + 1e-9);
}

TEST_CASE("monitored voltage never rises along the traced branch", "[stability][pv][property]") {
    Case c = builtin::glover7mod();
    PVOptions opts;
    opts.step_mw = 10.0;
    auto curve = trace_pv(c, {3, 4}, {1, 2, 3}, {3, 4}, opts);
    REQUIRE(curve.extra_mw.size() >= 3);
    for (std::size_t m = 0; m < curve.monitored.size(); ++m)
        for (std::size_t k = 1; k < curve.extra_mw.size(); ++k)
            REQUIRE(curve.v[k][m] <= curve.v[k - 1][m] + 5e-4);
}

TEST_CASE("line removal never improves a pv margin", "[stability][pv][property]") {
    Case c = builtin::wscc9();
    PVOptions opts;
    opts.step_mw = 10.0;
    opts.mode = PVMode::AddAtPf;
    auto base_curve = trace_pv(c, {5}, {1, 2, 3}, {5}, opts);
    REQUIRE(base_curve.knee_found);
    // Loop lines only; removing a transformer would island a machine.
    for (int branch_id : {2, 3, 9}) {
        Case weakened = c;
        for (auto& br : weakened.branches)
            if (br.id == branch_id) br.in_service = false;
        auto curve = trace_pv(weakened, {5}, {1, 2, 3}, {5}, opts);
        CHECK(curve.knee_extra_mw <=
              base_curve.knee_extra_mw + base_curve.converged_to_mw + opts.bisect_tol_mw);
    }
}

TEST_CASE("qv at a stiff bus has its valley at the sweep edge", "[stability][qv]") {
    Case c = builtin::wscc9();
    auto curve = trace_qv(c, 2, 1.10, 0.80, 0.01);  // generator terminal bus
    REQUIRE_FALSE(curve.points.empty());
    // Near-linear Q(v): the minimum sits at the low edge of the sweep.
    CHECK(curve.valley_v == Approx(curve.points.back().v).margin(1e-9));
}

TEST_CASE("two-bus qv valley matches the closed form", "[stability][qv][oracle]") {
    const double x = 0.12;
    Case c = two_bus_case(x, 60.0, 0.9);
    auto curve = trace_qv(c, 2, 1.10, 0.55, 0.005);
    REQUIRE(curve.points.size() > 20);
    const double q_pu = 60.0 * std::tan(std::acos(0.9)) / c.base_mva;
    double valley_v = 0.0, valley_q_pu = 0.0;
    oracles::two_bus_qv_valley(1.0, x, 0.60, q_pu, 0.55, 1.10, valley_v, valley_q_pu);
    CHECK(curve.valley_q == Approx(valley_q_pu * c.base_mva).margin(1.0));
    CHECK(curve.valley_v == Approx(valley_v).margin(0.02));
}

TEST_CASE("qv valley is the minimum over swept points", "[stability][qv][property]") {
    Case c = builtin::glover7mod();
    for (int bus : {3, 4, 5}) {
        auto curve = trace_qv(c, bus, 1.05, 0.60, 0.01);
        for (const auto& pt : curve.points) REQUIRE(curve.valley_q <= pt.q_mvar + 1e-9);
        CHECK(curve.reactive_margin > 0.0);
        CHECK(std::abs(curve.q_at_natural) < 5.0);
    }
}

TEST_CASE("identical symmetric buses tie and break by id", "[stability][rank]") {
    Case c;
    c.name = "symmetric";
    c.base_mva = 100.0;
    c.buses = {{1, BusKind::Slack, 138.0, 1.0, 0, 0, 1},
               {2, BusKind::PQ, 138.0, 1.0, 0, 0, 1},
               {3, BusKind::PQ, 138.0, 1.0, 0, 0, 1}};
    c.branches = {{1, 1, 2, 0.01, 0.1, 0.0, 1.0, 0.0, true},
                  {2, 1, 3, 0.01, 0.1, 0.0, 1.0, 0.0, true}};
    c.generators = {{1, 1, 0.0, -1e6, 1e6, 1.0, 100.0, 1.0, std::nullopt, true}};
    c.loads = {{1, 2, 20.0, 8.0, LoadModel::ConstantPower, true, "l2"},
               {2, 3, 20.0, 8.0, LoadModel::ConstantPower, true, "l3"}};
    auto ranking = rank_weak_buses(c, {3, 2}, WeakBusMetric::PVMargin);
    REQUIRE(ranking.entries.size() == 2);
    CHECK(std::abs(ranking.entries[0].pv_margin_mw - ranking.entries[1].pv_margin_mw) <
          1.0 + 1e-9);
    CHECK(ranking.entries[0].bus == 2);  // tie broken by id
    CHECK(ranking.entries[1].bus == 3);
}

TEST_CASE("single candidate yields a ranking of one", "[stability][rank]") {
    Case c = builtin::wscc9();
    auto ranking = rank_weak_buses(c, {5}, WeakBusMetric::QVMargin);
    REQUIRE(ranking.entries.size() == 1);
    CHECK(ranking.entries[0].bus == 5);
    CHECK(ranking.entries[0].qv_margin_mvar > 0.0);
    CHECK(ranking.entries[0].pv_margin_mw > 0.0);
}
