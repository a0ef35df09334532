#include <catch2/catch_amalgamated.hpp>

#include "gridshock/cascade.hpp"
#include "gridshock/cases.hpp"
#include "gridshock/experiments.hpp"
#include "oracles/gauss_seidel.hpp"

using namespace gridshock;
using Catch::Approx;

TEST_CASE("zero-trigger cascade is stable in zero stages", "[cascade]") {
    Case c = builtin::glover7();
    auto result = run_cascade(c, {});
    CHECK(result.terminal == CascadeTerminal::Stable);
    REQUIRE(result.stages.size() == 1);  // the final no-overload check
    CHECK(result.stages[0].tripped_branches.empty());
    CHECK(result.stages[0].max_loading_ratio <= 1.0);
    CHECK(result.total_shed_mw == 0.0);
}

TEST_CASE("loading ratios come from the oracle flows", "[cascade][oracle]") {
    Case c = builtin::wscc9();
    auto pf = solve_power_flow(c);
    REQUIRE(pf.converged);
    auto ratios = loading_report(pf, c);
    auto gs = oracles::gauss_seidel(c, 1e-10);
    REQUIRE(gs.converged);
    // Recompute each branch flow from the oracle voltages directly.
    for (std::size_t bi = 0; bi < c.branches.size(); ++bi) {
        const auto& br = c.branches[bi];
        const int f = c.bus_index(br.from_bus);
        const int t = c.bus_index(br.to_bus);
        const Complex vf = std::polar(gs.v_mag[f], gs.v_ang[f]);
        const Complex vt = std::polar(gs.v_mag[t], gs.v_ang[t]);
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex ysh(0.0, br.b_charging / 2.0);
        const Complex sf = vf * std::conj((ys + ysh) * vf - ys * vt) * c.base_mva;
        const Complex st = vt * std::conj((ys + ysh) * vt - ys * vf) * c.base_mva;
        const double expect = std::max(std::abs(sf), std::abs(st)) / br.mva_limit;
        REQUIRE(ratios[bi] == Approx(expect).margin(1e-5));
    }
}

TEST_CASE("branch at its limit reads ratio one", "[cascade]") {
    Case c;
    c.base_mva = 100.0;
    c.buses = {{1, BusKind::Slack, 138.0, 1.0, 0, 0, 1}, {2, BusKind::PQ, 138.0, 1.0, 0, 0, 1}};
    c.branches = {{1, 1, 2, 0.0, 0.05, 0.0, 1.0, 0.0, true}};
    c.generators = {{1, 1, 0.0, -1e6, 1e6, 1.0, 100.0, 1.0, std::nullopt, true}};
    c.loads = {{1, 2, 40.0, 10.0, LoadModel::ConstantPower, true, "ld"}};
    auto pf = solve_power_flow(c);
    REQUIRE(pf.converged);
    const double mva =
        std::max(std::abs(pf.branch_flow_from[0]), std::abs(pf.branch_flow_to[0]));
    c.branches[0].mva_limit = mva;
    auto pf2 = solve_power_flow(c);
    auto ratios = loading_report(pf2, c);
    CHECK(ratios[0] == Approx(1.0).margin(1e-9));

    // Unlimited branches report zero.
    c.branches[0].mva_limit = 0.0;
    auto pf3 = solve_power_flow(c);
    CHECK(loading_report(pf3, c)[0] == 0.0);
}

TEST_CASE("overloading an islanding line blacks out a two-bus system", "[cascade]") {
    Case c;
    c.base_mva = 100.0;
    c.buses = {{1, BusKind::Slack, 138.0, 1.0, 0, 0, 1}, {2, BusKind::PQ, 138.0, 1.0, 0, 0, 1}};
    c.branches = {{1, 1, 2, 0.0, 0.05, 0.0, 1.0, 30.0, true}};
    c.generators = {{1, 1, 0.0, -1e6, 1e6, 1.0, 100.0, 1.0, std::nullopt, true}};
    c.loads = {{1, 2, 25.0, 8.0, LoadModel::ConstantPower, true, "ld"}};
    std::vector<AttackEvent> trigger{
        {0.0, AttackAction::Connect, 2, 20.0, 6.0, "atk", 1.0}};
    auto result = run_cascade(c, trigger);
    REQUIRE(result.stages.size() == 2);
    CHECK(result.stages[0].tripped_branches == std::vector<int>{1});
    CHECK(result.terminal == CascadeTerminal::BlackoutIslanded);
    CHECK(result.total_shed_mw == Approx(45.0));
}

TEST_CASE("cascade stage sequence is deterministic", "[cascade][property]") {
    Case c = builtin::glover7();
    auto trigger = experiments::cascade_trigger_7bus();
    auto a = run_cascade(c, trigger);
    auto b = run_cascade(c, trigger);
    REQUIRE(a.stages.size() == b.stages.size());
    CHECK(a.trip_order() == b.trip_order());
    CHECK(a.terminal == b.terminal);
}

TEST_CASE("raising all limits never lengthens the shared trip prefix", "[cascade][property]") {
    Case c = builtin::glover7();
    auto trigger = experiments::cascade_trigger_7bus();
    auto base = run_cascade(c, trigger);
    Case relaxed = c;
    for (auto& br : relaxed.branches) br.mva_limit *= 1.15;
    auto soft = run_cascade(relaxed, trigger);
    // Every branch tripped under the relaxed limits must also trip at
    // the tighter limits.
    auto base_order = base.trip_order();
    for (int b : soft.trip_order())
        CHECK(std::find(base_order.begin(), base_order.end(), b) != base_order.end());
    CHECK(soft.trip_order().size() <= base_order.size());
}

TEST_CASE("stable terminals really have no overloads", "[cascade][property]") {
    Case c = builtin::glover7mod();  // raised limits: should ride through
    std::vector<AttackEvent> trigger{
        {0.0, AttackAction::Connect, 3, 30.0, 20.0, "atk", 1.0}};
    auto result = run_cascade(c, trigger);
    REQUIRE(result.terminal == CascadeTerminal::Stable);
    Case snap = apply_scenario_snapshot(c, trigger);
    auto pf = solve_power_flow(snap);
    REQUIRE(pf.converged);
    for (double r : loading_report(pf, snap)) CHECK(r <= 1.0);
}

TEST_CASE("all-over-limit policy can trip several branches per stage", "[cascade]") {
    Case c = builtin::glover7();
    auto trigger = experiments::cascade_trigger_7bus();
    CascadeConfig cfg;
    cfg.policy = TripPolicy::AllOverLimit;
    auto result = run_cascade(c, trigger, cfg);
    std::size_t total = result.trip_order().size();
    CHECK(total >= 1);
    CHECK(result.stages.size() <= run_cascade(c, trigger).stages.size());
}
