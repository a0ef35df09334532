#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>

#include "gridshock/cases.hpp"
#include "gridshock/caseio.hpp"
#include "gridshock/ybus.hpp"
#include "oracles/bfs_islands.hpp"
#include "oracles/dense_ybus.hpp"
#include "oracles/random_cases.hpp"

using namespace gridshock;
using Catch::Approx;

TEST_CASE("bundled wscc9 loads with the published shape", "[netmodel][cases]") {
    Case c = load_case(builtin_case_text("wscc9"));
    CHECK(c.buses.size() == 9);
    CHECK(c.branches.size() == 9);
    CHECK(c.generators.size() == 3);
    CHECK(c.loads.size() == 3);
    CHECK(c.slack_bus_id() == 1);
    CHECK(c.total_load_mw() == Approx(315.0));
}

TEST_CASE("bundled modified 7-bus carries 800 MW of load", "[netmodel][cases]") {
    Case c = load_case(builtin_case_text("glover7mod"));
    CHECK(c.buses.size() == 7);
    CHECK(c.total_load_mw() == Approx(800.0));
}

TEST_CASE("two slack buses are reported together", "[netmodel][validation]") {
    Case c = builtin::wscc9();
    c.buses[1].kind = BusKind::Slack;  // bus 2 joins bus 1 as slack
    auto violations = validate_case(c);
    REQUIRE_FALSE(violations.empty());
    bool found = false;
    for (const auto& v : violations)
        if (v.find("1") != std::string::npos && v.find("2") != std::string::npos &&
            v.find("Slack") != std::string::npos)
            found = true;
    CHECK(found);
}

TEST_CASE("validation collects every violation", "[netmodel][validation]") {
    Case c = builtin::wscc9();
    c.buses[1].kind = BusKind::Slack;
    c.branches[0].to_bus = 99;        // dangling reference
    c.loads[0].tag = c.loads[1].tag;  // duplicate tag
    auto violations = validate_case(c);
    CHECK(violations.size() >= 3);
}

TEST_CASE("parse errors carry field context", "[netmodel][io]") {
    CHECK_THROWS_AS(load_case("{ not json"), ParseError);
    CHECK_THROWS_AS(load_case(R"({"base_mva": 100, "buses": [], "branches": [],
                                  "generators": [], "loads": 3})"),
                    ParseError);
    try {
        load_case(R"({"base_mva": 100,
                      "buses": [{"id": 1, "kind": "slack"}],
                      "branches": [], "generators": [], "loads": []})");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("v_nominal") != std::string::npos);
    }
}

TEST_CASE("case save/load round-trip preserves content", "[netmodel][io]") {
    for (const auto& name : builtin_case_names()) {
        Case a = builtin_case(name);
        Case b = load_case(save_case(a));
        REQUIRE(b.buses.size() == a.buses.size());
        REQUIRE(b.branches.size() == a.branches.size());
        REQUIRE(b.generators.size() == a.generators.size());
        REQUIRE(b.loads.size() == a.loads.size());
        CHECK(save_case(b) == save_case(a));
        for (std::size_t i = 0; i < a.generators.size(); ++i) {
            REQUIRE(b.generators[i].dynamics.has_value() ==
                    a.generators[i].dynamics.has_value());
            if (a.generators[i].dynamics) {
                CHECK(b.generators[i].dynamics->machine.h ==
                      Approx(a.generators[i].dynamics->machine.h));
                CHECK(b.generators[i].dynamics->governor.pmax ==
                      Approx(a.generators[i].dynamics->governor.pmax));
            }
        }
    }
}

TEST_CASE("bundled case files on disk match the built-in data", "[netmodel][cases]") {
    for (const auto& name : builtin_case_names()) {
        std::ifstream in("cases/" + name + ".json");
        REQUIRE(in.good());
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(ss.str() == builtin_case_text(name));
    }
}

TEST_CASE("two-bus ybus has the textbook entries", "[netmodel][ybus]") {
    Case c;
    c.base_mva = 100.0;
    c.buses = {{1, BusKind::Slack, 138.0, 1.0, 0, 0, 1}, {2, BusKind::PQ, 138.0, 1.0, 0, 0, 1}};
    c.branches = {{1, 1, 2, 0.0, 0.1, 0.0, 1.0, 0.0, true}};
    c.generators = {{1, 1, 0.0, -100, 100, 1.0, 100.0, 1.0, std::nullopt, true}};

    auto y = build_ybus(c);
    Eigen::MatrixXcd yd(y);
    CHECK(yd(0, 0).imag() == Approx(-10.0));
    CHECK(yd(1, 1).imag() == Approx(-10.0));
    CHECK(yd(0, 1).imag() == Approx(10.0));
    CHECK(yd(0, 0).real() == Approx(0.0));

    c.branches[0].in_service = false;
    Eigen::MatrixXcd y0(build_ybus(c));
    CHECK(y0.norm() == Approx(0.0));
}

TEST_CASE("zero-impedance branches are rejected", "[netmodel][ybus]") {
    Case c = builtin::wscc9();
    c.branches[0].r = 0.0;
    c.branches[0].x = 0.0;
    CHECK_THROWS_AS(build_ybus(c), ValidationError);
}

TEST_CASE("triangle ybus matches hand assembly", "[netmodel][ybus][oracle]") {
    Case c;
    c.base_mva = 100.0;
    for (int i = 1; i <= 3; ++i)
        c.buses.push_back({i, i == 1 ? BusKind::Slack : BusKind::PQ, 138.0, 1.0, 0.01 * i,
                           -0.02 * i, 1});
    c.branches = {{1, 1, 2, 0.01, 0.06, 0.04, 1.0, 0.0, true},
                  {2, 2, 3, 0.02, 0.10, 0.08, 0.98, 0.0, true},
                  {3, 1, 3, 0.015, 0.08, 0.06, 1.0, 0.0, true}};
    c.generators = {{1, 1, 0.0, -100, 100, 1.0, 100.0, 1.0, std::nullopt, true}};

    Eigen::MatrixXcd y(build_ybus(c));
    auto oracle = oracles::dense_ybus(c);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(std::abs(y(i, j) - oracle[i][j]) < 1e-14);
}

TEST_CASE("random ybus matches hand assembly including parallels", "[netmodel][ybus][oracle]") {
    std::mt19937 rng(12345);
    for (int trial = 0; trial < 25; ++trial) {
        Case c = oracles::random_case(rng, 3 + trial % 5);
        if (trial % 3 == 0 && c.branches.size() > 1) {
            Branch dup = c.branches[0];  // parallel circuit
            dup.id = 1000;
            c.branches.push_back(dup);
        }
        const int n = static_cast<int>(c.buses.size());
        Eigen::MatrixXcd y(build_ybus(c));
        auto oracle = oracles::dense_ybus(c);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                REQUIRE(std::abs(y(i, j) - oracle[i][j]) < 1e-12);
    }
}

TEST_CASE("ybus symmetry and row sums on tap-free networks", "[netmodel][ybus][property]") {
    std::mt19937 rng(777);
    for (int trial = 0; trial < 20; ++trial) {
        Case c = oracles::random_case(rng, 4 + trial % 4);
        for (auto& br : c.branches) br.tap = 1.0;
        const int n = static_cast<int>(c.buses.size());
        Eigen::MatrixXcd y(build_ybus(c));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                REQUIRE(std::abs(y(i, j) - y(j, i)) < 1e-13);
        // Series terms cancel in row sums, leaving shunt admittance.
        for (int i = 0; i < n; ++i) {
            Complex row(0, 0);
            for (int j = 0; j < n; ++j) row += y(i, j);
            Complex shunt(c.buses[i].shunt_g, c.buses[i].shunt_b);
            for (const auto& br : c.branches) {
                if (!br.in_service) continue;
                if (br.from_bus == c.buses[i].id || br.to_bus == c.buses[i].id)
                    shunt += Complex(0, br.b_charging / 2.0);
            }
            REQUIRE(std::abs(row - shunt) < 1e-12);
        }
    }
}

TEST_CASE("nine-bus network is a single island", "[netmodel][connectivity]") {
    Case c = builtin::wscc9();
    auto islands = connectivity(c);
    REQUIRE(islands.size() == 1);
    CHECK(islands[0].size() == 9);
}

TEST_CASE("cutting every branch at bus 5 isolates it", "[netmodel][connectivity]") {
    Case c = builtin::wscc9();
    for (auto& br : c.branches)
        if (br.from_bus == 5 || br.to_bus == 5) br.in_service = false;
    auto islands = connectivity(c);
    REQUIRE(islands.size() == 2);
    CHECK(islands[1] == std::vector<int>{5});
    CHECK(islands[0].size() == 8);
}

TEST_CASE("random branch removals match the BFS oracle", "[netmodel][connectivity][oracle]") {
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> ur(0.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        Case c = oracles::random_case(rng, 4 + trial % 6);
        for (auto& br : c.branches)
            if (ur(rng) < 0.35) br.in_service = false;
        REQUIRE(connectivity(c) == oracles::bfs_islands(c));
    }
}
