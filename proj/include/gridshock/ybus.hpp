#pragma once

#include <Eigen/SparseCore>
#include <algorithm>
#include <numeric>
#include <vector>

#include "gridshock/netmodel.hpp"

namespace gridshock {

using SparseComplex = Eigen::SparseMatrix<Complex>;

/// Per-branch pi-model stamp. Admittances in pu on system base; the tap
/// ratio sits on the from side.
struct BranchStamp {
    Complex yff, yft, ytf, ytt;
};

inline BranchStamp branch_stamp(const Branch& br) {
    if (std::abs(br.r) + std::abs(br.x) <= 0.0)
        throw ValidationError({"branch " + std::to_string(br.id) + ": zero series impedance"});
    const Complex y_series = 1.0 / Complex(br.r, br.x);
    const Complex y_shunt(0.0, br.b_charging / 2.0);
    const double t = br.tap;
    BranchStamp s;
    s.yff = (y_series + y_shunt) / (t * t);
    s.yft = -y_series / t;
    s.ytf = -y_series / t;
    s.ytt = y_series + y_shunt;
    return s;
}

/// Bus admittance matrix in case bus order. Out-of-service branches
/// contribute nothing; parallel branches sum.
inline SparseComplex build_ybus(const Case& c) {
    const int n = static_cast<int>(c.buses.size());
    std::vector<Eigen::Triplet<Complex>> trips;
    trips.reserve(static_cast<std::size_t>(n) + 4 * c.branches.size());

    for (int i = 0; i < n; ++i) {
        const Bus& b = c.buses[i];
        if (b.shunt_g != 0.0 || b.shunt_b != 0.0)
            trips.emplace_back(i, i, Complex(b.shunt_g, b.shunt_b));
    }
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const int f = c.bus_index(br.from_bus);
        const int t = c.bus_index(br.to_bus);
        const BranchStamp s = branch_stamp(br);
        trips.emplace_back(f, f, s.yff);
        trips.emplace_back(f, t, s.yft);
        trips.emplace_back(t, f, s.ytf);
        trips.emplace_back(t, t, s.ytt);
    }
    SparseComplex y(n, n);
    y.setFromTriplets(trips.begin(), trips.end());
    return y;
}

/// Partition of buses into electrical islands over in-service branches.
/// Islands are ordered by their smallest bus id, members ascending.
inline std::vector<std::vector<int>> connectivity(const Case& c) {
    const int n = static_cast<int>(c.buses.size());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        int ra = find(c.bus_index(br.from_bus));
        int rb = find(c.bus_index(br.to_bus));
        if (ra != rb) parent[ra] = rb;
    }
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < n; ++i) groups[find(i)].push_back(c.buses[i].id);
    std::vector<std::vector<int>> islands;
    islands.reserve(groups.size());
    for (auto& [root, members] : groups) {
        std::sort(members.begin(), members.end());
        islands.push_back(std::move(members));
    }
    std::sort(islands.begin(), islands.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return islands;
}

/// True when every bus can reach the slack over in-service branches.
inline bool connected_to_slack(const Case& c) {
    auto islands = connectivity(c);
    if (islands.size() == 1) return true;
    int slack = c.slack_bus_id();
    for (const auto& island : islands) {
        if (std::find(island.begin(), island.end(), slack) != island.end())
            return island.size() == c.buses.size();
    }
    return false;
}

}  // namespace gridshock
