#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "gridshock/powerflow.hpp"
#include "gridshock/ybus.hpp"

namespace gridshock {

enum class TripPolicy { MostOverloadedFirst, AllOverLimit };

struct CascadeConfig {
    TripPolicy policy = TripPolicy::MostOverloadedFirst;
    double overload_threshold = 1.0;  // ratio of mva_limit
    int max_stages = 50;
    PFOptions pf = [] {
        PFOptions o;
        o.enforce_q_limits = true;  // machines exhaust VARs as stages deepen
        return o;
    }();
};

enum class CascadeTerminal { Stable, BlackoutIslanded, BlackoutDivergence, StageLimit };

inline std::string cascade_terminal_name(CascadeTerminal t) {
    switch (t) {
        case CascadeTerminal::Stable: return "Stable";
        case CascadeTerminal::BlackoutIslanded: return "Blackout(Islanded)";
        case CascadeTerminal::BlackoutDivergence: return "Blackout(Divergence)";
        default: return "StageLimit";
    }
}

struct CascadeStage {
    std::vector<int> tripped_branches;   // branch ids tripped this stage
    double max_loading_ratio = 0.0;
    std::map<int, double> loading;       // branch id -> ratio before the trip
    double shed_mw = 0.0;                // load lost to unviable islands
    int viable_islands = 1;
    double total_gen_mw = 0.0;           // PF summary
    double total_load_mw = 0.0;
};

struct CascadeResult {
    std::vector<CascadeStage> stages;
    CascadeTerminal terminal = CascadeTerminal::Stable;
    double total_shed_mw = 0.0;

    std::vector<int> trip_order() const {
        std::vector<int> order;
        for (const auto& st : stages)
            for (int b : st.tripped_branches) order.push_back(b);
        return order;
    }
};

/// Per-branch loading ratio: apparent flow (worse end) over mva_limit,
/// zero for unlimited or out-of-service branches.
inline std::vector<double> loading_report(const PFSolution& pf, const Case& c) {
    std::vector<double> ratios(c.branches.size(), 0.0);
    for (std::size_t bi = 0; bi < c.branches.size(); ++bi) {
        const auto& br = c.branches[bi];
        if (!br.in_service || br.mva_limit <= 0.0) continue;
        const double mva =
            std::max(std::abs(pf.branch_flow_from[bi]), std::abs(pf.branch_flow_to[bi]));
        ratios[bi] = mva / br.mva_limit;
    }
    return ratios;
}

namespace cascdetail {

struct IslandSolve {
    bool converged = true;
    double gen_mw = 0.0;
    double load_mw = 0.0;
    std::map<int, double> loading;  // branch id -> ratio
};

/// Solves one island as a standalone case, re-designating a swing
/// machine when the island lost the original slack.
inline IslandSolve solve_island(const Case& work, const std::vector<int>& island_buses,
                                const PFOptions& opts) {
    Case sub;
    sub.name = work.name + "_island";
    sub.base_mva = work.base_mva;
    sub.f_nominal = work.f_nominal;
    std::set<int> members(island_buses.begin(), island_buses.end());
    for (const auto& b : work.buses)
        if (members.count(b.id)) sub.buses.push_back(b);
    for (const auto& br : work.branches)
        if (br.in_service && members.count(br.from_bus) && members.count(br.to_bus))
            sub.branches.push_back(br);
    for (const auto& g : work.generators)
        if (g.in_service && members.count(g.bus)) sub.generators.push_back(g);
    for (const auto& l : work.loads)
        if (l.status && members.count(l.bus)) sub.loads.push_back(l);

    bool has_slack = false;
    for (const auto& b : sub.buses) {
        if (b.kind != BusKind::Slack) continue;
        bool backed = false;
        for (const auto& g : sub.generators)
            if (g.bus == b.id) backed = true;
        if (backed) has_slack = true;
    }
    if (!has_slack) {
        for (auto& b : sub.buses)
            if (b.kind == BusKind::Slack) b.kind = BusKind::PQ;
        // Largest machine takes the swing role; ties to the lowest bus.
        const Generator* swing = nullptr;
        for (const auto& g : sub.generators)
            if (swing == nullptr || g.mbase > swing->mbase ||
                (g.mbase == swing->mbase && g.bus < swing->bus))
                swing = &g;
        if (swing == nullptr) {
            IslandSolve out;  // no machine at all; caller sheds the island
            out.converged = false;
            return out;
        }
        auto& bus = sub.buses[sub.bus_index(swing->bus)];
        bus.kind = BusKind::Slack;
        bus.v_setpoint = swing->v_set;
    }

    IslandSolve out;
    PFSolution sol = solve_power_flow(sub, opts);
    if (!sol.converged) {
        out.converged = false;
        return out;
    }
    for (double p : sol.gen_p) out.gen_mw += p;
    for (const auto& l : sub.loads) {
        const double scale = l.model == LoadModel::ConstantImpedance
                                 ? sol.v_at(sub, l.bus) * sol.v_at(sub, l.bus)
                                 : 1.0;
        out.load_mw += l.p * scale;
    }
    auto ratios = loading_report(sol, sub);
    for (std::size_t bi = 0; bi < sub.branches.size(); ++bi)
        out.loading[sub.branches[bi].id] = ratios[bi];
    return out;
}

}  // namespace cascdetail

/// Quasi-static overload cascade: apply the trigger once, then solve,
/// trip per policy, shed unviable islands, and repeat to a terminal.
inline CascadeResult run_cascade(const Case& base, const std::vector<AttackEvent>& trigger,
                                 const CascadeConfig& cfg = {}) {
    {
        PFSolution pre = solve_power_flow(base, cfg.pf);
        if (!pre.converged)
            throw BaseCaseInfeasible("cascade: base case does not converge");
    }
    Case work = apply_scenario_snapshot(base, trigger);

    CascadeResult result;
    for (int stage_no = 0; stage_no < cfg.max_stages; ++stage_no) {
        CascadeStage stage;

        // Shed islands that lost every machine.
        auto islands = connectivity(work);
        std::vector<std::vector<int>> viable;
        for (const auto& island : islands) {
            bool has_gen = false;
            for (const auto& g : work.generators)
                if (g.in_service &&
                    std::find(island.begin(), island.end(), g.bus) != island.end())
                    has_gen = true;
            if (has_gen) {
                viable.push_back(island);
                continue;
            }
            for (auto& l : work.loads) {
                if (!l.status) continue;
                if (std::find(island.begin(), island.end(), l.bus) != island.end()) {
                    stage.shed_mw += l.p;
                    l.status = false;
                }
            }
            for (auto& br : work.branches)
                if (br.in_service &&
                    std::find(island.begin(), island.end(), br.from_bus) != island.end())
                    br.in_service = false;
        }
        result.total_shed_mw += stage.shed_mw;
        stage.viable_islands = static_cast<int>(viable.size());
        double served_mw = 0.0;
        for (const auto& l : work.loads)
            if (l.status) served_mw += l.p;
        if (viable.empty() || (served_mw <= 0.0 && result.total_shed_mw > 0.0)) {
            result.stages.push_back(stage);
            result.terminal = CascadeTerminal::BlackoutIslanded;
            return result;
        }

        bool diverged = false;
        for (const auto& island : viable) {
            auto sol = cascdetail::solve_island(work, island, cfg.pf);
            if (!sol.converged) {
                diverged = true;
                break;
            }
            stage.total_gen_mw += sol.gen_mw;
            stage.total_load_mw += sol.load_mw;
            for (const auto& [branch_id, ratio] : sol.loading)
                stage.loading[branch_id] = ratio;
        }
        if (diverged) {
            result.stages.push_back(stage);
            result.terminal = CascadeTerminal::BlackoutDivergence;
            return result;
        }

        for (const auto& [branch_id, ratio] : stage.loading)
            stage.max_loading_ratio = std::max(stage.max_loading_ratio, ratio);

        std::vector<int> over;
        for (const auto& [branch_id, ratio] : stage.loading)
            if (ratio > cfg.overload_threshold) over.push_back(branch_id);
        if (over.empty()) {
            result.stages.push_back(stage);
            result.terminal = CascadeTerminal::Stable;
            return result;
        }

        if (cfg.policy == TripPolicy::MostOverloadedFirst) {
            int worst = over.front();
            for (int b : over) {
                if (stage.loading[b] > stage.loading[worst] ||
                    (stage.loading[b] == stage.loading[worst] && b < worst))
                    worst = b;
            }
            over = {worst};
        }
        for (auto& br : work.branches)
            if (std::find(over.begin(), over.end(), br.id) != over.end())
                br.in_service = false;
        stage.tripped_branches = over;
        result.stages.push_back(stage);
    }
    result.terminal = CascadeTerminal::StageLimit;
    return result;
}

}  // namespace gridshock
