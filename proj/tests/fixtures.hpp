#pragma once

#include <random>
#include <vector>

#include "evdr/agent.hpp"
#include "evdr/environment.hpp"

namespace evdr::testing {

inline ElectricVehicle zoe22(int id, double soc) { return {id, "Renault ZOE 22", 22, 22, "Type2", soc}; }
inline ElectricVehicle zoe41(int id, double soc) { return {id, "Renault ZOE 41", 22, 41, "Type2", soc}; }
inline ElectricVehicle leaf(int id, double soc) { return {id, "Nissan LEAF", 7, 24, "Type1", soc}; }

inline DRProgram charge_program(std::vector<double> target) {
    const auto n = target.size();
    return {n, 1.0, std::move(target), Scenario::Charge};
}

// The desk-scale acceptance instance shipped in configs/toy.ini.
inline Environment toy_environment() {
    Fleet fleet{zoe22(1, 0.5), zoe41(2, 0.5), leaf(3, 0.4), zoe41(4, 0.65)};
    return Environment(charge_program({7.0, 9.0, 17.96}), fleet, make_stations(2));
}

// Small random instance: 1-3 stations, 1-4 EVs, 1-3 slots, either scenario.
inline Environment random_environment(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> n_st(1, 3), n_ev(1, 4), n_t(1, 3);
    std::uniform_real_distribution<double> soc(0.1, 0.9), tgt(0.0, 30.0), coin(0.0, 1.0);
    const std::size_t stations = n_st(rng), evs = n_ev(rng), horizon = n_t(rng);
    Fleet fleet;
    for (std::size_t i = 0; i < evs; ++i) {
        const int id = static_cast<int>(i + 1);
        const double c = coin(rng);
        fleet.push_back(c < 1.0 / 3 ? zoe22(id, soc(rng)) : c < 2.0 / 3 ? zoe41(id, soc(rng)) : leaf(id, soc(rng)));
    }
    std::vector<double> target(horizon);
    for (auto& t : target)
        t = tgt(rng);
    const auto scenario = coin(rng) < 0.5 ? Scenario::Charge : Scenario::Discharge;
    std::uniform_real_distribution<double> power(5.0, 22.0);
    auto st = make_stations(stations);
    for (auto& s : st)
        s.max_power_kw = power(rng);
    return Environment({horizon, 1.0, target, scenario}, fleet, st);
}

// Every action index that is legal in `state`.
inline std::vector<std::size_t> legal_actions(const Environment& env, const ScheduleState& state) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < env.action_count(); ++i)
        if (!env.check_constraints(state, env.action_at(i)))
            out.push_back(i);
    return out;
}

} // namespace evdr::testing
