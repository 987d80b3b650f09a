#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evdr/error.hpp"

namespace evdr {

enum class Scenario { Charge, Discharge };
enum class ActionKind { Charge, Discharge };

std::string_view to_string(Scenario s);
std::string_view to_string(ActionKind k);
Scenario parse_scenario(std::string_view text);

// The kind of assignment a scenario admits.
constexpr ActionKind kind_for(Scenario s) {
    return s == Scenario::Charge ? ActionKind::Charge : ActionKind::Discharge;
}

struct ElectricVehicle {
    int id = 0; // 0 is the empty-cell marker, never a vehicle
    std::string model_name;
    double max_power_kw = 0.0;
    double capacity_kwh = 0.0;
    std::string connector_type;
    double soc = 0.0;

    void validate() const;
    bool operator==(const ElectricVehicle&) const = default;
};

using Fleet = std::vector<ElectricVehicle>;

// Unique ids >= 1 and per-vehicle invariants.
void validate_fleet(std::span<const ElectricVehicle> fleet);

struct ChargingStation {
    std::size_t id = 0;
    double max_power_kw = 22.0;

    bool operator==(const ChargingStation&) const = default;
};

// Stations 0..count-1, all with the same power limit.
std::vector<ChargingStation> make_stations(std::size_t count, double max_power_kw = 22.0);

struct DRProgram {
    std::size_t horizon = 1;
    double slot_hours = 1.0;
    std::vector<double> target; // kWh per slot
    Scenario scenario = Scenario::Charge;

    void validate() const;
    bool operator==(const DRProgram&) const = default;
};

struct Action {
    std::size_t station = 0;
    int ev_id = 1;
    std::size_t timeslot = 0;
    ActionKind kind = ActionKind::Charge;

    bool operator==(const Action&) const = default;
};

std::size_t action_space_size(std::size_t n_stations, std::size_t n_evs, std::size_t horizon);

// Flat layout: ((station * n_evs + (ev_id - 1)) * horizon + timeslot) * 2 + kind.
std::size_t action_index(const Action& a, std::size_t n_stations, std::size_t n_evs,
                         std::size_t horizon);
Action action_from_index(std::size_t index, std::size_t n_stations, std::size_t n_evs,
                         std::size_t horizon);

// N x T matrix of EV ids (0 = empty) together with the per-slot energy that the
// assignments in it move. A same-cell conflict that ended the episode is kept
// next to the matrix so the legal part of the schedule stays readable.
class ScheduleState {
public:
    ScheduleState() = default;
    ScheduleState(std::size_t n_stations, std::size_t horizon);

    std::size_t stations() const noexcept { return stations_; }
    std::size_t horizon() const noexcept { return horizon_; }

    int at(std::size_t station, std::size_t slot) const;
    bool empty(std::size_t station, std::size_t slot) const { return at(station, slot) == 0; }

    // Row-major (station, slot).
    std::span<const int> cells() const noexcept { return cells_; }
    std::span<const double> per_slot() const noexcept { return per_slot_; }

    bool contains(int ev_id) const;
    std::size_t assigned_count() const noexcept { return assigned_; }

    void place(std::size_t station, std::size_t slot, int ev_id, double energy_kwh);
    void record_conflict(const Action& a) { conflict_ = a; }
    const std::optional<Action>& conflict() const noexcept { return conflict_; }

    bool operator==(const ScheduleState&) const = default;

private:
    std::size_t stations_ = 0;
    std::size_t horizon_ = 0;
    std::vector<int> cells_;
    std::vector<double> per_slot_;
    std::size_t assigned_ = 0;
    std::optional<Action> conflict_;
};

struct SocLimits {
    double soc_min = 0.20;
    double soc_max = 0.90;
    double margin = 0.05;

    bool can_charge(double soc) const;
    bool can_discharge(double soc) const;
    void validate() const;
};

struct Hyperparams {
    std::size_t epochs = 160000;
    std::size_t memory_size = 700000;
    std::size_t batch_size = 50000;
    double epsilon_initial = 1.0;
    double epsilon_decay = 0.99996;
    double epsilon_floor = 0.01;
    double learning_rate = 0.001;
    double discount = 0.99;
    std::size_t target_sync_every = 10;
    double max_penalty = -1e5;
    double soc_min = 0.20;
    double soc_max = 0.90;
    double soc_margin = 0.05;
    std::uint64_t rng_seed = 0;

    SocLimits soc_limits() const { return {soc_min, soc_max, soc_margin}; }
    void validate() const;
    bool operator==(const Hyperparams&) const = default;
};

} // namespace evdr
