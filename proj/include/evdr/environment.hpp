#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "evdr/domain.hpp"

namespace evdr {

enum class Constraint { C1 = 1, C2, C3, C4, C5 };

std::string_view to_string(Constraint c);

struct EnergyLedger {
    std::vector<double> per_slot;  // kWh moved per slot
    std::vector<double> remaining; // target - per_slot
};

struct StepOutcome {
    ScheduleState next_state;
    double reward = 0.0;
    bool done = false;
    std::optional<Constraint> violation;
};

// Multiplier on the L1 distance in the shaped reward.
inline constexpr double kRewardScale = 100.0;

// Energy one assignment moves in a slot, bounded by the slower of vehicle and
// station and by the SoC headroom (charge) or reserve (discharge).
double assignment_energy(const ElectricVehicle& ev, const ChargingStation& station,
                         const DRProgram& program, ActionKind kind, const SocLimits& limits);

double l1_distance(std::span<const double> target, std::span<const double> achieved);

// The scheduling MDP. Holds the immutable problem definition; every transition
// is a pure function of (state, action).
class Environment {
public:
    Environment(DRProgram program, Fleet fleet, std::vector<ChargingStation> stations,
                SocLimits limits = {}, double max_penalty = -1e5);

    const DRProgram& program() const noexcept { return program_; }
    const Fleet& fleet() const noexcept { return fleet_; }
    const std::vector<ChargingStation>& stations() const noexcept { return stations_; }
    const SocLimits& soc_limits() const noexcept { return limits_; }
    double max_penalty() const noexcept { return max_penalty_; }

    std::size_t action_count() const;
    std::size_t index_of(const Action& a) const;
    Action action_at(std::size_t index) const;

    const ElectricVehicle& vehicle(int ev_id) const;
    bool eligible(const ElectricVehicle& ev, ActionKind kind) const;

    ScheduleState reset() const;
    double assignment_energy(const ElectricVehicle& ev, const ChargingStation& station,
                             ActionKind kind) const;
    std::optional<Constraint> check_constraints(const ScheduleState& state, const Action& a) const;
    // Violations return max_penalty; C4 also ends the episode with the
    // conflict recorded. A legal assignment earns reward(after) - reward(before),
    // so an episode's return is 100 * (initial - final L1 distance).
    StepOutcome step(const ScheduleState& state, const Action& a) const;
    // -100 * L1 distance to the target, or max_penalty on a violation.
    double reward(const ScheduleState& state_after, std::optional<Constraint> violation) const;
    // All EVs placed, a same-cell conflict occurred, or no EV can still be
    // placed without breaking a constraint.
    bool episode_done(const ScheduleState& state) const;
    bool has_legal_action(const ScheduleState& state) const;

    // Ledger from the incrementally maintained per-slot energies.
    EnergyLedger ledger(const ScheduleState& state) const;
    // Ledger recomputed cell by cell from the matrix.
    EnergyLedger energy_of_state(const ScheduleState& state) const;

    double distance(const ScheduleState& state) const;

    // Upper bound of the energy the fleet could move if every eligible EV got
    // its own cell at the fastest station.
    double deliverable_energy() const;

private:
    void check_range(const Action& a) const;

    DRProgram program_;
    Fleet fleet_;
    std::vector<ChargingStation> stations_;
    SocLimits limits_;
    double max_penalty_;
    std::vector<std::size_t> index_by_id_; // ev_id - 1 -> position in fleet_
};

// First-come-first-served schedule without coordination: EVs in fleet order take
// the earliest free (slot, station) cell they are SoC-eligible for. Ignores C5.
ScheduleState baseline_schedule(const Environment& env);

} // namespace evdr
