#include "evdr/environment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evdr {

namespace {

// Slack on the per-slot target bound; energies are sums of a few doubles.
constexpr double kEnergyTolerance = 1e-9;

} // namespace

std::string_view to_string(Constraint c) {
    switch (c) {
    case Constraint::C1: return "C1";
    case Constraint::C2: return "C2";
    case Constraint::C3: return "C3";
    case Constraint::C4: return "C4";
    case Constraint::C5: return "C5";
    }
    return "?";
}

double assignment_energy(const ElectricVehicle& ev, const ChargingStation& station,
                         const DRProgram& program, ActionKind kind, const SocLimits& limits) {
    const double by_power = std::min(ev.max_power_kw, station.max_power_kw) * program.slot_hours;
    double bound = 0.0;
    if (kind == ActionKind::Charge) {
        if (!limits.can_charge(ev.soc))
            throw EligibilityError("EV " + std::to_string(ev.id) + " is too full to charge");
        bound = (limits.soc_max - ev.soc) * ev.capacity_kwh;
    } else {
        if (!limits.can_discharge(ev.soc))
            throw EligibilityError("EV " + std::to_string(ev.id) + " is too empty to discharge");
        bound = (ev.soc - limits.soc_min) * ev.capacity_kwh;
    }
    return std::max(0.0, std::min(by_power, bound));
}

double l1_distance(std::span<const double> target, std::span<const double> achieved) {
    if (target.size() != achieved.size())
        throw ArgumentError("curve lengths differ");
    double d = 0.0;
    for (std::size_t t = 0; t < target.size(); ++t)
        d += std::abs(target[t] - achieved[t]);
    return d;
}

Environment::Environment(DRProgram program, Fleet fleet, std::vector<ChargingStation> stations,
                         SocLimits limits, double max_penalty)
    : program_(std::move(program)), fleet_(std::move(fleet)), stations_(std::move(stations)),
      limits_(limits), max_penalty_(max_penalty) {
    program_.validate();
    limits_.validate();
    validate_fleet(fleet_);
    if (!(max_penalty_ < 0.0))
        throw ConfigError("max penalty must be < 0");
    for (std::size_t i = 0; i < stations_.size(); ++i) {
        if (stations_[i].id != i)
            throw ConfigError("station ids must be 0..N-1 in order");
        if (!(stations_[i].max_power_kw > 0.0))
            throw ConfigError("station max power must be > 0");
    }
    index_by_id_.assign(fleet_.size(), fleet_.size());
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
        const auto id = static_cast<std::size_t>(fleet_[i].id);
        if (id > fleet_.size())
            throw ConfigError("EV ids must be exactly 1..|EV|; found id " + std::to_string(id));
        index_by_id_[id - 1] = i;
    }
}

std::size_t Environment::action_count() const {
    return action_space_size(stations_.size(), fleet_.size(), program_.horizon);
}

std::size_t Environment::index_of(const Action& a) const {
    return action_index(a, stations_.size(), fleet_.size(), program_.horizon);
}

Action Environment::action_at(std::size_t index) const {
    return action_from_index(index, stations_.size(), fleet_.size(), program_.horizon);
}

const ElectricVehicle& Environment::vehicle(int ev_id) const {
    if (ev_id < 1 || static_cast<std::size_t>(ev_id) > fleet_.size())
        throw DataError("unknown EV id " + std::to_string(ev_id));
    return fleet_[index_by_id_[static_cast<std::size_t>(ev_id - 1)]];
}

bool Environment::eligible(const ElectricVehicle& ev, ActionKind kind) const {
    return kind == ActionKind::Charge ? limits_.can_charge(ev.soc) : limits_.can_discharge(ev.soc);
}

ScheduleState Environment::reset() const {
    if (fleet_.empty())
        throw ConfigError("fleet is empty");
    if (stations_.empty())
        throw ConfigError("no charging stations");
    return ScheduleState(stations_.size(), program_.horizon);
}

double Environment::assignment_energy(const ElectricVehicle& ev, const ChargingStation& station,
                                      ActionKind kind) const {
    return evdr::assignment_energy(ev, station, program_, kind, limits_);
}

void Environment::check_range(const Action& a) const {
    if (a.station >= stations_.size() || a.timeslot >= program_.horizon || a.ev_id < 1 ||
        static_cast<std::size_t>(a.ev_id) > fleet_.size())
        throw RangeError("action out of range");
}

std::optional<Constraint> Environment::check_constraints(const ScheduleState& state,
                                                         const Action& a) const {
    check_range(a);
    if (a.kind != kind_for(program_.scenario))
        return Constraint::C1;
    const auto& ev = vehicle(a.ev_id);
    if (a.kind == ActionKind::Charge && !limits_.can_charge(ev.soc))
        return Constraint::C2;
    if (a.kind == ActionKind::Discharge && !limits_.can_discharge(ev.soc))
        return Constraint::C3;
    if (!state.empty(a.station, a.timeslot) || state.contains(a.ev_id))
        return Constraint::C4;
    const double e = assignment_energy(ev, stations_[a.station], a.kind);
    if (state.per_slot()[a.timeslot] + e > program_.target[a.timeslot] + kEnergyTolerance)
        return Constraint::C5;
    return std::nullopt;
}

StepOutcome Environment::step(const ScheduleState& state, const Action& a) const {
    StepOutcome out{state, 0.0, false, check_constraints(state, a)};
    if (out.violation) {
        out.reward = max_penalty_;
        if (*out.violation == Constraint::C4) {
            out.next_state.record_conflict(a);
            out.done = true;
        }
        return out;
    }
    const auto& ev = vehicle(a.ev_id);
    out.next_state.place(a.station, a.timeslot, a.ev_id,
                         assignment_energy(ev, stations_[a.station], a.kind));
    out.reward = reward(out.next_state, std::nullopt) - reward(state, std::nullopt);
    out.done = episode_done(out.next_state);
    return out;
}

double Environment::reward(const ScheduleState& state_after,
                           std::optional<Constraint> violation) const {
    if (violation)
        return max_penalty_;
    return -kRewardScale * distance(state_after);
}

bool Environment::episode_done(const ScheduleState& state) const {
    if (state.conflict())
        return true;
    return std::all_of(fleet_.begin(), fleet_.end(),
                       [&](const ElectricVehicle& ev) { return state.contains(ev.id); }) ||
           !has_legal_action(state);
}

bool Environment::has_legal_action(const ScheduleState& state) const {
    const auto kind = kind_for(program_.scenario);
    for (const auto& ev : fleet_) {
        if (!eligible(ev, kind) || state.contains(ev.id))
            continue;
        for (const auto& station : stations_) {
            const double e = assignment_energy(ev, station, kind);
            for (std::size_t t = 0; t < program_.horizon; ++t)
                if (state.empty(station.id, t) &&
                    state.per_slot()[t] + e <= program_.target[t] + kEnergyTolerance)
                    return true;
        }
    }
    return false;
}

EnergyLedger Environment::ledger(const ScheduleState& state) const {
    EnergyLedger l;
    l.per_slot.assign(state.per_slot().begin(), state.per_slot().end());
    l.remaining.resize(l.per_slot.size());
    for (std::size_t t = 0; t < l.per_slot.size(); ++t)
        l.remaining[t] = program_.target[t] - l.per_slot[t];
    return l;
}

EnergyLedger Environment::energy_of_state(const ScheduleState& state) const {
    if (state.stations() != stations_.size() || state.horizon() != program_.horizon)
        throw DataError("schedule dimensions do not match the environment");
    EnergyLedger l;
    l.per_slot.assign(program_.horizon, 0.0);
    const auto kind = kind_for(program_.scenario);
    for (std::size_t i = 0; i < stations_.size(); ++i)
        for (std::size_t t = 0; t < program_.horizon; ++t)
            if (const int id = state.at(i, t); id != 0)
                l.per_slot[t] += assignment_energy(vehicle(id), stations_[i], kind);
    l.remaining.resize(program_.horizon);
    for (std::size_t t = 0; t < program_.horizon; ++t)
        l.remaining[t] = program_.target[t] - l.per_slot[t];
    return l;
}

double Environment::distance(const ScheduleState& state) const {
    return l1_distance(program_.target, state.per_slot());
}

double Environment::deliverable_energy() const {
    if (stations_.empty())
        return 0.0;
    const auto fastest = *std::max_element(
        stations_.begin(), stations_.end(),
        [](const auto& a, const auto& b) { return a.max_power_kw < b.max_power_kw; });
    const auto kind = kind_for(program_.scenario);
    double total = 0.0;
    for (const auto& ev : fleet_)
        if (eligible(ev, kind))
            total += assignment_energy(ev, fastest, kind);
    return total;
}

ScheduleState baseline_schedule(const Environment& env) {
    const auto& program = env.program();
    ScheduleState state(env.stations().size(), program.horizon);
    const auto kind = kind_for(program.scenario);
    for (const auto& ev : env.fleet()) {
        if (!env.eligible(ev, kind))
            continue;
        bool placed = false;
        for (std::size_t t = 0; t < program.horizon && !placed; ++t) {
            for (const auto& station : env.stations()) {
                if (!state.empty(station.id, t))
                    continue;
                state.place(station.id, t, ev.id, env.assignment_energy(ev, station, kind));
                placed = true;
                break;
            }
        }
    }
    return state;
}

} // namespace evdr
