#include "evdr/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>

namespace evdr {

namespace {

// Eligibility thresholds are sums like 0.9 - 0.05, compared against SoC values
// read from text; allow the rounding of that subtraction.
constexpr double kSocTolerance = 1e-12;

} // namespace

std::string_view to_string(Scenario s) {
    return s == Scenario::Charge ? "charge" : "discharge";
}

std::string_view to_string(ActionKind k) {
    return k == ActionKind::Charge ? "C" : "D";
}

Scenario parse_scenario(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "charge" || lower == "c" || lower == "l1")
        return Scenario::Charge;
    if (lower == "discharge" || lower == "d" || lower == "l2")
        return Scenario::Discharge;
    throw ConfigError("unknown scenario '" + std::string(text) + "'");
}

void ElectricVehicle::validate() const {
    auto where = [&] { return "EV " + std::to_string(id) + ": "; };
    if (id < 1)
        throw ValidationError(where() + "id must be >= 1");
    if (!(max_power_kw > 0.0) || !std::isfinite(max_power_kw))
        throw ValidationError(where() + "max power must be > 0");
    if (!(capacity_kwh > 0.0) || !std::isfinite(capacity_kwh))
        throw ValidationError(where() + "capacity must be > 0");
    if (!(soc >= 0.0 && soc <= 1.0))
        throw ValidationError(where() + "soc must lie in [0, 1]");
}

void validate_fleet(std::span<const ElectricVehicle> fleet) {
    std::set<int> seen;
    for (const auto& ev : fleet) {
        ev.validate();
        if (!seen.insert(ev.id).second)
            throw ValidationError("duplicate EV id " + std::to_string(ev.id));
    }
}

std::vector<ChargingStation> make_stations(std::size_t count, double max_power_kw) {
    if (!(max_power_kw > 0.0))
        throw ConfigError("station max power must be > 0");
    std::vector<ChargingStation> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = {i, max_power_kw};
    return out;
}

void DRProgram::validate() const {
    if (horizon < 1)
        throw ConfigError("horizon must be >= 1");
    if (!(slot_hours > 0.0))
        throw ConfigError("slot duration must be > 0");
    if (target.size() != horizon)
        throw ConfigError("target has " + std::to_string(target.size()) + " entries, horizon is " +
                          std::to_string(horizon));
    for (double e : target)
        if (!(e >= 0.0) || !std::isfinite(e))
            throw ConfigError("target energies must be finite and >= 0");
}

std::size_t action_space_size(std::size_t n_stations, std::size_t n_evs, std::size_t horizon) {
    return 2 * n_stations * n_evs * horizon;
}

std::size_t action_index(const Action& a, std::size_t n_stations, std::size_t n_evs,
                         std::size_t horizon) {
    if (a.station >= n_stations || a.timeslot >= horizon || a.ev_id < 1 ||
        static_cast<std::size_t>(a.ev_id) > n_evs)
        throw RangeError("action out of range");
    const std::size_t ev = static_cast<std::size_t>(a.ev_id - 1);
    return ((a.station * n_evs + ev) * horizon + a.timeslot) * 2 +
           (a.kind == ActionKind::Discharge ? 1 : 0);
}

Action action_from_index(std::size_t index, std::size_t n_stations, std::size_t n_evs,
                         std::size_t horizon) {
    if (index >= action_space_size(n_stations, n_evs, horizon))
        throw RangeError("action index " + std::to_string(index) + " out of range");
    Action a;
    a.kind = (index % 2) ? ActionKind::Discharge : ActionKind::Charge;
    index /= 2;
    a.timeslot = index % horizon;
    index /= horizon;
    a.ev_id = static_cast<int>(index % n_evs) + 1;
    a.station = index / n_evs;
    return a;
}

ScheduleState::ScheduleState(std::size_t n_stations, std::size_t horizon)
    : stations_(n_stations), horizon_(horizon), cells_(n_stations * horizon, 0),
      per_slot_(horizon, 0.0) {}

int ScheduleState::at(std::size_t station, std::size_t slot) const {
    if (station >= stations_ || slot >= horizon_)
        throw RangeError("cell out of range");
    return cells_[station * horizon_ + slot];
}

bool ScheduleState::contains(int ev_id) const {
    return std::find(cells_.begin(), cells_.end(), ev_id) != cells_.end();
}

void ScheduleState::place(std::size_t station, std::size_t slot, int ev_id, double energy_kwh) {
    if (station >= stations_ || slot >= horizon_)
        throw RangeError("cell out of range");
    int& cell = cells_[station * horizon_ + slot];
    if (cell != 0)
        throw DataError("cell already occupied");
    cell = ev_id;
    per_slot_[slot] += energy_kwh;
    ++assigned_;
}

bool SocLimits::can_charge(double soc) const {
    return soc <= soc_max - margin + kSocTolerance;
}

bool SocLimits::can_discharge(double soc) const {
    return soc >= soc_min + margin - kSocTolerance;
}

void SocLimits::validate() const {
    if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0))
        throw ConfigError("require 0 <= soc_min < soc_max <= 1");
    if (!(margin >= 0.0))
        throw ConfigError("soc margin must be >= 0");
}

void Hyperparams::validate() const {
    if (memory_size == 0)
        throw ConfigError("memory size must be >= 1");
    if (batch_size == 0 || batch_size > memory_size)
        throw ConfigError("batch size must lie in [1, memory size]");
    if (!(epsilon_decay > 0.0 && epsilon_decay < 1.0))
        throw ConfigError("epsilon decay must lie in (0, 1)");
    if (!(epsilon_initial >= 0.0 && epsilon_initial <= 1.0))
        throw ConfigError("initial epsilon must lie in [0, 1]");
    if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0))
        throw ConfigError("epsilon floor must lie in [0, 1]");
    if (!(learning_rate > 0.0))
        throw ConfigError("learning rate must be > 0");
    if (!(discount >= 0.0 && discount <= 1.0))
        throw ConfigError("discount must lie in [0, 1]");
    if (target_sync_every == 0)
        throw ConfigError("target sync interval must be >= 1");
    if (!(max_penalty < 0.0))
        throw ConfigError("max penalty must be < 0");
    soc_limits().validate();
}

} // namespace evdr
