#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evdr/agent.hpp"
#include "evdr/domain.hpp"
#include "evdr/environment.hpp"
#include "evdr/evaluation.hpp"
#include "evdr/neuralnet.hpp"

namespace evdr {

namespace fs = std::filesystem;

// Fleet CSV: id,model,max_power_kw,capacity_kwh,connector,soc
Fleet read_fleet(std::istream& in);
Fleet load_fleet(const fs::path& path);
void write_fleet(std::ostream& out, const Fleet& fleet);

// Share of (ZOE 22 kWh, ZOE 41 kWh, LEAF 24 kWh) in a generated fleet.
using FleetMix = std::array<double, 3>;

// `count` EVs with ids 1..count, models drawn by `mix`, SoC uniform in [0.1, 0.9].
Fleet gen_fleet(std::size_t count, const FleetMix& mix, Rng& rng);

// Target profile CSV: slot,target_kwh
std::vector<double> read_target(std::istream& in);
std::vector<double> load_target(const fs::path& path);

// Piecewise-constant profile with up to three random levels, scaled so its
// total equals `fraction` of what the fleet could deliver.
std::vector<double> synthetic_target(const Fleet& fleet, const std::vector<ChargingStation>& stations,
                                     std::size_t horizon, double slot_hours, Scenario scenario,
                                     const SocLimits& limits, double fraction, Rng& rng);

struct RunConfig {
    Scenario scenario = Scenario::Charge;
    std::size_t horizon = 5;
    double slot_hours = 1.0;
    std::optional<std::vector<double>> target;
    std::optional<fs::path> target_file;
    std::optional<double> target_fraction; // synthetic profile
    std::uint64_t target_seed = 0;

    std::optional<fs::path> fleet_file;
    std::size_t fleet_count = 30; // generated fleet when no file is given
    FleetMix fleet_mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::uint64_t fleet_seed = 0;

    std::size_t station_count = 6;
    double station_power_kw = 22.0;

    Hyperparams hp;
    NetworkConfig network; // input/output sizes are derived from the environment

    std::size_t eval_episodes = 1;
    double eval_epsilon = 0.0;

    fs::path out_dir = "out";

    bool operator==(const RunConfig&) const = default;
};

// Flat INI-style file with sections. Relative paths resolve against the
// config file's directory.
RunConfig load_config(const fs::path& path);
RunConfig parse_config(std::istream& in, const fs::path& base_dir);
void write_config(std::ostream& out, const RunConfig& config);

// The problem a config describes, with files read and generators run.
struct ResolvedRun {
    DRProgram program;
    Fleet fleet;
    std::vector<ChargingStation> stations;
    Hyperparams hp;
    NetworkConfig network;

    Environment environment() const;
};

ResolvedRun resolve(const RunConfig& config);

// Copy of `config` with the target written inline and every path absolute, so
// the file reproduces the run on its own.
RunConfig manifest_of(const RunConfig& config, const ResolvedRun& run);

// Binary checkpoint: "DRQN", version, network config, then each layer's
// row-major weights and bias as little-endian float64.
void save_checkpoint(std::ostream& out, const NetworkParams& params);
void save_checkpoint(const fs::path& path, const NetworkParams& params);
NetworkParams load_checkpoint(std::istream& in);
NetworkParams load_checkpoint(const fs::path& path);

std::string describe_shape(const NetworkConfig& config);

// Throws ShapeError naming both shapes when the checkpoint does not fit.
void check_shape(const NetworkParams& params, const NetworkConfig& expected);

std::string format_double(double v);

void write_history_csv(std::ostream& out, const TrainingHistory& history);
void write_curves_csv(std::ostream& out, const std::vector<double>& target,
                      const std::vector<double>& achieved, const std::vector<double>& baseline);
void write_schedule_csv(std::ostream& out, const Environment& env, const ScheduleState& schedule);
void write_report(std::ostream& out, const EvalReport& report);

} // namespace evdr
