#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "evdr/agent.hpp"
#include "evdr/environment.hpp"

namespace evdr {

// Pearson correlation coefficient. Throws UndefinedCorrelation when either
// curve is constant.
double pearson(std::span<const double> x, std::span<const double> y);

struct Deviation {
    std::vector<double> per_slot; // |target - achieved|
    double max = 0.0;
};

Deviation deviation_report(std::span<const double> target, std::span<const double> achieved);

inline constexpr std::size_t kOracleLimit = 10'000'000;

struct OracleResult {
    ScheduleState best;  // lexicographically smallest optimal matrix
    double distance = 0.0;
    std::vector<ScheduleState> optima; // every schedule at the minimal distance
    std::size_t schedules_visited = 0;
};

// Exhaustive search over legal schedules (each EV in at most one cell, any EV
// may stay unassigned) for the minimal L1 distance to the target curve.
// Throws CapacityError when (N*T + 1)^|EV| exceeds `limit`.
OracleResult brute_force_oracle(const Environment& env, std::size_t limit = kOracleLimit);

// Number of cells whose contents differ.
std::size_t hamming(const ScheduleState& a, const ScheduleState& b);

// Suboptimally allocated EVs -> fraction of episodes.
using AllocationHistogram = std::map<std::size_t, double>;

std::size_t suboptimal_count(const ScheduleState& schedule, const OracleResult& oracle,
                             std::size_t n_evs);

AllocationHistogram allocation_stats(const NetworkParams& qnet, const Environment& env,
                                     std::size_t episodes, Rng& rng, double epsilon = 0.0);
AllocationHistogram allocation_stats(const NetworkParams& qnet, const Environment& env,
                                     const OracleResult& oracle, std::size_t episodes, Rng& rng,
                                     double epsilon = 0.0);

struct EvalReport {
    std::optional<double> pearson; // empty when a curve is constant
    std::vector<double> per_slot_deviation;
    double max_deviation = 0.0;
    std::optional<AllocationHistogram> allocation_histogram; // empty when the oracle is intractable
    std::optional<double> baseline_pearson;
    std::vector<double> episode_rewards;

    std::vector<double> target;
    std::vector<double> achieved;
    std::vector<double> baseline;
    double distance = 0.0;
    double baseline_distance = 0.0;
    std::optional<double> oracle_distance;
    ScheduleState schedule; // final rollout
    bool truncated = false;
};

struct EvalOptions {
    std::size_t episodes = 1;
    double epsilon = 0.0; // exploration during evaluation rollouts
};

EvalReport evaluate(const NetworkParams& qnet, const Environment& env, const EvalOptions& options,
                    Rng& rng);

} // namespace evdr
