#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "evdr/domain.hpp"
#include "evdr/environment.hpp"
#include "evdr/neuralnet.hpp"

namespace evdr {

// Feature vector of a schedule: N*T + 2*|EV| + T + 2 entries, all in [0, 1].
std::size_t feature_length(std::size_t n_stations, std::size_t n_evs, std::size_t horizon);
std::vector<double> encode_state(const Environment& env, const ScheduleState& state);

// Network shape implied by an environment, with hidden layers taken from `base`.
NetworkConfig network_for(const Environment& env, NetworkConfig base);

struct Transition {
    std::vector<double> state_features;
    std::size_t action = 0;
    double reward = 0.0;
    std::vector<double> next_state_features;
    bool done = false;

    bool operator==(const Transition&) const = default;
};

class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity);

    void push(Transition t);
    std::size_t size() const noexcept { return buffer_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const Transition& operator[](std::size_t i) const { return buffer_[i]; }

    // Uniform draw without replacement. Empty when size() <= batch_size: the
    // caller skips training until the memory holds more than one batch.
    std::optional<std::vector<const Transition*>> sample_batch(std::size_t batch_size,
                                                               Rng& rng) const;

private:
    std::size_t capacity_;
    std::deque<Transition> buffer_;
};

// argmax with the lowest index winning ties.
std::size_t argmax(const Eigen::VectorXd& q);

std::size_t select_action(const NetworkParams& qnet, std::span<const double> features,
                          double epsilon, Rng& rng);

// Bellman targets: reward for terminal transitions, otherwise
// reward + discount * max_a' Q_target(next_state, a'). Rewards are multiplied
// by reward_scale first, so the network learns Q in normalized units.
std::vector<double> compute_targets(std::span<const Transition* const> batch, double discount,
                                    const NetworkParams& target_net, double reward_scale = 1.0);

// Reward units per network unit: the largest return a perfect schedule can
// collect from the empty state (100 * sum of the target curve).
double reward_normalizer(const Environment& env);

double decay_epsilon(double epsilon, double decay, double floor = 0.01);

struct TrainingHistory {
    std::vector<double> episode_rewards;
    std::vector<double> episode_losses; // mean loss of the episode's SGD steps, NaN if none
    std::vector<double> episode_epsilons;
    std::vector<double> episode_distances; // L1 distance of the final schedule
    std::vector<bool> episode_optimal;
    std::vector<double> step_losses;
    std::size_t target_syncs = 0;
};

struct TrainOptions {
    // Known minimal L1 distance; marks an episode optimal when its final
    // schedule reaches it.
    std::optional<double> optimal_distance;
    // Called after every episode with (episode index, history so far).
    std::function<void(std::size_t, const TrainingHistory&)> on_episode;
};

struct TrainResult {
    NetworkParams qnet;
    NetworkParams target_net;
    TrainingHistory history;
};

// Step cap per episode; an episode that reaches it is truncated.
std::size_t step_cap(const Environment& env);

TrainResult train(const Environment& env, const Hyperparams& hp, const NetworkConfig& netcfg,
                  const TrainOptions& options = {});

struct Rollout {
    ScheduleState state;
    EnergyLedger ledger;
    double total_reward = 0.0; // sum of step rewards
    double final_reward = 0.0; // reward of the last step
    std::optional<Constraint> final_violation;
    std::size_t steps = 0;
    bool truncated = false; // hit the step cap without terminating
};

// One episode following the network, exploring with probability epsilon.
Rollout rollout(const NetworkParams& qnet, const Environment& env, double epsilon, Rng& rng);

// Pure exploitation.
Rollout greedy_rollout(const NetworkParams& qnet, const Environment& env);

} // namespace evdr
