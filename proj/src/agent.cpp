#include "evdr/agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

namespace evdr {

std::size_t feature_length(std::size_t n_stations, std::size_t n_evs, std::size_t horizon) {
    return n_stations * horizon + 2 * n_evs + horizon + 2;
}

std::vector<double> encode_state(const Environment& env, const ScheduleState& state) {
    const auto& fleet = env.fleet();
    const auto& program = env.program();
    const std::size_t n_evs = fleet.size();
    std::vector<double> f;
    f.reserve(feature_length(env.stations().size(), n_evs, program.horizon));

    const double id_scale = n_evs > 0 ? static_cast<double>(n_evs) : 1.0;
    for (int id : state.cells())
        f.push_back(static_cast<double>(id) / id_scale);

    double max_capacity = 0.0;
    for (const auto& ev : fleet)
        max_capacity = std::max(max_capacity, ev.capacity_kwh);
    for (std::size_t id = 1; id <= n_evs; ++id)
        f.push_back(env.vehicle(static_cast<int>(id)).soc);
    for (std::size_t id = 1; id <= n_evs; ++id)
        f.push_back(env.vehicle(static_cast<int>(id)).capacity_kwh / max_capacity);

    const double max_target = *std::max_element(program.target.begin(), program.target.end());
    const double energy_scale = max_target > 0.0 ? max_target : 1.0;
    for (std::size_t t = 0; t < program.horizon; ++t) {
        const double remaining = program.target[t] - state.per_slot()[t];
        f.push_back(std::clamp(remaining / energy_scale, 0.0, 1.0));
    }

    const auto cells = static_cast<double>(state.cells().size());
    const auto assigned = static_cast<double>(state.assigned_count());
    f.push_back(cells > 0 ? (cells - assigned) / cells : 0.0);
    f.push_back(n_evs > 0 ? (static_cast<double>(n_evs) - assigned) / static_cast<double>(n_evs)
                          : 0.0);
    return f;
}

NetworkConfig network_for(const Environment& env, NetworkConfig base) {
    base.input_size =
        feature_length(env.stations().size(), env.fleet().size(), env.program().horizon);
    base.output_size = env.action_count();
    return base;
}

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0)
        throw ConfigError("replay memory capacity must be >= 1");
}

void ReplayMemory::push(Transition t) {
    buffer_.push_back(std::move(t));
    if (buffer_.size() > capacity_)
        buffer_.pop_front();
}

std::optional<std::vector<const Transition*>> ReplayMemory::sample_batch(std::size_t batch_size,
                                                                         Rng& rng) const {
    if (buffer_.size() <= batch_size)
        return std::nullopt;
    // Floyd's algorithm: k distinct indices from [0, n) in O(k).
    const std::size_t n = buffer_.size();
    std::unordered_set<std::size_t> chosen;
    std::vector<const Transition*> out;
    out.reserve(batch_size);
    for (std::size_t j = n - batch_size; j < n; ++j) {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        std::size_t i = pick(rng);
        if (!chosen.insert(i).second) {
            i = j;
            chosen.insert(j);
        }
        out.push_back(&buffer_[i]);
    }
    return out;
}

std::size_t argmax(const Eigen::VectorXd& q) {
    std::size_t best = 0;
    for (Eigen::Index i = 1; i < q.size(); ++i)
        if (q(i) > q(static_cast<Eigen::Index>(best)))
            best = static_cast<std::size_t>(i);
    return best;
}

std::size_t select_action(const NetworkParams& qnet, std::span<const double> features,
                          double epsilon, Rng& rng) {
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) < epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, qnet.config.output_size - 1);
        return pick(rng);
    }
    return argmax(forward(qnet, features));
}

double reward_normalizer(const Environment& env) {
    const auto& target = env.program().target;
    const double best_gain = kRewardScale * std::accumulate(target.begin(), target.end(), 0.0);
    return best_gain > 0.0 ? best_gain : std::abs(env.max_penalty());
}

std::vector<double> compute_targets(std::span<const Transition* const> batch, double discount,
                                    const NetworkParams& target_net, double reward_scale) {
    std::vector<double> targets(batch.size());
    std::vector<std::size_t> live;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        targets[b] = reward_scale * batch[b]->reward;
        if (!batch[b]->done && discount > 0.0)
            live.push_back(b);
    }
    if (live.empty())
        return targets;
    Eigen::MatrixXd next(static_cast<Eigen::Index>(target_net.config.input_size),
                         static_cast<Eigen::Index>(live.size()));
    for (std::size_t k = 0; k < live.size(); ++k) {
        const auto& feats = batch[live[k]]->next_state_features;
        if (feats.size() != target_net.config.input_size)
            throw ShapeError("transition features do not match the network input");
        next.col(static_cast<Eigen::Index>(k)) =
            Eigen::Map<const Eigen::VectorXd>(feats.data(), static_cast<Eigen::Index>(feats.size()));
    }
    const Eigen::MatrixXd q = forward_batch(target_net, next);
    for (std::size_t k = 0; k < live.size(); ++k)
        targets[live[k]] += discount * q.col(static_cast<Eigen::Index>(k)).maxCoeff();
    return targets;
}

double decay_epsilon(double epsilon, double decay, double floor) {
    return std::max(floor, epsilon * decay);
}

std::size_t step_cap(const Environment& env) {
    return 10 * std::max<std::size_t>(env.fleet().size(), 1);
}

TrainResult train(const Environment& env, const Hyperparams& hp, const NetworkConfig& netcfg,
                  const TrainOptions& options) {
    hp.validate();
    netcfg.validate();
    const auto expected = network_for(env, netcfg);
    if (netcfg.output_size != expected.output_size)
        throw ConfigError("network output size " + std::to_string(netcfg.output_size) +
                          " does not match the action space " +
                          std::to_string(expected.output_size));
    if (netcfg.input_size != expected.input_size)
        throw ConfigError("network input size " + std::to_string(netcfg.input_size) +
                          " does not match the state encoding " +
                          std::to_string(expected.input_size));
    if (env.soc_limits().soc_min != hp.soc_min || env.soc_limits().soc_max != hp.soc_max ||
        env.soc_limits().margin != hp.soc_margin || env.max_penalty() != hp.max_penalty)
        throw ConfigError("environment SoC limits or penalty differ from the hyperparameters");
    const auto initial_state = env.reset();

    TrainResult result{init_network(netcfg, hp.rng_seed), {}, {}};
    result.target_net = copy_weights(result.qnet);
    auto& history = result.history;

    std::seed_seq seq{static_cast<std::uint32_t>(hp.rng_seed),
                      static_cast<std::uint32_t>(hp.rng_seed >> 32), 0x51ed2701u};
    Rng rng(seq);
    ReplayMemory memory(hp.memory_size);
    const std::size_t cap = step_cap(env);
    double epsilon = hp.epsilon_initial;
    const double reward_scale = 1.0 / reward_normalizer(env);

    std::vector<Sample> samples;
    samples.reserve(hp.batch_size);

    for (std::size_t episode = 0; episode < hp.epochs; ++episode) {
        ScheduleState state = initial_state;
        std::vector<double> features = encode_state(env, state);
        double episode_reward = 0.0;
        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        bool done = false;

        for (std::size_t steps = 0; !done && steps < cap; ++steps) {
            const std::size_t a = select_action(result.qnet, features, epsilon, rng);
            auto outcome = env.step(state, env.action_at(a));
            auto next_features = encode_state(env, outcome.next_state);
            episode_reward += outcome.reward;
            done = outcome.done;
            memory.push({features, a, outcome.reward, next_features, done});
            state = std::move(outcome.next_state);
            features = std::move(next_features);

            if (auto batch = memory.sample_batch(hp.batch_size, rng)) {
                const auto targets =
                    compute_targets(*batch, hp.discount, result.target_net, reward_scale);
                samples.clear();
                for (std::size_t b = 0; b < batch->size(); ++b)
                    samples.push_back({(*batch)[b]->state_features, targets[b], (*batch)[b]->action});
                const double loss =
                    backward_sgd_step(result.qnet, samples, hp.learning_rate, rng);
                history.step_losses.push_back(loss);
                loss_sum += loss;
                ++loss_count;
            }
        }

        if ((episode + 1) % hp.target_sync_every == 0) {
            result.target_net = copy_weights(result.qnet);
            ++history.target_syncs;
        }

        const double dist = env.distance(state);
        history.episode_rewards.push_back(episode_reward);
        history.episode_losses.push_back(loss_count > 0 ? loss_sum / static_cast<double>(loss_count)
                                                        : std::numeric_limits<double>::quiet_NaN());
        history.episode_epsilons.push_back(epsilon);
        history.episode_distances.push_back(dist);
        history.episode_optimal.push_back(options.optimal_distance &&
                                          dist <= *options.optimal_distance + 1e-9);
        epsilon = decay_epsilon(epsilon, hp.epsilon_decay, hp.epsilon_floor);
        if (options.on_episode)
            options.on_episode(episode, history);
    }
    return result;
}

Rollout rollout(const NetworkParams& qnet, const Environment& env, double epsilon, Rng& rng) {
    Rollout r;
    if (env.fleet().empty()) {
        r.state = ScheduleState(env.stations().size(), env.program().horizon);
        r.ledger = env.ledger(r.state);
        return r;
    }
    r.state = env.reset();
    const std::size_t cap = step_cap(env);
    bool done = false;
    while (!done && r.steps < cap) {
        const auto features = encode_state(env, r.state);
        const std::size_t a = select_action(qnet, features, epsilon, rng);
        auto outcome = env.step(r.state, env.action_at(a));
        r.total_reward += outcome.reward;
        r.final_reward = outcome.reward;
        r.final_violation = outcome.violation;
        done = outcome.done;
        r.state = std::move(outcome.next_state);
        ++r.steps;
    }
    r.truncated = !done;
    r.ledger = env.ledger(r.state);
    return r;
}

Rollout greedy_rollout(const NetworkParams& qnet, const Environment& env) {
    Rng unused(0);
    return rollout(qnet, env, 0.0, unused);
}

} // namespace evdr
