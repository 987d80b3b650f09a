#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "evdr/error.hpp"

namespace evdr {

using Rng = std::mt19937_64;

struct NetworkConfig {
    std::size_t input_size = 0;
    std::vector<std::size_t> hidden{512, 512, 512, 512, 256};
    double dropout_rate = 0.5;
    std::vector<std::size_t> dropout_after{1, 3}; // zero-based hidden layer indices
    std::size_t output_size = 0;

    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

struct DenseLayer {
    Eigen::MatrixXd weights; // fan_out x fan_in
    Eigen::VectorXd bias;

    bool operator==(const DenseLayer& o) const { return weights == o.weights && bias == o.bias; }
};

// Weights of a ReLU multilayer perceptron with a linear output layer.
struct NetworkParams {
    NetworkConfig config;
    std::vector<DenseLayer> layers; // hidden layers followed by the output layer

    bool all_finite() const;
    std::size_t parameter_count() const;
    bool operator==(const NetworkParams&) const = default;
};

// Uniform weights in +-sqrt(6 / fan_in), zero biases.
NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed);

// Deterministic pass: no dropout, no scaling.
Eigen::VectorXd forward(const NetworkParams& params, std::span<const double> input);

// Eval-mode pass over a batch; columns are samples.
Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs);

// Training pass: inverted dropout after the configured hidden layers.
Eigen::VectorXd forward_train(const NetworkParams& params, std::span<const double> input, Rng& rng);

double mse_loss(std::span<const double> pred, std::span<const double> target);

// One regression example: push Q(input)[action] toward target.
struct Sample {
    std::span<const double> input;
    double target = 0.0;
    std::size_t action = 0;
};

struct Gradients {
    std::vector<DenseLayer> layers; // same shapes as NetworkParams::layers
    double loss = 0.0;
};

// Loss = mean over the batch of (target - Q(input)[action])^2, and its exact
// gradient. With rng, dropout masks are drawn once and shared by both passes;
// without, the network runs in eval mode.
Gradients compute_gradients(const NetworkParams& params, std::span<const Sample> batch,
                            Rng* rng = nullptr);

// Eval-mode value of the loss above.
double batch_loss(const NetworkParams& params, std::span<const Sample> batch);

// Plain SGD with each gradient component clipped to [-1, 1]. Returns the loss
// before the update.
double backward_sgd_step(NetworkParams& params, std::span<const Sample> batch,
                         double learning_rate, Rng& rng);

inline NetworkParams copy_weights(const NetworkParams& src) { return src; }

} // namespace evdr
