#include "evdr/neuralnet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace evdr {

void NetworkConfig::validate() const {
    if (input_size == 0 || output_size == 0)
        throw ConfigError("network input and output sizes must be >= 1");
    for (auto w : hidden)
        if (w == 0)
            throw ConfigError("hidden layer widths must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
        throw ConfigError("dropout rate must lie in [0, 1)");
    for (auto i : dropout_after)
        if (i >= hidden.size())
            throw ConfigError("dropout index " + std::to_string(i) + " has no hidden layer");
}

bool NetworkParams::all_finite() const {
    return std::all_of(layers.begin(), layers.end(), [](const DenseLayer& l) {
        return l.weights.allFinite() && l.bias.allFinite();
    });
}

std::size_t NetworkParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
        n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

NetworkParams init_network(const NetworkConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    NetworkParams p{config, {}};
    std::size_t fan_in = config.input_size;
    auto add_layer = [&](std::size_t fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        DenseLayer layer{Eigen::MatrixXd(fan_out, fan_in), Eigen::VectorXd::Zero(fan_out)};
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                layer.weights(r, c) = dist(rng);
        p.layers.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (auto w : config.hidden)
        add_layer(w);
    add_layer(config.output_size);
    return p;
}

namespace {

bool has_dropout(const NetworkConfig& c, std::size_t layer) {
    return c.dropout_rate > 0.0 &&
           std::find(c.dropout_after.begin(), c.dropout_after.end(), layer) != c.dropout_after.end();
}

void check_input(const NetworkParams& params, std::span<const double> input) {
    if (input.size() != params.config.input_size)
        throw ShapeError("input has " + std::to_string(input.size()) + " features, network expects " +
                         std::to_string(params.config.input_size));
    for (double x : input)
        if (!std::isfinite(x))
            throw NumericError("non-finite network input");
}

// Activations of one batched pass, columns are samples.
struct Trace {
    std::vector<Eigen::MatrixXd> activations; // [0] = input, then one per layer
    std::vector<Eigen::MatrixXd> masks;       // scaled keep-mask per hidden layer, empty if none
};

Trace run(const NetworkParams& params, Eigen::MatrixXd input, Rng* rng) {
    const auto& cfg = params.config;
    const std::size_t n_hidden = cfg.hidden.size();
    Trace tr;
    tr.activations.reserve(params.layers.size() + 1);
    tr.masks.resize(n_hidden);
    tr.activations.push_back(std::move(input));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        Eigen::MatrixXd z = layer.weights * tr.activations.back();
        z.colwise() += layer.bias;
        if (l < n_hidden) {
            z = z.cwiseMax(0.0);
            if (rng && has_dropout(cfg, l)) {
                const double keep = 1.0 - cfg.dropout_rate;
                std::bernoulli_distribution coin(keep);
                Eigen::MatrixXd mask(z.rows(), z.cols());
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    for (Eigen::Index r = 0; r < mask.rows(); ++r)
                        mask(r, c) = coin(*rng) ? 1.0 / keep : 0.0;
                z = z.cwiseProduct(mask);
                tr.masks[l] = std::move(mask);
            }
        }
        tr.activations.push_back(std::move(z));
    }
    return tr;
}

Eigen::MatrixXd stack_inputs(const NetworkParams& params, std::span<const Sample> batch) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(params.config.input_size),
                      static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        check_input(params, batch[b].input);
        if (batch[b].action >= params.config.output_size)
            throw RangeError("sample action index out of range");
        x.col(static_cast<Eigen::Index>(b)) =
            Eigen::Map<const Eigen::VectorXd>(batch[b].input.data(),
                                              static_cast<Eigen::Index>(batch[b].input.size()));
    }
    return x;
}

double loss_of(const Eigen::MatrixXd& q, std::span<const Sample> batch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const double d = q(static_cast<Eigen::Index>(batch[b].action), static_cast<Eigen::Index>(b)) -
                         batch[b].target;
        sum += d * d;
    }
    return sum / static_cast<double>(batch.size());
}

} // namespace

Eigen::VectorXd forward(const NetworkParams& params, std::span<const double> input) {
    check_input(params, input);
    Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(),
                                                          static_cast<Eigen::Index>(input.size()));
    return run(params, std::move(x), nullptr).activations.back().col(0);
}

Eigen::MatrixXd forward_batch(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
    if (inputs.rows() != static_cast<Eigen::Index>(params.config.input_size))
        throw ShapeError("input has " + std::to_string(inputs.rows()) + " features, network expects " +
                         std::to_string(params.config.input_size));
    if (!inputs.allFinite())
        throw NumericError("non-finite network input");
    return std::move(run(params, inputs, nullptr).activations.back());
}

Eigen::VectorXd forward_train(const NetworkParams& params, std::span<const double> input, Rng& rng) {
    check_input(params, input);
    Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(),
                                                          static_cast<Eigen::Index>(input.size()));
    return run(params, std::move(x), &rng).activations.back().col(0);
}

double mse_loss(std::span<const double> pred, std::span<const double> target) {
    if (pred.size() != target.size() || pred.empty())
        throw ShapeError("mse_loss needs two vectors of equal nonzero length");
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        sum += (pred[i] - target[i]) * (pred[i] - target[i]);
    return sum / static_cast<double>(pred.size());
}

double batch_loss(const NetworkParams& params, std::span<const Sample> batch) {
    if (batch.empty())
        throw ArgumentError("empty batch");
    const auto tr = run(params, stack_inputs(params, batch), nullptr);
    return loss_of(tr.activations.back(), batch);
}

Gradients compute_gradients(const NetworkParams& params, std::span<const Sample> batch, Rng* rng) {
    if (batch.empty())
        throw ArgumentError("empty batch");
    const auto tr = run(params, stack_inputs(params, batch), rng);
    const auto& q = tr.activations.back();
    const double scale = 2.0 / static_cast<double>(batch.size());

    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(q.rows(), q.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto a = static_cast<Eigen::Index>(batch[b].action);
        const auto col = static_cast<Eigen::Index>(b);
        delta(a, col) = scale * (q(a, col) - batch[b].target);
    }

    Gradients g;
    g.loss = loss_of(q, batch);
    g.layers.resize(params.layers.size());
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        g.layers[l].weights = delta * tr.activations[l].transpose();
        g.layers[l].bias = delta.rowwise().sum();
        if (l == 0)
            break;
        // Back through the hidden layer that produced activations[l].
        Eigen::MatrixXd upstream = params.layers[l].weights.transpose() * delta;
        const auto& h = tr.activations[l];
        if (tr.masks[l - 1].size() != 0)
            upstream = upstream.cwiseProduct(tr.masks[l - 1]);
        // h > 0 exactly where the pre-activation was positive and the unit was kept.
        delta = upstream.cwiseProduct((h.array() > 0.0).cast<double>().matrix());
    }
    return g;
}

double backward_sgd_step(NetworkParams& params, std::span<const Sample> batch,
                         double learning_rate, Rng& rng) {
    const auto g = compute_gradients(params, batch, &rng);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        params.layers[l].weights -= learning_rate * g.layers[l].weights.cwiseMax(-1.0).cwiseMin(1.0);
        params.layers[l].bias -= learning_rate * g.layers[l].bias.cwiseMax(-1.0).cwiseMin(1.0);
    }
    if (!params.all_finite())
        throw NumericError("network parameters became non-finite");
    return g.loss;
}

} // namespace evdr
