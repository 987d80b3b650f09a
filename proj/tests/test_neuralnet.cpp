#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "evdr/neuralnet.hpp"

using namespace evdr;

namespace {

NetworkConfig small_config(std::size_t in, std::vector<std::size_t> hidden, std::size_t out) {
    NetworkConfig c;
    c.input_size = in;
    c.hidden = std::move(hidden);
    c.dropout_after = {};
    c.output_size = out;
    return c;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v)
        x = u(rng);
    return v;
}

} // namespace

TEST_CASE("init_network shapes, bounds and determinism") {
    NetworkConfig cfg;
    cfg.input_size = 97;
    cfg.output_size = 1800;
    const auto p = init_network(cfg, 7);
    REQUIRE(p.layers.size() == 6);
    CHECK(p.layers[0].weights.rows() == 512);
    CHECK(p.layers[0].weights.cols() == 97);
    CHECK(p.layers[4].weights.rows() == 256);
    CHECK(p.layers[5].weights.rows() == 1800);
    for (const auto& l : p.layers) {
        CHECK(l.bias.isZero());
        const double bound = std::sqrt(6.0 / static_cast<double>(l.weights.cols()));
        CHECK(l.weights.cwiseAbs().maxCoeff() <= bound);
    }
    CHECK(init_network(cfg, 7) == p);
    CHECK_FALSE(init_network(cfg, 8) == p);
}

TEST_CASE("config validation") {
    auto c = small_config(3, {4}, 2);
    CHECK_NOTHROW(c.validate());
    c.dropout_after = {1};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(0, {4}, 2);
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config(3, {4}, 2);
    c.dropout_rate = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("forward basics") {
    auto p = init_network(small_config(3, {4, 4}, 2), 1);
    for (auto& l : p.layers)
        l.weights.setZero();
    const std::vector<double> x{1.0, -2.0, 3.0};
    CHECK(forward(p, x).isZero());

    SUBCASE("ReLU clamps a negative pre-activation") {
        auto q = init_network(small_config(1, {1}, 1), 0);
        q.layers[0].weights(0, 0) = 1.0;
        q.layers[1].weights(0, 0) = 1.0;
        const std::vector<double> neg{-5.0}, pos{5.0};
        CHECK(forward(q, neg)(0) == 0.0);
        CHECK(forward(q, pos)(0) == 5.0);
    }

    SUBCASE("eval mode is deterministic even with dropout configured") {
        auto cfg = small_config(3, {8, 8}, 2);
        cfg.dropout_after = {0, 1};
        const auto q = init_network(cfg, 4);
        CHECK(forward(q, x) == forward(q, x));
        Eigen::MatrixXd batch(3, 2);
        batch.col(0) = Eigen::Map<const Eigen::VectorXd>(x.data(), 3);
        batch.col(1) = Eigen::Map<const Eigen::VectorXd>(x.data(), 3);
        const auto fb = forward_batch(q, batch);
        CHECK((fb.col(0) - forward(q, x)).norm() < 1e-12);
        CHECK(fb.col(0) == fb.col(1));
    }

    SUBCASE("bad inputs") {
        const std::vector<double> short_x{1.0, 2.0};
        CHECK_THROWS_AS(forward(p, short_x), ShapeError);
        const std::vector<double> nan_x{1.0, std::nan(""), 0.0};
        CHECK_THROWS_AS(forward(p, nan_x), NumericError);
        const std::vector<double> inf_x{1.0, INFINITY, 0.0};
        CHECK_THROWS_AS(forward(p, inf_x), NumericError);
    }
}

TEST_CASE("mse_loss examples") {
    const std::vector<double> a{1, 2, 3}, b{1, 2, 3}, c{3, 4, 5};
    CHECK(mse_loss(a, b) == 0.0);
    CHECK(mse_loss(a, c) == doctest::Approx(4.0));
    const std::vector<double> z{0.0}, t{std::sqrt(10.0)};
    CHECK(mse_loss(z, t) == doctest::Approx(10.0));
    const std::vector<double> two{1, 2};
    CHECK_THROWS_AS(mse_loss(a, two), ShapeError);
}

TEST_CASE("analytic gradients match central differences") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> width(1, 10);
    for (int trial = 0; trial < 20; ++trial) {
        const auto cfg = small_config(width(rng), {width(rng), width(rng)}, width(rng));
        auto p = init_network(cfg, static_cast<std::uint64_t>(trial));
        for (auto& l : p.layers)
            for (Eigen::Index r = 0; r < l.bias.size(); ++r)
                l.bias(r) = 0.1 * std::uniform_real_distribution<double>(-1, 1)(rng);

        std::vector<std::vector<double>> inputs;
        std::vector<Sample> batch;
        std::uniform_int_distribution<std::size_t> act(0, cfg.output_size - 1);
        for (int s = 0; s < 20; ++s)
            inputs.push_back(random_vector(cfg.input_size, rng));
        for (const auto& in : inputs)
            batch.push_back({in, std::uniform_real_distribution<double>(-2, 2)(rng), act(rng)});

        const auto g = compute_gradients(p, batch);
        CHECK(g.loss == doctest::Approx(batch_loss(p, batch)));
        const double h = 1e-5;
        double max_err = 0.0;
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            auto probe = [&](double& param, double analytic) {
                const double saved = param;
                param = saved + h;
                const double up = batch_loss(p, batch);
                param = saved - h;
                const double down = batch_loss(p, batch);
                param = saved;
                const double numeric = (up - down) / (2 * h);
                const double denom = std::max(1e-6, std::abs(numeric) + std::abs(analytic));
                max_err = std::max(max_err, std::abs(numeric - analytic) / denom);
            };
            auto& W = p.layers[l].weights;
            for (Eigen::Index r = 0; r < W.rows(); ++r)
                for (Eigen::Index c = 0; c < W.cols(); ++c)
                    probe(W(r, c), g.layers[l].weights(r, c));
            auto& b = p.layers[l].bias;
            for (Eigen::Index r = 0; r < b.size(); ++r)
                probe(b(r), g.layers[l].bias(r));
        }
        CHECK(max_err < 1e-4);
    }
}

TEST_CASE("inverted dropout keeps the expected activation") {
    auto cfg = small_config(1, {1}, 1);
    cfg.dropout_after = {0};
    cfg.dropout_rate = 0.5;
    auto p = init_network(cfg, 0);
    p.layers[0].weights(0, 0) = 1.0;
    p.layers[1].weights(0, 0) = 1.0;
    const std::vector<double> x{2.0};
    Rng rng(5);
    const int n = 10000;
    double sum = 0.0;
    int zeros = 0;
    for (int i = 0; i < n; ++i) {
        const double y = forward_train(p, x, rng)(0);
        CHECK((y == 0.0 || y == doctest::Approx(4.0)));
        zeros += y == 0.0;
        sum += y;
    }
    // Each draw is 0 or 4 with equal odds: mean 2, sd 2.
    const double se = 2.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(sum / n - 2.0) < 3 * se);
    CHECK(zeros > 0);
}

TEST_CASE("SGD step") {
    std::mt19937_64 rng(2);
    const auto cfg = small_config(4, {6}, 3);
    std::vector<std::vector<double>> inputs;
    for (int s = 0; s < 5; ++s)
        inputs.push_back(random_vector(4, rng));
    std::vector<Sample> batch;
    for (std::size_t s = 0; s < inputs.size(); ++s)
        batch.push_back({inputs[s], 0.5 * static_cast<double>(s), s % 3});

    SUBCASE("zero learning rate leaves parameters unchanged") {
        auto p = init_network(cfg, 1);
        const auto before = p;
        Rng r(0);
        backward_sgd_step(p, batch, 0.0, r);
        CHECK(p == before);
    }

    SUBCASE("zero gradient leaves parameters unchanged") {
        auto p = init_network(cfg, 1);
        std::vector<Sample> exact;
        for (std::size_t s = 0; s < inputs.size(); ++s)
            exact.push_back({inputs[s], forward(p, inputs[s])(static_cast<Eigen::Index>(s % 3)), s % 3});
        const auto before = p;
        Rng r(0);
        CHECK(backward_sgd_step(p, exact, 0.1, r) == doctest::Approx(0.0));
        CHECK(p == before);
    }

    SUBCASE("empty batch and bad action") {
        auto p = init_network(cfg, 1);
        Rng r(0);
        CHECK_THROWS_AS(backward_sgd_step(p, std::span<const Sample>{}, 0.1, r), ArgumentError);
        std::vector<Sample> bad{{inputs[0], 1.0, 3}};
        CHECK_THROWS_AS(backward_sgd_step(p, bad, 0.1, r), RangeError);
    }

    SUBCASE("a small step reduces the loss") {
        int decreased = 0;
        for (int trial = 0; trial < 100; ++trial) {
            auto p = init_network(cfg, static_cast<std::uint64_t>(trial));
            const double before = batch_loss(p, batch);
            Rng r(static_cast<std::uint64_t>(trial));
            CHECK(backward_sgd_step(p, batch, 1e-3, r) == doctest::Approx(before));
            decreased += batch_loss(p, batch) < before;
            CHECK(p.all_finite());
        }
        CHECK(decreased == 100);
    }

    SUBCASE("copy_weights is an independent deep copy") {
        auto p = init_network(cfg, 1);
        auto q = copy_weights(p);
        CHECK(q == p);
        Rng r(0);
        backward_sgd_step(p, batch, 0.01, r);
        CHECK_FALSE(q == p);
    }
}

TEST_CASE("parameters stay finite under repeated large targets") {
    auto cfg = small_config(3, {16, 16}, 4);
    cfg.dropout_after = {0};
    auto p = init_network(cfg, 3);
    std::mt19937_64 rng(9);
    std::vector<std::vector<double>> inputs;
    for (int s = 0; s < 8; ++s)
        inputs.push_back(random_vector(3, rng));
    std::vector<Sample> batch;
    for (std::size_t s = 0; s < inputs.size(); ++s)
        batch.push_back({inputs[s], -1e5, s % 4});
    Rng r(1);
    for (int i = 0; i < 200; ++i)
        backward_sgd_step(p, batch, 1e-3, r);
    CHECK(p.all_finite());
}
