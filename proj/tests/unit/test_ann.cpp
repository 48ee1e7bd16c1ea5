#include "aircast/ann.hpp"
#include "aircast/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace aircast;
using namespace aircast::ann;

namespace {

MlpForecaster tiny(std::size_t window, Activation hidden_activation) {
    MlpForecaster net;
    net.window = window;
    Layer hidden;
    hidden.weights = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(window));
    hidden.bias = Eigen::VectorXd::Zero(1);
    hidden.activation = hidden_activation;
    Layer out;
    out.weights = Eigen::MatrixXd::Ones(1, 1);
    out.bias = Eigen::VectorXd::Zero(1);
    out.activation = Activation::Identity;
    net.layers = {hidden, out};
    return net;
}

std::vector<Sample> random_batch(std::size_t window, std::size_t count, std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Sample> batch(count);
    for (Sample& s : batch) {
        s.input.resize(window);
        for (double& v : s.input) {
            v = z(rng);
        }
        s.target = z(rng);
    }
    return batch;
}

std::vector<double> finite_difference(MlpForecaster net, std::span<const Sample> batch, double l2) {
    constexpr double kStep = 1e-5;
    std::vector<double> params = net.flatten();
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + kStep;
        net.assign(params);
        const double up = loss(net, batch, l2);
        params[i] = keep - kStep;
        net.assign(params);
        const double down = loss(net, batch, l2);
        params[i] = keep;
        out[i] = (up - down) / (2.0 * kStep);
    }
    return out;
}

double worst_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

std::vector<double> ramp(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = 10.0 + 0.5 * static_cast<double>(i);
    }
    return v;
}

} // namespace

TEST_CASE("activation functions") {
    CHECK(activate(Activation::Logistic, 0.0) == 0.5);
    CHECK(activate(Activation::Tanh, 0.0) == 0.0);
    CHECK(activate(Activation::Relu, -2.0) == 0.0);
    CHECK(activate(Activation::Relu, 3.0) == 3.0);
    CHECK(activate(Activation::Identity, -4.25) == -4.25);
    CHECK(activate_derivative(Activation::Relu, 0.0) == 0.0);
    CHECK(activate(Activation::Logistic, -800.0) == 0.0);
    CHECK(activate(Activation::Logistic, 800.0) == 1.0);
    for (double x = -30.0; x <= 30.0; x += 0.25) {
        const double s = activate(Activation::Logistic, x);
        CHECK((s > 0.0 && s < 1.0));
        const double t = activate(Activation::Tanh, x / 8.0);
        CHECK((t > -1.0 && t < 1.0));
        CHECK(activate(Activation::Relu, x) >= 0.0);
        CHECK(activate_derivative(Activation::Logistic, x) == doctest::Approx(s * (1.0 - s)).epsilon(1e-12));
    }
    for (const Activation a : {Activation::Logistic, Activation::Tanh, Activation::Relu, Activation::Identity}) {
        CHECK(parse_activation(to_string(a)) == a);
    }
    CHECK_FALSE(parse_activation("softmax").has_value());
}

TEST_CASE("make_windows") {
    const auto w = make_windows(std::vector<double>{1, 2, 3, 4}, 2);
    REQUIRE(w.size() == 2);
    CHECK(w[0].input == std::vector<double>{1, 2});
    CHECK(w[0].target == 3.0);
    CHECK(w[1].input == std::vector<double>{2, 3});
    CHECK(w[1].target == 4.0);
    CHECK(make_windows(std::vector<double>{1, 2, 3}, 2).size() == 1);
    const auto one = make_windows(std::vector<double>{5, 6}, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].input == std::vector<double>{5});
    CHECK(one[0].target == 6.0);
    CHECK_THROWS_AS(make_windows(std::vector<double>{1, 2}, 2), TooShort);
}

TEST_CASE("forward examples") {
    SUBCASE("zero network") {
        MlpForecaster net = tiny(3, Activation::Tanh);
        net.layers[1].weights.setZero();
        CHECK(forward(net, std::vector<double>{4.0, -2.0, 9.0}) == 0.0);
    }
    SUBCASE("affine unit") {
        MlpForecaster net = tiny(1, Activation::Identity);
        net.layers[0].weights(0, 0) = 2.0;
        net.layers[0].bias(0) = 1.0;
        CHECK(forward(net, std::vector<double>{3.0}) == 7.0);
    }
    SUBCASE("logistic unit at zero") {
        MlpForecaster net = tiny(2, Activation::Logistic);
        CHECK(forward(net, std::vector<double>{8.0, -1.0}) == 0.5);
    }
    SUBCASE("scaler maps in and out") {
        MlpForecaster net = tiny(1, Activation::Identity);
        net.layers[0].weights(0, 0) = 1.0;
        net.scaler = {10.0, 2.0};
        CHECK(forward(net, std::vector<double>{14.0}) == doctest::Approx(14.0).epsilon(1e-15));
    }
    SUBCASE("wrong input length") {
        CHECK_THROWS_AS(forward(tiny(3, Activation::Tanh), std::vector<double>{1.0}), DimensionError);
    }
    SUBCASE("pure and repeatable") {
        const MlpForecaster net = make_network(5, std::vector<std::size_t>{8, 4}, Activation::Tanh, {}, 3);
        const std::vector<double> x{0.1, -0.4, 2.0, 0.0, 1.5};
        CHECK(forward(net, x) == forward(net, x));
    }
}

TEST_CASE("network structure") {
    const MlpForecaster net = make_network(7, std::vector<std::size_t>{16}, Activation::Tanh, {}, 1);
    CHECK(net.layer_sizes() == std::vector<std::size_t>{7, 16, 1});
    CHECK(net.hidden_activation() == Activation::Tanh);
    CHECK(net.parameter_count() == 7 * 16 + 16 + 16 + 1);
    CHECK(net.layers[0].bias.isZero());
    const double limit = std::sqrt(6.0 / (7.0 + 16.0));
    CHECK(net.layers[0].weights.cwiseAbs().maxCoeff() <= limit);
    MlpForecaster broken = net;
    broken.scaler.scale = 0.0;
    CHECK_THROWS_AS(broken.validate(), DimensionError);
    broken = net;
    broken.layers[1].weights = Eigen::MatrixXd::Zero(1, 3);
    CHECK_THROWS_AS(broken.validate(), DimensionError);
    CHECK_THROWS_AS(make_network(0, std::vector<std::size_t>{4}, Activation::Tanh, {}, 1), DimensionError);
}

TEST_CASE("flatten and assign are inverse") {
    MlpForecaster net = make_network(4, std::vector<std::size_t>{5, 3}, Activation::Logistic, {}, 8);
    const std::vector<double> p = net.flatten();
    CHECK(p.size() == net.parameter_count());
    std::vector<double> q = p;
    for (double& v : q) {
        v *= -1.5;
    }
    net.assign(q);
    CHECK(net.flatten() == q);
    CHECK_THROWS_AS(net.assign(std::vector<double>(3, 0.0)), DimensionError);
}

TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 12; ++rep) {
        const Activation act = rep % 2 == 0 ? Activation::Tanh : Activation::Logistic;
        const std::size_t window = 1 + rep % 5;
        const std::vector<std::size_t> hidden = rep % 3 == 0 ? std::vector<std::size_t>{6, 3} : std::vector<std::size_t>{5};
        const MlpForecaster net = make_network(window, hidden, act, {1.0, 2.0}, 1000 + rep);
        const auto batch = random_batch(window, 9, rng);
        const double l2 = rep % 4 == 0 ? 0.01 : 0.0;
        const std::vector<double> analytic = gradient(net, batch, l2).flatten();
        const std::vector<double> numeric = finite_difference(net, batch, l2);
        REQUIRE(analytic.size() == numeric.size());
        CHECK(worst_relative_error(analytic, numeric) < 1e-4);
    }
}

TEST_CASE("gradient examples") {
    SUBCASE("perfect fit has zero gradient") {
        const MlpForecaster net = make_network(3, std::vector<std::size_t>{4}, Activation::Tanh, {}, 5);
        std::mt19937_64 rng(6);
        auto batch = random_batch(3, 7, rng);
        for (Sample& s : batch) {
            s.target = forward(net, s.input);
        }
        CHECK(loss(net, batch, 0.0) == 0.0);
        for (const double g : gradient(net, batch, 0.0).flatten()) {
            CHECK(g == 0.0);
        }
    }
    SUBCASE("doubling residuals doubles the output bias gradient") {
        const MlpForecaster net = make_network(3, std::vector<std::size_t>{4}, Activation::Tanh, {2.0, 3.0}, 5);
        std::mt19937_64 rng(7);
        auto batch = random_batch(3, 7, rng);
        auto doubled = batch;
        for (Sample& s : doubled) {
            const double p = forward(net, s.input);
            s.target = p + 2.0 * (s.target - p);
        }
        const double g1 = gradient(net, batch, 0.0).bias.back()(0);
        const double g2 = gradient(net, doubled, 0.0).bias.back()(0);
        CHECK(g2 == doctest::Approx(2.0 * g1).epsilon(1e-10));
    }
    SUBCASE("empty batch") {
        const MlpForecaster net = make_network(3, std::vector<std::size_t>{4}, Activation::Tanh, {}, 5);
        CHECK_THROWS_AS(gradient(net, std::vector<Sample>{}, 0.0), EmptyInput);
    }
}

TEST_CASE("training") {
    const std::vector<std::size_t> hidden{kDefaultHidden};
    SUBCASE("constant series") {
        const std::vector<double> y(60, 37.5);
        const TrainResult r = train(y, 5, hidden, Activation::Tanh, {});
        for (const Sample& s : make_windows(y, 5)) {
            CHECK(std::abs(forward(r.net, s.input) - 37.5) < 0.01 * 37.5);
        }
    }
    SUBCASE("linear ramp with identity activation") {
        const std::vector<double> y = ramp(100);
        const double range = y.back() - y.front();
        TrainConfig cfg;
        cfg.epochs = 400;
        const TrainResult r = train(y, 2, hidden, Activation::Identity, cfg);
        for (const Sample& s : make_windows(y, 2)) {
            CHECK(std::abs(forward(r.net, s.input) - s.target) < 0.02 * range);
        }
        const auto f = forecast_recursive(r.net, y, 3);
        for (std::size_t h = 0; h < 3; ++h) {
            const double truth = y.back() + 0.5 * static_cast<double>(h + 1);
            CHECK(std::abs(f[h] - truth) < 0.05 * range);
        }
    }
    SUBCASE("deterministic per seed") {
        const std::vector<double> y = ramp(50);
        TrainConfig cfg;
        cfg.epochs = 30;
        const TrainResult a = train(y, 4, hidden, Activation::Tanh, cfg);
        const TrainResult b = train(y, 4, hidden, Activation::Tanh, cfg);
        CHECK(a.net == b.net);
        CHECK(a.net.flatten() == b.net.flatten());
        cfg.seed = 43;
        CHECK_FALSE(train(y, 4, hidden, Activation::Tanh, cfg).net == a.net);
    }
    SUBCASE("best loss never exceeds the initial loss") {
        std::mt19937_64 rng(12);
        std::normal_distribution<double> z(20.0, 5.0);
        for (int rep = 0; rep < 5; ++rep) {
            std::vector<double> y(80);
            for (double& v : y) {
                v = z(rng);
            }
            TrainConfig cfg;
            cfg.epochs = 20;
            cfg.seed = static_cast<std::uint64_t>(rep);
            cfg.learning_rate = rep == 4 ? 0.3 : 0.05;
            const TrainResult r = train(y, 7, hidden, Activation::Relu, cfg);
            CHECK(r.best_loss <= r.initial_loss);
            CHECK(loss(r.net, make_windows(std::span<const double>(y), 7), 0.0) == r.best_loss);
            CHECK(r.epoch_losses.size() == 20);
        }
    }
    SUBCASE("divergence is reported") {
        std::vector<double> y(80);
        for (std::size_t i = 0; i < y.size(); ++i) {
            y[i] = i % 2 == 0 ? 0.0 : 100.0;
        }
        TrainConfig cfg;
        cfg.learning_rate = 1.0;
        cfg.batch_size = 1;
        cfg.scaler = Scaler{0.0, 0.01};
        CHECK_THROWS_AS(train(y, 7, hidden, Activation::Identity, cfg), DivergenceError);
    }
    SUBCASE("invalid configuration") {
        TrainConfig cfg;
        cfg.learning_rate = 0.0;
        CHECK_THROWS_AS(cfg.validate(), PreconditionError);
        cfg = {};
        cfg.learning_rate = 1.5;
        CHECK_THROWS_AS(cfg.validate(), PreconditionError);
        cfg = {};
        cfg.epochs = 0;
        CHECK_THROWS_AS(cfg.validate(), PreconditionError);
        CHECK_THROWS_AS(train(std::vector<double>{1, 2, 3}, 7, hidden, Activation::Tanh, {}), TooShort);
    }
}

TEST_CASE("input scaling invariance") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z(45.0, 12.0);
    std::vector<double> y(120);
    for (double& v : y) {
        v = z(rng);
    }
    const Scaler s{41.0, 9.5};
    std::vector<double> scaled(y.size());
    std::transform(y.begin(), y.end(), scaled.begin(), [&](double v) { return (v - s.shift) / s.scale; });

    TrainConfig raw_cfg;
    raw_cfg.epochs = 25;
    raw_cfg.scaler = s;
    TrainConfig unit_cfg = raw_cfg;
    unit_cfg.scaler = Scaler{0.0, 1.0};
    const std::vector<std::size_t> hidden{8};
    const TrainResult raw = train(y, 7, hidden, Activation::Tanh, raw_cfg);
    const TrainResult unit = train(scaled, 7, hidden, Activation::Tanh, unit_cfg);
    const auto raw_windows = make_windows(std::span<const double>(y), 7);
    const auto unit_windows = make_windows(std::span<const double>(scaled), 7);
    for (std::size_t i = 0; i < raw_windows.size(); ++i) {
        const double a = forward(raw.net, raw_windows[i].input);
        const double b = s.shift + s.scale * forward(unit.net, unit_windows[i].input);
        CHECK(std::abs(a - b) < 1e-6);
    }
}

TEST_CASE("forecast_recursive") {
    SUBCASE("constant output") {
        MlpForecaster net = tiny(3, Activation::Tanh);
        net.layers[1].weights.setZero();
        net.layers[1].bias(0) = 6.25;
        CHECK(forecast_recursive(net, std::vector<double>{1, 2, 3, 4}, 5) == std::vector<double>(5, 6.25));
    }
    SUBCASE("last-lag network is a fixed point") {
        MlpForecaster net = tiny(3, Activation::Identity);
        net.layers[0].weights(0, 2) = 1.0;
        CHECK(forecast_recursive(net, std::vector<double>{1, 2, 3, 4}, 4) == std::vector<double>(4, 4.0));
    }
    SUBCASE("feeds predictions back in") {
        MlpForecaster net = tiny(2, Activation::Identity);
        net.layers[0].weights(0, 0) = 1.0;
        net.layers[0].weights(0, 1) = 1.0;
        CHECK(forecast_recursive(net, std::vector<double>{1, 1}, 4) == std::vector<double>{2, 3, 5, 8});
    }
    CHECK(forecast_recursive(tiny(2, Activation::Tanh), std::vector<double>{1, 1}, 0).empty());
    CHECK_THROWS_AS(forecast_recursive(tiny(3, Activation::Tanh), std::vector<double>{1, 1}, 2), TooShort);
}

TEST_CASE("model JSON round trip is bitwise") {
    const std::vector<double> y = ramp(40);
    TrainConfig cfg;
    cfg.epochs = 10;
    const MlpForecaster net = train(y, 5, std::vector<std::size_t>{6, 3}, Activation::Logistic, cfg).net;
    const nlohmann::json j = net;
    const MlpForecaster back = nlohmann::json::parse(j.dump()).get<MlpForecaster>();
    CHECK(back == net);
    CHECK(back.flatten() == net.flatten());
    nlohmann::json broken = j;
    broken["hidden_activation"] = "softmax";
    CHECK_THROWS_AS(broken.get<MlpForecaster>(), SchemaError);
}
