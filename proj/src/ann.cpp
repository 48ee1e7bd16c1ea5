#include "aircast/ann.hpp"

#include "aircast/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace aircast::ann {

namespace {

Eigen::VectorXd apply(Activation a, const Eigen::VectorXd& z) {
    return z.unaryExpr([a](double x) { return activate(a, x); });
}

Eigen::VectorXd apply_derivative(Activation a, const Eigen::VectorXd& z) {
    return z.unaryExpr([a](double x) { return activate_derivative(a, x); });
}

Eigen::VectorXd scaled_input(const MlpForecaster& net, std::span<const double> input) {
    if (input.size() != net.window) {
        throw DimensionError("network expects " + std::to_string(net.window) + " inputs, got " +
                             std::to_string(input.size()));
    }
    Eigen::VectorXd x(static_cast<Eigen::Index>(input.size()));
    for (std::size_t i = 0; i < input.size(); ++i) {
        x(static_cast<Eigen::Index>(i)) = (input[i] - net.scaler.shift) / net.scaler.scale;
    }
    return x;
}

// Network output in scaled units.
double forward_scaled(const MlpForecaster& net, Eigen::VectorXd a) {
    for (const Layer& layer : net.layers) {
        a = apply(layer.activation, layer.weights * a + layer.bias);
    }
    return a(0);
}

double sum_squared_weights(const MlpForecaster& net) {
    double s = 0.0;
    for (const Layer& layer : net.layers) {
        s += layer.weights.squaredNorm();
    }
    return s;
}

} // namespace

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::Logistic:
        return "logistic";
    case Activation::Tanh:
        return "tanh";
    case Activation::Relu:
        return "relu";
    case Activation::Identity:
        return "identity";
    }
    return "identity";
}

std::optional<Activation> parse_activation(std::string_view text) {
    for (const Activation a : {Activation::Logistic, Activation::Tanh, Activation::Relu, Activation::Identity}) {
        if (text == to_string(a)) {
            return a;
        }
    }
    return std::nullopt;
}

double activate(Activation a, double x) {
    switch (a) {
    case Activation::Logistic:
        if (x >= 0.0) {
            return 1.0 / (1.0 + std::exp(-x));
        } else {
            const double e = std::exp(x);
            return e / (1.0 + e);
        }
    case Activation::Tanh:
        return std::tanh(x);
    case Activation::Relu:
        return x > 0.0 ? x : 0.0;
    case Activation::Identity:
        return x;
    }
    return x;
}

double activate_derivative(Activation a, double x) {
    switch (a) {
    case Activation::Logistic: {
        const double s = activate(Activation::Logistic, x);
        return s * (1.0 - s);
    }
    case Activation::Tanh: {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    case Activation::Relu:
        return x > 0.0 ? 1.0 : 0.0;
    case Activation::Identity:
        return 1.0;
    }
    return 1.0;
}

std::vector<std::size_t> MlpForecaster::layer_sizes() const {
    std::vector<std::size_t> sizes{window};
    for (const Layer& layer : layers) {
        sizes.push_back(static_cast<std::size_t>(layer.weights.rows()));
    }
    return sizes;
}

Activation MlpForecaster::hidden_activation() const {
    return layers.size() > 1 ? layers.front().activation : Activation::Identity;
}

void MlpForecaster::validate() const {
    if (layers.empty()) {
        throw DimensionError("network has no layers");
    }
    std::size_t fan_in = window;
    for (const Layer& layer : layers) {
        if (static_cast<std::size_t>(layer.weights.cols()) != fan_in || layer.bias.size() != layer.weights.rows() ||
            layer.weights.rows() == 0) {
            throw DimensionError("layer shapes do not chain");
        }
        fan_in = static_cast<std::size_t>(layer.weights.rows());
    }
    if (fan_in != 1) {
        throw DimensionError("output layer must have a single unit");
    }
    if (!(scaler.scale > 0.0) || !std::isfinite(scaler.scale) || !std::isfinite(scaler.shift)) {
        throw DimensionError("scaler scale must be positive and finite");
    }
}

std::size_t MlpForecaster::parameter_count() const {
    std::size_t n = 0;
    for (const Layer& layer : layers) {
        n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
    }
    return n;
}

// Per layer: weights row-major, then biases.
std::vector<double> MlpForecaster::flatten() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const Layer& layer : layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                out.push_back(layer.weights(r, c));
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            out.push_back(layer.bias(r));
        }
    }
    return out;
}

void MlpForecaster::assign(std::span<const double> params) {
    if (params.size() != parameter_count()) {
        throw DimensionError("parameter vector has the wrong length");
    }
    std::size_t k = 0;
    for (Layer& layer : layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = params[k++];
            }
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            layer.bias(r) = params[k++];
        }
    }
}

bool operator==(const MlpForecaster& a, const MlpForecaster& b) {
    if (a.window != b.window || !(a.scaler == b.scaler) || a.layers.size() != b.layers.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const Layer& la = a.layers[i];
        const Layer& lb = b.layers[i];
        if (la.activation != lb.activation || la.weights.rows() != lb.weights.rows() ||
            la.weights.cols() != lb.weights.cols() || la.weights != lb.weights || la.bias != lb.bias) {
            return false;
        }
    }
    return true;
}

void to_json(nlohmann::json& j, const MlpForecaster& net) {
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (const Layer& layer : net.layers) {
        std::vector<double> w;
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                w.push_back(layer.weights(r, c));
            }
        }
        weights.push_back(std::move(w));
        biases.push_back(std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size()));
    }
    j = nlohmann::json{{"model", "ann"},
                       {"window", net.window},
                       {"layer_sizes", net.layer_sizes()},
                       {"hidden_activation", to_string(net.hidden_activation())},
                       {"output_activation", to_string(Activation::Identity)},
                       {"scaler", {{"shift", net.scaler.shift}, {"scale", net.scaler.scale}}},
                       {"weights", std::move(weights)},
                       {"biases", std::move(biases)}};
}

void from_json(const nlohmann::json& j, MlpForecaster& net) {
    const auto sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const auto hidden = parse_activation(j.at("hidden_activation").get<std::string>());
    if (!hidden || sizes.size() < 2) {
        throw SchemaError("malformed network description");
    }
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1) {
        throw SchemaError("network layer count does not match layer_sizes");
    }
    net = MlpForecaster{};
    net.window = j.at("window").get<std::size_t>();
    net.scaler = {j.at("scaler").at("shift").get<double>(), j.at("scaler").at("scale").get<double>()};
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const auto w = weights[l].get<std::vector<double>>();
        const auto b = biases[l].get<std::vector<double>>();
        const auto rows = static_cast<Eigen::Index>(sizes[l + 1]);
        const auto cols = static_cast<Eigen::Index>(sizes[l]);
        if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows) {
            throw SchemaError("network weight block has the wrong size");
        }
        Layer layer;
        layer.weights = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            w.data(), rows, cols);
        layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
        layer.activation = l + 2 < sizes.size() ? *hidden : Activation::Identity;
        net.layers.push_back(std::move(layer));
    }
    try {
        net.validate();
    } catch (const DimensionError& e) {
        throw SchemaError(e.what());
    }
}

std::vector<Sample> make_windows(std::span<const double> values, std::size_t window) {
    if (window == 0) {
        throw DimensionError("window must be at least 1");
    }
    if (values.size() < window + 1) {
        throw TooShort("need at least " + std::to_string(window + 1) + " values for window " +
                       std::to_string(window));
    }
    std::vector<Sample> out;
    out.reserve(values.size() - window);
    for (std::size_t t = window; t < values.size(); ++t) {
        out.push_back({std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(t - window),
                                           values.begin() + static_cast<std::ptrdiff_t>(t)),
                       values[t]});
    }
    return out;
}

std::vector<Sample> make_windows(const TimeSeries& series, std::size_t window) {
    return make_windows(series.values(), window);
}

MlpForecaster make_network(std::size_t window, std::span<const std::size_t> hidden, Activation activation,
                           Scaler scaler, std::uint64_t seed) {
    if (window == 0 || hidden.empty() || std::find(hidden.begin(), hidden.end(), 0u) != hidden.end()) {
        throw DimensionError("network needs a positive window and at least one non-empty hidden layer");
    }
    std::mt19937_64 rng(seed);
    MlpForecaster net;
    net.window = window;
    net.scaler = scaler;
    std::vector<std::size_t> sizes{window};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
        std::uniform_real_distribution<double> init(-limit, limit);
        Layer layer;
        layer.weights.resize(static_cast<Eigen::Index>(sizes[l + 1]), static_cast<Eigen::Index>(sizes[l]));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                layer.weights(r, c) = init(rng);
            }
        }
        layer.bias = Eigen::VectorXd::Zero(layer.weights.rows());
        layer.activation = l + 2 < sizes.size() ? activation : Activation::Identity;
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

double forward(const MlpForecaster& net, std::span<const double> input) {
    return forward_scaled(net, scaled_input(net, input)) * net.scaler.scale + net.scaler.shift;
}

double loss(const MlpForecaster& net, std::span<const Sample> batch, double l2) {
    if (batch.empty()) {
        throw EmptyInput("loss of an empty batch");
    }
    double sum = 0.0;
    for (const Sample& s : batch) {
        const double target = (s.target - net.scaler.shift) / net.scaler.scale;
        const double r = forward_scaled(net, scaled_input(net, s.input)) - target;
        sum += r * r;
    }
    return sum / static_cast<double>(batch.size()) + l2 * sum_squared_weights(net);
}

Gradient gradient(const MlpForecaster& net, std::span<const Sample> batch, double l2) {
    if (batch.empty()) {
        throw EmptyInput("gradient of an empty batch");
    }
    const std::size_t depth = net.layers.size();
    Gradient g;
    for (const Layer& layer : net.layers) {
        g.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    std::vector<Eigen::VectorXd> activations(depth + 1);
    std::vector<Eigen::VectorXd> pre(depth);
    for (const Sample& s : batch) {
        activations[0] = scaled_input(net, s.input);
        for (std::size_t l = 0; l < depth; ++l) {
            pre[l] = net.layers[l].weights * activations[l] + net.layers[l].bias;
            activations[l + 1] = apply(net.layers[l].activation, pre[l]);
        }
        const double target = (s.target - net.scaler.shift) / net.scaler.scale;
        Eigen::VectorXd delta(1);
        delta(0) = 2.0 * inv_n * (activations[depth](0) - target);
        for (std::size_t l = depth; l-- > 0;) {
            delta = delta.cwiseProduct(apply_derivative(net.layers[l].activation, pre[l]));
            g.weights[l].noalias() += delta * activations[l].transpose();
            g.bias[l] += delta;
            if (l > 0) {
                delta = net.layers[l].weights.transpose() * delta;
            }
        }
    }
    if (l2 != 0.0) {
        for (std::size_t l = 0; l < depth; ++l) {
            g.weights[l] += 2.0 * l2 * net.layers[l].weights;
        }
    }
    return g;
}

std::vector<double> Gradient::flatten() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) {
                out.push_back(weights[l](r, c));
            }
        }
        for (Eigen::Index r = 0; r < bias[l].size(); ++r) {
            out.push_back(bias[l](r));
        }
    }
    return out;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
        throw RangeError("learning rate must lie in (0, 1]");
    }
    if (epochs == 0 || batch_size == 0) {
        throw RangeError("epochs and batch size must be positive");
    }
    if (!(l2 >= 0.0)) {
        throw RangeError("l2 penalty must be non-negative");
    }
    if (scaler && !(scaler->scale > 0.0)) {
        throw RangeError("scaler scale must be positive");
    }
}

TrainResult train(std::span<const double> series, std::size_t window, std::span<const std::size_t> hidden,
                  Activation activation, const TrainConfig& config) {
    config.validate();
    const std::vector<Sample> samples = make_windows(series, window);

    Scaler scaler;
    if (config.scaler) {
        scaler = *config.scaler;
    } else {
        const double n = static_cast<double>(series.size());
        scaler.shift = std::accumulate(series.begin(), series.end(), 0.0) / n;
        double var = 0.0;
        for (const double v : series) {
            var += (v - scaler.shift) * (v - scaler.shift);
        }
        const double sd = std::sqrt(var / n);
        scaler.scale = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }

    TrainResult result;
    result.net = make_network(window, hidden, activation, scaler, config.seed);
    result.initial_loss = loss(result.net, samples, config.l2);
    if (!std::isfinite(result.initial_loss)) {
        throw DivergenceError("initial training loss is not finite");
    }
    result.best_loss = result.initial_loss;

    MlpForecaster net = result.net;
    std::mt19937_64 rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Sample> batch;
    batch.reserve(config.batch_size);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(samples[order[k]]);
            }
            const Gradient g = gradient(net, batch, config.l2);
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                net.layers[l].weights -= config.learning_rate * g.weights[l];
                net.layers[l].bias -= config.learning_rate * g.bias[l];
            }
        }
        const double epoch_loss = loss(net, samples, config.l2);
        if (!std::isfinite(epoch_loss)) {
            throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
        }
        result.epoch_losses.push_back(epoch_loss);
        if (epoch_loss < result.best_loss) {
            result.best_loss = epoch_loss;
            result.best_epoch = epoch;
            result.net = net;
        }
    }
    return result;
}

TrainResult train(const TimeSeries& series, std::size_t window, std::span<const std::size_t> hidden,
                  Activation activation, const TrainConfig& config) {
    return train(series.values(), window, hidden, activation, config);
}

std::vector<double> forecast_recursive(const MlpForecaster& net, std::span<const double> history,
                                       std::size_t horizon) {
    if (history.size() < net.window) {
        throw TooShort("forecast history shorter than the network window");
    }
    std::vector<double> lags(history.end() - static_cast<std::ptrdiff_t>(net.window), history.end());
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        const double next = forward(net, lags);
        out.push_back(next);
        lags.erase(lags.begin());
        lags.push_back(next);
    }
    return out;
}

std::vector<double> forecast_recursive(const MlpForecaster& net, const TimeSeries& history, std::size_t horizon) {
    return forecast_recursive(net, history.values(), horizon);
}

} // namespace aircast::ann
