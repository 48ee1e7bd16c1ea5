#pragma once

#include "aircast/timeseries.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace aircast::ann {

enum class Activation { Logistic, Tanh, Relu, Identity };

std::string_view to_string(Activation a);
std::optional<Activation> parse_activation(std::string_view text);

double activate(Activation a, double x);
/// Derivative with respect to the pre-activation `x`; ReLU uses 0 at x = 0.
double activate_derivative(Activation a, double x);

/// Inputs and targets are mapped to (v - shift) / scale before entering the network.
struct Scaler {
    double shift = 0.0;
    double scale = 1.0;

    friend bool operator==(const Scaler&, const Scaler&) = default;
};

struct Layer {
    /// outputs x inputs
    Eigen::MatrixXd weights;
    Eigen::VectorXd bias;
    Activation activation = Activation::Identity;
};

/// Feedforward network mapping the last `window` values to the next one.
/// Hidden layers share one activation; the output layer is the identity.
struct MlpForecaster {
    std::size_t window = 0;
    std::vector<Layer> layers;
    Scaler scaler;

    /// [window, hidden..., 1]
    std::vector<std::size_t> layer_sizes() const;
    Activation hidden_activation() const;
    /// Throws DimensionError if the layer shapes do not chain or the scale is not positive.
    void validate() const;

    std::vector<double> flatten() const;
    void assign(std::span<const double> params);
    std::size_t parameter_count() const;
};

bool operator==(const MlpForecaster& a, const MlpForecaster& b);

void to_json(nlohmann::json& j, const MlpForecaster& net);
void from_json(const nlohmann::json& j, MlpForecaster& net);

struct Sample {
    std::vector<double> input;
    double target = 0.0;
};

/// Sliding windows, oldest value first. Throws TooShort when fewer than w + 1 values.
std::vector<Sample> make_windows(std::span<const double> values, std::size_t window);
std::vector<Sample> make_windows(const TimeSeries& series, std::size_t window);

/// Glorot-uniform weights, zero biases.
MlpForecaster make_network(std::size_t window, std::span<const std::size_t> hidden, Activation activation,
                           Scaler scaler, std::uint64_t seed);

/// Prediction in the original units.
double forward(const MlpForecaster& net, std::span<const double> input);

/// Mean squared error in scaled units plus l2 * (sum of squared weights).
double loss(const MlpForecaster& net, std::span<const Sample> batch, double l2);

struct Gradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;

    std::vector<double> flatten() const;
};

/// Exact gradient of `loss` by backpropagation.
Gradient gradient(const MlpForecaster& net, std::span<const Sample> batch, double l2);

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    std::uint64_t seed = 42;
    double l2 = 0.0;
    /// Fixed scaler; by default the training mean and standard deviation.
    std::optional<Scaler> scaler;

    void validate() const;
};

struct TrainResult {
    MlpForecaster net;
    double initial_loss = 0.0;
    double best_loss = 0.0;
    /// 0 means the initial network was never improved on.
    std::size_t best_epoch = 0;
    std::vector<double> epoch_losses;
};

inline constexpr std::size_t kDefaultWindow = 7;
inline constexpr std::size_t kDefaultHidden = 16;

/// Mini-batch gradient descent; keeps the epoch with the lowest full-data loss.
/// Throws DivergenceError if the loss stops being finite.
TrainResult train(std::span<const double> series, std::size_t window, std::span<const std::size_t> hidden,
                  Activation activation, const TrainConfig& config);
TrainResult train(const TimeSeries& series, std::size_t window, std::span<const std::size_t> hidden,
                  Activation activation, const TrainConfig& config);

/// Feeds each prediction back in as the newest lag.
std::vector<double> forecast_recursive(const MlpForecaster& net, std::span<const double> history,
                                       std::size_t horizon);
std::vector<double> forecast_recursive(const MlpForecaster& net, const TimeSeries& history, std::size_t horizon);

} // namespace aircast::ann
