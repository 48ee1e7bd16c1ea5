#pragma once

#include "aircast/ann.hpp"
#include "aircast/arima.hpp"
#include "aircast/gp.hpp"
#include "aircast/timeseries.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace aircast::eval {

/// Root mean squared error. Throws LengthMismatch or EmptyInput.
double rmse(std::span<const double> actual, std::span<const double> predicted);
/// Mean absolute error. Throws LengthMismatch or EmptyInput.
double mae(std::span<const double> actual, std::span<const double> predicted);

/// Uniform fit-then-predict contract used by the evaluation harness.
class ForecastAdapter {
public:
    virtual ~ForecastAdapter() = default;

    virtual std::string name() const = 0;
    /// Called once, on the training split only.
    virtual void fit(const TimeSeries& train) = 0;
    /// Prediction for the step after the last observation of `history`.
    virtual double predict_one(const TimeSeries& history) const = 0;
    /// JSON description of the fitted model.
    virtual nlohmann::json describe() const = 0;
};

/// Repeats the last observed value.
class NaiveAdapter final : public ForecastAdapter {
public:
    std::string name() const override { return "naive"; }
    void fit(const TimeSeries&) override {}
    double predict_one(const TimeSeries& history) const override;
    nlohmann::json describe() const override { return {{"model", "naive"}}; }
};

class ArimaAdapter final : public ForecastAdapter {
public:
    /// Selects the order by AIC over `grid`.
    explicit ArimaAdapter(arima::OrderGrid grid = {}, arima::FitOptions options = {});
    /// Uses a fixed order.
    explicit ArimaAdapter(arima::ArimaOrder order, arima::FitOptions options = {});

    std::string name() const override { return "ARIMA"; }
    void fit(const TimeSeries& train) override;
    double predict_one(const TimeSeries& history) const override;
    nlohmann::json describe() const override;
    const arima::ArimaModel& model() const;

private:
    arima::OrderGrid grid_;
    std::optional<arima::ArimaOrder> order_;
    arima::FitOptions options_;
    std::optional<arima::ArimaModel> model_;
};

struct AnnSettings {
    std::size_t window = ann::kDefaultWindow;
    std::vector<std::size_t> hidden{ann::kDefaultHidden};
    ann::Activation activation = ann::Activation::Tanh;
    ann::TrainConfig train;
};

class AnnAdapter final : public ForecastAdapter {
public:
    explicit AnnAdapter(AnnSettings settings = {});

    std::string name() const override { return "ANN"; }
    void fit(const TimeSeries& train) override;
    double predict_one(const TimeSeries& history) const override;
    nlohmann::json describe() const override;
    const ann::MlpForecaster& net() const;

private:
    AnnSettings settings_;
    std::optional<ann::TrainResult> trained_;
};

/// Hyperparameters are chosen on the training split and then frozen; each
/// prediction conditions on the trailing window of the supplied history.
class GpAdapter final : public ForecastAdapter {
public:
    explicit GpAdapter(gp::GpForecastOptions options = {});

    std::string name() const override { return "GPR"; }
    void fit(const TimeSeries& train) override;
    double predict_one(const TimeSeries& history) const override;
    nlohmann::json describe() const override;
    const gp::HyperparameterFit& hyperparameters() const;
    /// The model conditioned on the trailing training window.
    const gp::GpSummary& summary() const;

private:
    gp::GpForecastOptions options_;
    std::optional<gp::HyperparameterFit> fit_;
    std::optional<gp::GpSummary> summary_;
};

struct ModelSettings {
    arima::OrderGrid arima_grid;
    AnnSettings ann;
    gp::GpForecastOptions gp;
};

/// Known names: ARIMA, ANN, GPR (alias GP), naive. Case-insensitive.
/// Throws PreconditionError for anything else.
std::unique_ptr<ForecastAdapter> make_adapter(std::string_view name, const ModelSettings& settings);
/// Canonical display name for a model key, e.g. "gp" -> "GPR".
std::string canonical_model_name(std::string_view name);

struct RollingForecast {
    std::vector<Instant> instants;
    std::vector<double> predictions;
    std::vector<double> actuals;
};

/// One-step-ahead predictions over `test`, each from train followed by the
/// test values observed so far. The adapter must already be fitted.
RollingForecast rolling_one_step(const ForecastAdapter& adapter, const TimeSeries& train, const TimeSeries& test);

struct ModelResult {
    std::string name;
    bool ok = false;
    std::string error;
    double rmse = 0.0;
    double mae = 0.0;
    std::vector<double> predictions;
    std::vector<double> actuals;
    nlohmann::json model;
};

struct EvalReport {
    std::string station;
    SplitSpec split;
    std::size_t train_size = 0;
    std::vector<Instant> test_instants;
    std::vector<ModelResult> models;

    const ModelResult* find(std::string_view model_name) const;
};

inline constexpr std::string_view kEvaluationProtocol =
    "rolling one-step-ahead forecasts over the trailing holdout; parameters fitted once on the training split "
    "and frozen";

/// Fits each adapter on the training split and scores it on the holdout.
/// A failing model is recorded in its row; the others still run.
EvalReport compare_models(std::string station, const TimeSeries& series, const SplitSpec& split,
                          std::span<const std::unique_ptr<ForecastAdapter>> models);

void to_json(nlohmann::json& j, const ModelResult& r);
void to_json(nlohmann::json& j, const EvalReport& report);

/// One row per station; RMSE columns for every model, then MAE columns.
void write_comparison_table(std::ostream& out, std::span<const EvalReport> reports,
                            std::span<const std::string> model_names);

} // namespace aircast::eval
