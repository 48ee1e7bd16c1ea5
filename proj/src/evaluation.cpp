#include "aircast/evaluation.hpp"

#include "aircast/csv.hpp"
#include "aircast/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>

namespace aircast::eval {

namespace {

void check_pair(std::span<const double> actual, std::span<const double> predicted) {
    if (actual.size() != predicted.size()) {
        throw LengthMismatch("actual and predicted sequences differ in length (" + std::to_string(actual.size()) +
                             " vs " + std::to_string(predicted.size()) + ")");
    }
    if (actual.empty()) {
        throw EmptyInput("error metric of empty sequences");
    }
}

std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
    return out;
}

} // namespace

double rmse(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double e = actual[i] - predicted[i];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(actual.size()));
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
    check_pair(actual, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        sum += std::abs(actual[i] - predicted[i]);
    }
    return sum / static_cast<double>(actual.size());
}

double NaiveAdapter::predict_one(const TimeSeries& history) const {
    if (history.empty()) {
        throw TooShort("naive forecast needs at least one observation");
    }
    return history.back().value;
}

ArimaAdapter::ArimaAdapter(arima::OrderGrid grid, arima::FitOptions options) : grid_(grid), options_(options) {}

ArimaAdapter::ArimaAdapter(arima::ArimaOrder order, arima::FitOptions options) : order_(order), options_(options) {}

void ArimaAdapter::fit(const TimeSeries& train) {
    model_ = order_ ? arima::fit_arima(train, *order_, options_) : arima::select_order(train, grid_, options_);
}

const arima::ArimaModel& ArimaAdapter::model() const {
    if (!model_) {
        throw PreconditionError("ARIMA adapter used before fit");
    }
    return *model_;
}

double ArimaAdapter::predict_one(const TimeSeries& history) const {
    return arima::forecast(model(), history, 1).front();
}

nlohmann::json ArimaAdapter::describe() const { return model(); }

AnnAdapter::AnnAdapter(AnnSettings settings) : settings_(std::move(settings)) {}

void AnnAdapter::fit(const TimeSeries& train) {
    trained_ = ann::train(train, settings_.window, settings_.hidden, settings_.activation, settings_.train);
}

const ann::MlpForecaster& AnnAdapter::net() const {
    if (!trained_) {
        throw PreconditionError("ANN adapter used before fit");
    }
    return trained_->net;
}

double AnnAdapter::predict_one(const TimeSeries& history) const {
    return ann::forecast_recursive(net(), history, 1).front();
}

nlohmann::json AnnAdapter::describe() const {
    nlohmann::json j = net();
    j["initial_loss"] = trained_->initial_loss;
    j["best_loss"] = trained_->best_loss;
    j["best_epoch"] = trained_->best_epoch;
    return j;
}

GpAdapter::GpAdapter(gp::GpForecastOptions options) : options_(std::move(options)) {}

void GpAdapter::fit(const TimeSeries& train) {
    const std::vector<double> times = gp::time_indices(train);
    const std::vector<double> values = train.values();
    fit_ = gp::select_hyperparameters(times, values, options_);
    const std::size_t window = std::min({options_.training_window, train.size(), gp::kMaxTrainingPoints});
    summary_ = gp::summarize(gp::fit_gp(std::span(times).last(window), std::span(values).last(window),
                                        fit_->params, fit_->noise_variance));
}

const gp::HyperparameterFit& GpAdapter::hyperparameters() const {
    if (!fit_) {
        throw PreconditionError("GP adapter used before fit");
    }
    return *fit_;
}

double GpAdapter::predict_one(const TimeSeries& history) const {
    const gp::HyperparameterFit& hp = hyperparameters();
    if (history.empty()) {
        throw TooShort("GP forecast needs at least one observation");
    }
    const std::vector<double> times = gp::time_indices(history);
    const std::vector<double> values = history.values();
    const std::size_t window = std::min({options_.training_window, history.size(), gp::kMaxTrainingPoints});
    const gp::GpModel model =
        gp::fit_gp(std::span(times).last(window), std::span(values).last(window), hp.params, hp.noise_variance);
    const double next = times.back() + 1.0;
    return gp::posterior(model, std::span(&next, 1)).means.front();
}

const gp::GpSummary& GpAdapter::summary() const {
    hyperparameters();
    return *summary_;
}

nlohmann::json GpAdapter::describe() const { return summary(); }

std::string canonical_model_name(std::string_view name) {
    const std::string key = upper(name);
    if (key == "ARIMA") {
        return "ARIMA";
    }
    if (key == "ANN" || key == "MLP" || key == "NN") {
        return "ANN";
    }
    if (key == "GP" || key == "GPR") {
        return "GPR";
    }
    if (key == "NAIVE") {
        return "naive";
    }
    throw PreconditionError("unknown model '" + std::string(name) + "'");
}

std::unique_ptr<ForecastAdapter> make_adapter(std::string_view name, const ModelSettings& settings) {
    const std::string canonical = canonical_model_name(name);
    if (canonical == "ARIMA") {
        return std::make_unique<ArimaAdapter>(settings.arima_grid);
    }
    if (canonical == "ANN") {
        return std::make_unique<AnnAdapter>(settings.ann);
    }
    if (canonical == "GPR") {
        return std::make_unique<GpAdapter>(settings.gp);
    }
    return std::make_unique<NaiveAdapter>();
}

RollingForecast rolling_one_step(const ForecastAdapter& adapter, const TimeSeries& train, const TimeSeries& test) {
    RollingForecast out;
    out.instants.reserve(test.size());
    out.predictions.reserve(test.size());
    out.actuals.reserve(test.size());
    std::vector<Observation> history = train.observations();
    history.reserve(train.size() + test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const TimeSeries seen(train.granularity(), history);
        double prediction = 0.0;
        try {
            prediction = adapter.predict_one(seen);
        } catch (const Error& e) {
            throw Error(adapter.name() + " failed at holdout index " + std::to_string(i) + ": " + e.what());
        }
        out.instants.push_back(test[i].at);
        out.predictions.push_back(prediction);
        out.actuals.push_back(test[i].value);
        history.push_back(test[i]);
    }
    return out;
}

const ModelResult* EvalReport::find(std::string_view model_name) const {
    for (const auto& m : models) {
        if (m.name == model_name) {
            return &m;
        }
    }
    return nullptr;
}

EvalReport compare_models(std::string station, const TimeSeries& series, const SplitSpec& split,
                          std::span<const std::unique_ptr<ForecastAdapter>> models) {
    if (models.empty()) {
        throw PreconditionError("model set is empty");
    }
    const auto [train, test] = split_holdout(series, split);
    EvalReport report;
    report.station = std::move(station);
    report.split = split;
    report.train_size = train.size();
    for (const auto& o : test.observations()) {
        report.test_instants.push_back(o.at);
    }
    for (const auto& adapter : models) {
        ModelResult result;
        result.name = adapter->name();
        try {
            adapter->fit(train);
            RollingForecast rolled = rolling_one_step(*adapter, train, test);
            result.rmse = rmse(rolled.actuals, rolled.predictions);
            result.mae = mae(rolled.actuals, rolled.predictions);
            result.predictions = std::move(rolled.predictions);
            result.actuals = std::move(rolled.actuals);
            result.model = adapter->describe();
            result.ok = true;
        } catch (const std::exception& e) {
            result.ok = false;
            result.error = e.what();
        }
        report.models.push_back(std::move(result));
    }
    return report;
}

void to_json(nlohmann::json& j, const ModelResult& r) {
    j = nlohmann::json{{"name", r.name}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) {
        j["rmse"] = r.rmse;
        j["mae"] = r.mae;
        j["predictions"] = r.predictions;
        j["actuals"] = r.actuals;
        j["model"] = r.model;
    } else {
        j["error"] = r.error;
    }
}

void to_json(nlohmann::json& j, const EvalReport& report) {
    std::vector<std::string> instants;
    instants.reserve(report.test_instants.size());
    for (const Instant at : report.test_instants) {
        instants.push_back(format_iso8601(at));
    }
    j = nlohmann::json{{"station", report.station},
                       {"split", report.split.describe()},
                       {"protocol", kEvaluationProtocol},
                       {"train_size", report.train_size},
                       {"test_size", report.test_instants.size()},
                       {"test_instants", std::move(instants)},
                       {"models", report.models}};
}

void write_comparison_table(std::ostream& out, std::span<const EvalReport> reports,
                            std::span<const std::string> model_names) {
    out << "station";
    for (const char* metric : {"RMSE", "MAE"}) {
        for (const auto& name : model_names) {
            out << ',' << metric << '_' << csv_field(name);
        }
    }
    out << '\n';
    for (const EvalReport& report : reports) {
        out << csv_field(report.station);
        for (const bool want_rmse : {true, false}) {
            for (const auto& name : model_names) {
                out << ',';
                const ModelResult* r = report.find(name);
                if (r != nullptr && r->ok) {
                    out << format_number(want_rmse ? r->rmse : r->mae);
                }
            }
        }
        out << '\n';
    }
}

} // namespace aircast::eval
