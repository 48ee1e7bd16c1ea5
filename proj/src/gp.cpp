#include "aircast/gp.hpp"

#include "aircast/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace aircast::gp {

namespace {

double sample_variance(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (const double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return v.size() > 1 ? ss / (n - 1.0) : 0.0;
}

std::vector<double> scaled(std::span<const double> factors, double base) {
    std::vector<double> out;
    out.reserve(factors.size());
    for (const double f : factors) {
        out.push_back(f * base);
    }
    return out;
}

} // namespace

void SeKernelParams::validate() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude) || !(length_scale > 0.0) || !std::isfinite(length_scale)) {
        throw PreconditionError("kernel amplitude and length scale must be positive and finite");
    }
}

double se_kernel(double x, double x2, const SeKernelParams& params) {
    const double r = (x - x2) / params.length_scale;
    return params.amplitude * std::exp(-r * r);
}

Eigen::MatrixXd gram_matrix(std::span<const double> xs, const SeKernelParams& params) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        k(i, i) = params.amplitude;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = se_kernel(xs[static_cast<std::size_t>(i)], xs[static_cast<std::size_t>(j)], params);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

Eigen::MatrixXd cross_kernel(std::span<const double> xs, std::span<const double> ys, const SeKernelParams& params) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(ys.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t j = 0; j < ys.size(); ++j) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = se_kernel(xs[i], ys[j], params);
        }
    }
    return k;
}

GpModel fit_gp(std::span<const double> times, std::span<const double> values, const SeKernelParams& params,
               double noise_variance) {
    params.validate();
    if (times.empty() || times.size() != values.size()) {
        throw PreconditionError("GP training needs equally many times and values, at least one");
    }
    if (times.size() > kMaxTrainingPoints) {
        throw PreconditionError("GP training set of " + std::to_string(times.size()) + " points exceeds the limit of " +
                                std::to_string(kMaxTrainingPoints));
    }
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance)) {
        throw PreconditionError("noise variance must be non-negative and finite");
    }
    std::vector<double> sorted(times.begin(), times.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw PreconditionError("GP training times must be distinct");
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(values[i])) {
            throw PreconditionError("GP training data must be finite");
        }
    }

    GpModel m;
    m.params_ = params;
    m.noise_variance_ = noise_variance;
    m.inputs_.assign(times.begin(), times.end());
    m.values_.assign(values.begin(), values.end());
    m.offset_ = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    m.targets_.resize(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
        m.targets_(static_cast<Eigen::Index>(i)) = values[i] - m.offset_;
    }

    const Eigen::MatrixXd k = gram_matrix(times, params);
    for (double jitter = kInitialJitter; jitter <= kMaxJitter * 1.000001; jitter *= 10.0) {
        Eigen::MatrixXd a = k;
        a.diagonal().array() += noise_variance + jitter * params.amplitude;
        Eigen::LLT<Eigen::MatrixXd> llt(a);
        if (llt.info() != Eigen::Success) {
            continue;
        }
        Eigen::MatrixXd l = llt.matrixL();
        const auto diag = l.diagonal();
        if (!diag.allFinite() || (diag.array() <= 0.0).any()) {
            continue;
        }
        m.jitter_ = jitter * params.amplitude;
        m.factor_ = std::move(l);
        m.weights_ = llt.solve(m.targets_);
        return m;
    }
    throw FactorizationError("kernel matrix is not positive definite even with jitter " +
                             std::to_string(kMaxJitter) + " x amplitude");
}

Posterior posterior(const GpModel& model, std::span<const double> test_times) {
    Posterior out;
    if (test_times.empty()) {
        return out;
    }
    const Eigen::MatrixXd cross = cross_kernel(model.train_inputs(), test_times, model.params());
    const Eigen::VectorXd means = cross.transpose() * model.weights();
    const Eigen::MatrixXd v = model.factor().triangularView<Eigen::Lower>().solve(cross);
    const Eigen::VectorXd reduction = v.colwise().squaredNorm().transpose();
    out.means.resize(test_times.size());
    out.variances.resize(test_times.size());
    for (std::size_t i = 0; i < test_times.size(); ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        out.means[i] = means(idx) + model.offset();
        out.variances[i] = std::max(0.0, model.params().amplitude - reduction(idx));
    }
    return out;
}

double log_marginal_likelihood(const GpModel& model) {
    const double n = static_cast<double>(model.size());
    const double quad = model.centered_targets().dot(model.weights());
    const double log_det = 2.0 * model.factor().diagonal().array().log().sum();
    return -0.5 * quad - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
}

HyperparameterFit fit_hyperparameters(std::span<const double> times, std::span<const double> values,
                                      std::span<const double> noise_grid, std::span<const double> amplitude_grid,
                                      std::span<const double> length_scale_grid) {
    if (noise_grid.empty() || amplitude_grid.empty() || length_scale_grid.empty()) {
        throw PreconditionError("hyperparameter grids must be non-empty");
    }
    for (const auto grid : {noise_grid, amplitude_grid, length_scale_grid}) {
        for (const double v : grid) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw PreconditionError("hyperparameter grid values must be positive");
            }
        }
    }
    std::optional<HyperparameterFit> best;
    const auto better = [&](const HyperparameterFit& c) {
        if (!best) {
            return true;
        }
        if (c.log_marginal_likelihood != best->log_marginal_likelihood) {
            return c.log_marginal_likelihood > best->log_marginal_likelihood;
        }
        if (c.params.length_scale != best->params.length_scale) {
            return c.params.length_scale > best->params.length_scale;
        }
        return c.params.amplitude < best->params.amplitude;
    };
    for (const double length : length_scale_grid) {
        for (const double amplitude : amplitude_grid) {
            for (const double noise : noise_grid) {
                const SeKernelParams params{amplitude, length};
                HyperparameterFit cell{params, noise, 0.0};
                try {
                    cell.log_marginal_likelihood = log_marginal_likelihood(fit_gp(times, values, params, noise));
                } catch (const FactorizationError&) {
                    continue;
                }
                if (std::isfinite(cell.log_marginal_likelihood) && better(cell)) {
                    best = cell;
                }
            }
        }
    }
    if (!best) {
        throw NoValidFit("no hyperparameter cell produced a positive definite kernel matrix");
    }
    return *best;
}

std::vector<double> time_indices(const TimeSeries& series) {
    std::vector<double> out;
    out.reserve(series.size());
    if (series.empty()) {
        return out;
    }
    std::int64_t step = step_seconds(series.granularity());
    if (step == 0) {
        step = kSecondsPerDay;
    }
    const std::int64_t origin = series.front().at.epoch_seconds;
    for (const auto& o : series.observations()) {
        out.push_back(static_cast<double>(o.at.epoch_seconds - origin) / static_cast<double>(step));
    }
    return out;
}

HyperparameterFit select_hyperparameters(std::span<const double> times, std::span<const double> values,
                                         const GpForecastOptions& options) {
    if (times.size() != values.size() || times.empty()) {
        throw PreconditionError("GP training needs equally many times and values, at least one");
    }
    const std::size_t window = std::min({options.training_window, times.size(), kMaxTrainingPoints});
    times = times.last(window);
    values = values.last(window);
    double variance = sample_variance(values);
    if (!(variance > 0.0)) {
        variance = 1.0;
    }
    return fit_hyperparameters(times, values, scaled(options.noise_factors, variance),
                               scaled(options.amplitude_factors, variance), options.length_scales);
}

GpForecast forecast_gp(const TimeSeries& series, std::size_t horizon, const GpForecastOptions& options) {
    if (series.size() < 10) {
        throw TooShort("GP forecasting needs at least 10 observations");
    }
    GpForecast out;
    if (horizon == 0) {
        return out;
    }
    const std::vector<double> all_times = time_indices(series);
    const std::vector<double> all_values = series.values();
    out.fit = select_hyperparameters(all_times, all_values, options);

    const std::size_t window = std::min({options.training_window, series.size(), kMaxTrainingPoints});
    const std::span<const double> times = std::span(all_times).last(window);
    const GpModel model = fit_gp(times, std::span(all_values).last(window), out.fit.params, out.fit.noise_variance);
    std::vector<double> future(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        future[h] = times.back() + static_cast<double>(h + 1);
    }
    Posterior post = posterior(model, future);
    out.means = std::move(post.means);
    out.variances = std::move(post.variances);
    return out;
}

GpSummary summarize(const GpModel& model) {
    GpSummary s;
    s.params = model.params();
    s.noise_variance = model.noise_variance();
    s.jitter = model.jitter();
    s.n = model.size();
    s.offset = model.offset();
    s.log_marginal_likelihood = log_marginal_likelihood(model);
    s.train_inputs = model.train_inputs();
    s.train_values = model.train_values();
    return s;
}

GpModel restore(const GpSummary& summary) {
    return fit_gp(summary.train_inputs, summary.train_values, summary.params, summary.noise_variance);
}

void to_json(nlohmann::json& j, const GpSummary& s) {
    j = nlohmann::json{{"model", "gp"},
                       {"amplitude", s.params.amplitude},
                       {"length_scale", s.params.length_scale},
                       {"noise_variance", s.noise_variance},
                       {"jitter", s.jitter},
                       {"n", s.n},
                       {"offset", s.offset},
                       {"log_marginal_likelihood", s.log_marginal_likelihood},
                       {"train_inputs", s.train_inputs},
                       {"train_values", s.train_values}};
}

void from_json(const nlohmann::json& j, GpSummary& s) {
    try {
        s.params.amplitude = j.at("amplitude").get<double>();
        s.params.length_scale = j.at("length_scale").get<double>();
        s.noise_variance = j.at("noise_variance").get<double>();
        s.jitter = j.at("jitter").get<double>();
        s.n = j.at("n").get<std::size_t>();
        s.offset = j.at("offset").get<double>();
        s.log_marginal_likelihood = j.at("log_marginal_likelihood").get<double>();
        s.train_inputs = j.value("train_inputs", std::vector<double>{});
        s.train_values = j.value("train_values", std::vector<double>{});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed GP summary: ") + e.what());
    }
    if (s.train_inputs.size() != s.train_values.size()) {
        throw SchemaError("GP summary has mismatched training inputs and values");
    }
}

} // namespace aircast::gp
