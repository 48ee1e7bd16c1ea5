#pragma once

#include "aircast/timeseries.hpp"

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace aircast::gp {

/// k(x, x') = amplitude * exp(-(x - x')^2 / length_scale^2)
///
/// Note there is no factor 1/2 in the exponent and the amplitude is not
/// squared, so `length_scale` here equals sqrt(2) times the conventional one.
struct SeKernelParams {
    double amplitude = 1.0;
    double length_scale = 1.0;

    void validate() const;

    friend bool operator==(const SeKernelParams&, const SeKernelParams&) = default;
};

double se_kernel(double x, double x2, const SeKernelParams& params);
Eigen::MatrixXd gram_matrix(std::span<const double> xs, const SeKernelParams& params);
/// Rows index `xs`, columns index `ys`.
Eigen::MatrixXd cross_kernel(std::span<const double> xs, std::span<const double> ys, const SeKernelParams& params);

inline constexpr std::size_t kMaxTrainingPoints = 2000;
inline constexpr double kInitialJitter = 1e-10;
inline constexpr double kMaxJitter = 1e-4;

/// Exact GP regression on scalar inputs with a constant prior mean equal to
/// the training-target mean.
class GpModel {
public:
    const SeKernelParams& params() const noexcept { return params_; }
    double noise_variance() const noexcept { return noise_variance_; }
    /// Diagonal term added on top of the noise to make the factorization succeed.
    double jitter() const noexcept { return jitter_; }
    double offset() const noexcept { return offset_; }
    const std::vector<double>& train_inputs() const noexcept { return inputs_; }
    const std::vector<double>& train_values() const noexcept { return values_; }
    /// Targets minus `offset()`.
    const Eigen::VectorXd& centered_targets() const noexcept { return targets_; }
    /// Lower Cholesky factor of K + (noise_variance + jitter) I.
    const Eigen::MatrixXd& factor() const noexcept { return factor_; }
    /// (K + (noise + jitter) I)^{-1} (y - offset)
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    std::size_t size() const noexcept { return inputs_.size(); }

private:
    friend GpModel fit_gp(std::span<const double>, std::span<const double>, const SeKernelParams&, double);

    SeKernelParams params_;
    double noise_variance_ = 0.0;
    double jitter_ = 0.0;
    double offset_ = 0.0;
    std::vector<double> inputs_;
    std::vector<double> values_;
    Eigen::VectorXd targets_;
    Eigen::MatrixXd factor_;
    Eigen::VectorXd weights_;
};

/// Throws PreconditionError on mismatched lengths, duplicate times, more than
/// 2000 points or a negative noise variance, and FactorizationError when the
/// jitter ladder 1e-10..1e-4 (times amplitude) is exhausted.
GpModel fit_gp(std::span<const double> times, std::span<const double> values, const SeKernelParams& params,
               double noise_variance);

struct Posterior {
    std::vector<double> means;
    /// Latent-function variances, clamped at zero.
    std::vector<double> variances;
};

Posterior posterior(const GpModel& model, std::span<const double> test_times);

double log_marginal_likelihood(const GpModel& model);

struct HyperparameterFit {
    SeKernelParams params;
    double noise_variance = 0.0;
    double log_marginal_likelihood = 0.0;
};

/// Grid search maximizing the log marginal likelihood. Ties prefer the longer
/// length scale, then the smaller amplitude. Throws NoValidFit when every
/// cell fails to factorize.
HyperparameterFit fit_hyperparameters(std::span<const double> times, std::span<const double> values,
                                      std::span<const double> noise_grid, std::span<const double> amplitude_grid,
                                      std::span<const double> length_scale_grid);

struct GpForecastOptions {
    /// Multiples of the target variance.
    std::vector<double> amplitude_factors{0.5, 1.0, 2.0};
    std::vector<double> noise_factors{0.05, 0.1, 0.25, 0.5};
    /// In units of the series step (days for daily data).
    std::vector<double> length_scales{3.0, 7.0, 14.0, 30.0, 60.0};
    /// Only the most recent observations condition the fit.
    std::size_t training_window = 180;
};

/// Hyperparameter search on the trailing `training_window` points with grids
/// scaled by the sample variance of that window.
HyperparameterFit select_hyperparameters(std::span<const double> times, std::span<const double> values,
                                         const GpForecastOptions& options);

/// Observation positions in granularity steps since the first observation.
std::vector<double> time_indices(const TimeSeries& series);

struct GpForecast {
    std::vector<double> means;
    std::vector<double> variances;
    HyperparameterFit fit;
};

/// Fits hyperparameters on the trailing training window and returns the
/// posterior at the next `horizon` steps. Needs at least 10 observations.
GpForecast forecast_gp(const TimeSeries& series, std::size_t horizon, const GpForecastOptions& options = {});

/// Serializable description of a fitted model; the factorization is rebuilt by `restore`.
struct GpSummary {
    SeKernelParams params;
    double noise_variance = 0.0;
    double jitter = 0.0;
    std::size_t n = 0;
    double offset = 0.0;
    double log_marginal_likelihood = 0.0;
    std::vector<double> train_inputs;
    std::vector<double> train_values;

    friend bool operator==(const GpSummary&, const GpSummary&) = default;
};

GpSummary summarize(const GpModel& model);
GpModel restore(const GpSummary& summary);

void to_json(nlohmann::json& j, const GpSummary& s);
void from_json(const nlohmann::json& j, GpSummary& s);

} // namespace aircast::gp
