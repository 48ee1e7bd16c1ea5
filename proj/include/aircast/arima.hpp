#pragma once

#include "aircast/timeseries.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace aircast::arima {

/// ARIMA(p, d, q). Orders are capped at p <= 10, d <= 2, q <= 10.
struct ArimaOrder {
    std::size_t p = 0;
    std::size_t d = 0;
    std::size_t q = 0;

    /// Throws RangeError outside the caps.
    void validate() const;
    std::string to_string() const;

    friend bool operator==(const ArimaOrder&, const ArimaOrder&) = default;
};

inline constexpr std::size_t kMaxP = 10;
inline constexpr std::size_t kMaxD = 2;
inline constexpr std::size_t kMaxQ = 10;

/// Fitted model on the d-times differenced series:
///   w_t = alpha + sum_i beta_i w_{t-i} + e_t + sum_j theta_j e_{t-j},  e_t ~ N(0, sigma2).
struct ArimaModel {
    ArimaOrder order;
    double alpha = 0.0;
    std::vector<double> beta;
    std::vector<double> theta;
    double sigma2 = 1.0;
    /// Conditional sum of squares at the fitted parameters.
    double css = 0.0;
    std::size_t n_effective = 0;
    bool converged = true;
    std::size_t iterations = 0;
    /// All roots of 1 - sum beta_i z^i lie outside the unit circle.
    bool stationary = true;
    /// All roots of 1 + sum theta_j z^j lie outside the unit circle.
    bool invertible = true;

    friend bool operator==(const ArimaModel&, const ArimaModel&) = default;
};

void to_json(nlohmann::json& j, const ArimaOrder& order);
void from_json(const nlohmann::json& j, ArimaOrder& order);
void to_json(nlohmann::json& j, const ArimaModel& model);
void from_json(const nlohmann::json& j, ArimaModel& model);

bool ar_is_stationary(std::span<const double> beta);
bool ma_is_invertible(std::span<const double> theta);

/// Synthetic ARMA(p, q) path of `n` daily observations after 200 discarded
/// burn-in steps. Deterministic for a given seed. Throws NonStationaryError.
TimeSeries simulate_arma(double alpha, std::span<const double> beta, std::span<const double> theta, double sigma,
                         std::size_t n, std::uint64_t seed);

inline constexpr std::size_t kBurnIn = 200;

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Unconditional mean and variance of y_t = mu + W_t + sum_j theta_j W_{t-j}.
Moments ma_unconditional_moments(double mu, std::span<const double> theta, double sigma);

/// Packed parameter vector: [alpha, beta_1..beta_p, theta_1..theta_q].
struct CssProblem {
    std::vector<double> w;
    std::size_t p = 0;
    std::size_t q = 0;

    /// One-step residuals for t = p .. n-1; pre-sample residuals are zero.
    std::vector<double> residuals(std::span<const double> params) const;
    double sum_of_squares(std::span<const double> params) const;
    /// The two optimizer starting points: all zeros, and OLS AR estimates with zero MA terms.
    std::array<std::vector<double>, 2> starting_points() const;
};

struct FitOptions {
    std::size_t max_iterations = 2000;
    double tolerance = 1e-8;
};

/// Conditional-sum-of-squares fit on difference(series, d). Throws TooShort
/// when fewer than p + q + 2 differenced points remain and OptimizerFailure
/// when no starting point converges.
ArimaModel fit_arima(std::span<const double> series, const ArimaOrder& order, const FitOptions& options = {});
ArimaModel fit_arima(const TimeSeries& series, const ArimaOrder& order, const FitOptions& options = {});

/// Mean forecasts for the `horizon` steps after the end of `history`, on the original scale.
std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, std::size_t horizon);
std::vector<double> forecast(const ArimaModel& model, const TimeSeries& history, std::size_t horizon);

/// n_effective * ln(sigma2) + 2 (p + q + 1).
double aic(const ArimaModel& model);

struct OrderGrid {
    std::size_t p_max = 5;
    std::size_t d_max = 1;
    std::size_t q_max = 5;
};

/// Exhaustive AIC search. Ties go to the smaller p + q, then the smaller p.
/// Cells that fail to fit are skipped; throws NoConvergedModel if all fail.
ArimaModel select_order(std::span<const double> series, const OrderGrid& grid = {}, const FitOptions& options = {});
ArimaModel select_order(const TimeSeries& series, const OrderGrid& grid = {}, const FitOptions& options = {});

} // namespace aircast::arima
