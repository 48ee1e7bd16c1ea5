#include "aircast/arima.hpp"

#include "aircast/error.hpp"
#include "aircast/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <Eigen/Dense>

namespace aircast::arima {

namespace {

// Roots of 1 + sum c_i z^i lie outside the unit circle iff the companion
// matrix of z^k + c_1 z^{k-1} + ... + c_k has spectral radius below one.
bool roots_outside_unit_circle(std::span<const double> coefficients) {
    std::size_t k = coefficients.size();
    while (k > 0 && coefficients[k - 1] == 0.0) {
        --k;
    }
    if (k == 0) {
        return true;
    }
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
        companion(0, static_cast<Eigen::Index>(i)) = -coefficients[i];
    }
    for (std::size_t i = 1; i < k; ++i) {
        companion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    }
    const Eigen::VectorXcd eigenvalues = companion.eigenvalues();
    // Repeated unit roots come back perturbed by about sqrt(machine epsilon).
    constexpr double kUnitRootMargin = 1e-7;
    return eigenvalues.cwiseAbs().maxCoeff() < 1.0 - kUnitRootMargin;
}

double mean_of(std::span<const double> v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

void ArimaOrder::validate() const {
    if (p > kMaxP || d > kMaxD || q > kMaxQ) {
        throw RangeError("ARIMA order " + to_string() + " exceeds the limits p<=10, d<=2, q<=10");
    }
}

std::string ArimaOrder::to_string() const {
    return "(" + std::to_string(p) + "," + std::to_string(d) + "," + std::to_string(q) + ")";
}

void to_json(nlohmann::json& j, const ArimaOrder& order) {
    j = nlohmann::json{{"p", order.p}, {"d", order.d}, {"q", order.q}};
}

void from_json(const nlohmann::json& j, ArimaOrder& order) {
    order.p = j.at("p").get<std::size_t>();
    order.d = j.at("d").get<std::size_t>();
    order.q = j.at("q").get<std::size_t>();
}

void to_json(nlohmann::json& j, const ArimaModel& m) {
    j = nlohmann::json{{"model", "arima"},
                       {"order", m.order},
                       {"alpha", m.alpha},
                       {"beta", m.beta},
                       {"theta", m.theta},
                       {"sigma2", m.sigma2},
                       {"css", m.css},
                       {"n_effective", m.n_effective},
                       {"converged", m.converged},
                       {"iterations", m.iterations},
                       {"stationary", m.stationary},
                       {"invertible", m.invertible}};
}

void from_json(const nlohmann::json& j, ArimaModel& m) {
    m.order = j.at("order").get<ArimaOrder>();
    m.alpha = j.at("alpha").get<double>();
    m.beta = j.at("beta").get<std::vector<double>>();
    m.theta = j.at("theta").get<std::vector<double>>();
    m.sigma2 = j.at("sigma2").get<double>();
    m.css = j.at("css").get<double>();
    m.n_effective = j.at("n_effective").get<std::size_t>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<std::size_t>();
    m.stationary = j.at("stationary").get<bool>();
    m.invertible = j.at("invertible").get<bool>();
    if (m.beta.size() != m.order.p || m.theta.size() != m.order.q) {
        throw SchemaError("ARIMA coefficient counts do not match order " + m.order.to_string());
    }
}

bool ar_is_stationary(std::span<const double> beta) {
    std::vector<double> c(beta.begin(), beta.end());
    for (double& v : c) {
        v = -v;
    }
    return roots_outside_unit_circle(c);
}

bool ma_is_invertible(std::span<const double> theta) { return roots_outside_unit_circle(theta); }

TimeSeries simulate_arma(double alpha, std::span<const double> beta, std::span<const double> theta, double sigma,
                         std::size_t n, std::uint64_t seed) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
        throw PreconditionError("innovation standard deviation must be positive");
    }
    if (n <= beta.size() + theta.size()) {
        throw LengthError("simulation length must exceed p + q");
    }
    if (!ar_is_stationary(beta)) {
        throw NonStationaryError("AR polynomial has a root on or inside the unit circle");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);

    const double ar_sum = std::accumulate(beta.begin(), beta.end(), 0.0);
    const double mean = alpha / (1.0 - ar_sum);
    const std::size_t p = beta.size();
    const std::size_t q = theta.size();
    const std::size_t total = n + kBurnIn;
    std::vector<double> y(total + p, mean);
    std::vector<double> e(total + q, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        const std::size_t ty = t + p;
        const std::size_t te = t + q;
        e[te] = noise(rng);
        double value = alpha + e[te];
        for (std::size_t i = 1; i <= p; ++i) {
            value += beta[i - 1] * y[ty - i];
        }
        for (std::size_t j = 1; j <= q; ++j) {
            value += theta[j - 1] * e[te - j];
        }
        y[ty] = value;
    }
    const std::vector<double> kept(y.end() - static_cast<std::ptrdiff_t>(n), y.end());
    const Date start{std::chrono::year{2020}, std::chrono::January, std::chrono::day{1}};
    return TimeSeries::regular(Granularity::Daily, local_midnight(start), kept);
}

Moments ma_unconditional_moments(double mu, std::span<const double> theta, double sigma) {
    if (!(sigma > 0.0)) {
        throw PreconditionError("innovation standard deviation must be positive");
    }
    double weight = 1.0;
    for (const double t : theta) {
        weight += t * t;
    }
    return {mu, weight * sigma * sigma};
}

std::vector<double> CssProblem::residuals(std::span<const double> params) const {
    const double alpha = params[0];
    const auto beta = params.subspan(1, p);
    const auto theta = params.subspan(1 + p, q);
    std::vector<double> e;
    e.reserve(w.size() > p ? w.size() - p : 0);
    for (std::size_t t = p; t < w.size(); ++t) {
        double predicted = alpha;
        for (std::size_t i = 1; i <= p; ++i) {
            predicted += beta[i - 1] * w[t - i];
        }
        const std::size_t k = e.size();
        for (std::size_t j = 1; j <= q && j <= k; ++j) {
            predicted += theta[j - 1] * e[k - j];
        }
        e.push_back(w[t] - predicted);
    }
    return e;
}

double CssProblem::sum_of_squares(std::span<const double> params) const {
    const double alpha = params[0];
    const auto beta = params.subspan(1, p);
    const auto theta = params.subspan(1 + p, q);
    // Ring buffer of the last q residuals; index k holds e_{t-1-k}.
    std::vector<double> recent(q, 0.0);
    double css = 0.0;
    for (std::size_t t = p; t < w.size(); ++t) {
        double predicted = alpha;
        for (std::size_t i = 1; i <= p; ++i) {
            predicted += beta[i - 1] * w[t - i];
        }
        for (std::size_t j = 0; j < q; ++j) {
            predicted += theta[j] * recent[j];
        }
        const double e = w[t] - predicted;
        css += e * e;
        if (q > 0) {
            std::copy_backward(recent.begin(), recent.end() - 1, recent.end());
            recent[0] = e;
        }
    }
    return css;
}

std::array<std::vector<double>, 2> CssProblem::starting_points() const {
    std::vector<double> zeros(1 + p + q, 0.0);
    std::vector<double> ols(1 + p + q, 0.0);
    if (p == 0) {
        ols[0] = mean_of(w);
    } else {
        const auto rows = static_cast<Eigen::Index>(w.size() - p);
        Eigen::MatrixXd design(rows, static_cast<Eigen::Index>(p + 1));
        Eigen::VectorXd target(rows);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const std::size_t t = static_cast<std::size_t>(r) + p;
            design(r, 0) = 1.0;
            for (std::size_t i = 1; i <= p; ++i) {
                design(r, static_cast<Eigen::Index>(i)) = w[t - i];
            }
            target(r) = w[t];
        }
        const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(target);
        for (std::size_t i = 0; i <= p; ++i) {
            const double c = coef(static_cast<Eigen::Index>(i));
            ols[i] = std::isfinite(c) ? c : 0.0;
        }
    }
    return {std::move(zeros), std::move(ols)};
}

ArimaModel fit_arima(std::span<const double> series, const ArimaOrder& order, const FitOptions& options) {
    order.validate();
    if (series.size() <= order.d) {
        throw TooShort("series of length " + std::to_string(series.size()) + " is too short for order " +
                       order.to_string());
    }
    CssProblem problem{difference(series, order.d), order.p, order.q};
    if (problem.w.size() < order.p + order.q + 2) {
        throw TooShort("series of length " + std::to_string(series.size()) + " is too short for order " +
                       order.to_string());
    }

    const double level = mean_of(problem.w);
    double var = 0.0;
    for (const double v : problem.w) {
        var += (v - level) * (v - level);
    }
    const double sd = std::sqrt(var / static_cast<double>(problem.w.size()));

    optim::NelderMeadOptions nm;
    nm.max_iterations = options.max_iterations;
    nm.tolerance = options.tolerance;
    nm.initial_step.assign(1 + order.p + order.q, 0.1);
    nm.initial_step[0] = 0.1 * (sd + std::abs(level)) + 1e-6;

    const auto objective = [&problem](std::span<const double> x) { return problem.sum_of_squares(x); };
    bool any_converged = false;
    optim::NelderMeadResult best;
    best.value = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    for (const auto& start : problem.starting_points()) {
        optim::NelderMeadResult run = optim::nelder_mead(objective, start, nm);
        iterations += run.iterations;
        if (!run.converged) {
            continue;
        }
        if (!any_converged || run.value < best.value) {
            best = std::move(run);
        }
        any_converged = true;
    }
    if (!any_converged || !std::isfinite(best.value)) {
        throw OptimizerFailure("CSS minimization for ARIMA" + order.to_string() + " did not converge within " +
                               std::to_string(options.max_iterations) + " iterations");
    }

    ArimaModel model;
    model.order = order;
    model.alpha = best.x[0];
    model.beta.assign(best.x.begin() + 1, best.x.begin() + 1 + static_cast<std::ptrdiff_t>(order.p));
    model.theta.assign(best.x.begin() + 1 + static_cast<std::ptrdiff_t>(order.p), best.x.end());
    model.css = best.value;
    model.n_effective = problem.w.size() - order.p;
    model.sigma2 = std::max(model.css / static_cast<double>(model.n_effective), std::numeric_limits<double>::min());
    model.converged = true;
    model.iterations = iterations;
    model.stationary = ar_is_stationary(model.beta);
    model.invertible = ma_is_invertible(model.theta);
    return model;
}

ArimaModel fit_arima(const TimeSeries& series, const ArimaOrder& order, const FitOptions& options) {
    return fit_arima(series.values(), order, options);
}

std::vector<double> forecast(const ArimaModel& model, std::span<const double> history, std::size_t horizon) {
    const auto& [p, d, q] = model.order;
    if (history.size() <= p + d) {
        throw TooShort("forecast history of length " + std::to_string(history.size()) + " is too short for order " +
                       model.order.to_string());
    }
    if (horizon == 0) {
        return {};
    }
    std::vector<double> params;
    params.reserve(1 + p + q);
    params.push_back(model.alpha);
    params.insert(params.end(), model.beta.begin(), model.beta.end());
    params.insert(params.end(), model.theta.begin(), model.theta.end());

    CssProblem problem{difference(history, d), p, q};
    std::vector<double> e = problem.residuals(params);
    std::vector<double>& w = problem.w;
    std::vector<double> ahead;
    ahead.reserve(horizon);
    for (std::size_t h = 0; h < horizon; ++h) {
        double next = model.alpha;
        for (std::size_t i = 1; i <= p; ++i) {
            next += model.beta[i - 1] * w[w.size() - i];
        }
        for (std::size_t j = 1; j <= q && j <= e.size(); ++j) {
            next += model.theta[j - 1] * e[e.size() - j];
        }
        w.push_back(next);
        e.push_back(0.0);
        ahead.push_back(next);
    }
    const auto seeds = history.subspan(history.size() - d, d);
    return inverse_difference(ahead, seeds, d);
}

std::vector<double> forecast(const ArimaModel& model, const TimeSeries& history, std::size_t horizon) {
    return forecast(model, history.values(), horizon);
}

double aic(const ArimaModel& model) {
    return static_cast<double>(model.n_effective) * std::log(model.sigma2) +
           2.0 * static_cast<double>(model.order.p + model.order.q + 1);
}

ArimaModel select_order(std::span<const double> series, const OrderGrid& grid, const FitOptions& options) {
    ArimaOrder{grid.p_max, grid.d_max, grid.q_max}.validate();
    std::optional<ArimaModel> best;
    double best_aic = std::numeric_limits<double>::infinity();
    const auto better = [&](const ArimaModel& m, double score) {
        if (!best) {
            return true;
        }
        if (score != best_aic) {
            return score < best_aic;
        }
        const std::size_t size = m.order.p + m.order.q;
        const std::size_t best_size = best->order.p + best->order.q;
        if (size != best_size) {
            return size < best_size;
        }
        return m.order.p < best->order.p;
    };
    for (std::size_t d = 0; d <= grid.d_max; ++d) {
        for (std::size_t p = 0; p <= grid.p_max; ++p) {
            for (std::size_t q = 0; q <= grid.q_max; ++q) {
                ArimaModel model;
                try {
                    model = fit_arima(series, ArimaOrder{p, d, q}, options);
                } catch (const TooShort&) {
                    continue;
                } catch (const OptimizerFailure&) {
                    continue;
                }
                const double score = aic(model);
                if (std::isnan(score)) {
                    continue;
                }
                if (better(model, score)) {
                    best = std::move(model);
                    best_aic = score;
                }
            }
        }
    }
    if (!best) {
        throw NoConvergedModel("no ARIMA order in the grid produced a converged fit");
    }
    return *best;
}

ArimaModel select_order(const TimeSeries& series, const OrderGrid& grid, const FitOptions& options) {
    return select_order(series.values(), grid, options);
}

} // namespace aircast::arima
