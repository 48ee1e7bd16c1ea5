#include "aircast/nelder_mead.hpp"

#include "aircast/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aircast::optim {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;
constexpr double kTiny = 1e-20;

struct Counted {
    const Objective& f;
    std::size_t evaluations = 0;

    double operator()(std::span<const double> x) {
        ++evaluations;
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    }
};

struct RunResult {
    std::vector<double> x;
    double value;
    std::size_t iterations;
    bool converged;
};

RunResult single_run(Counted& f, std::vector<double> start, double start_value, const NelderMeadOptions& options,
                     std::size_t budget) {
    const std::size_t n = start.size();
    std::vector<std::vector<double>> simplex(n + 1, start);
    std::vector<double> values(n + 1, start_value);
    for (std::size_t i = 0; i < n; ++i) {
        double step = i < options.initial_step.size() ? options.initial_step[i] : options.default_step;
        if (step == 0.0) {
            step = options.default_step;
        }
        simplex[i + 1][i] += step;
        values[i + 1] = f(simplex[i + 1]);
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), trial(n), trial2(n);
    const auto point_along = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = centroid[j] + t * (worst[j] - centroid[j]);
        }
    };

    std::size_t iteration = 0;
    while (true) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[n - 1];

        const double spread = std::abs(values[worst] - values[best]);
        const double scale = std::abs(values[worst]) + std::abs(values[best]) + kTiny;
        if (std::isfinite(values[worst]) && 2.0 * spread <= options.tolerance * scale) {
            return {simplex[best], values[best], iteration, true};
        }
        if (iteration >= budget) {
            return {simplex[best], values[best], iteration, false};
        }
        ++iteration;

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == worst) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                centroid[j] += simplex[k][j];
            }
        }
        for (double& c : centroid) {
            c /= static_cast<double>(n);
        }

        point_along(-kReflect, trial, simplex[worst]);
        const double reflected = f(trial);
        if (reflected < values[best]) {
            point_along(-kReflect * kExpand, trial2, simplex[worst]);
            const double expanded = f(trial2);
            if (expanded < reflected) {
                simplex[worst] = trial2;
                values[worst] = expanded;
            } else {
                simplex[worst] = trial;
                values[worst] = reflected;
            }
            continue;
        }
        if (reflected < values[second_worst]) {
            simplex[worst] = trial;
            values[worst] = reflected;
            continue;
        }
        // Contract toward the better of the worst vertex and its reflection.
        const bool outside = reflected < values[worst];
        point_along(outside ? -kReflect * kContract : kContract, trial2, simplex[worst]);
        const double contracted = f(trial2);
        if (contracted < std::min(reflected, values[worst])) {
            simplex[worst] = trial2;
            values[worst] = contracted;
            continue;
        }
        for (std::size_t k = 0; k <= n; ++k) {
            if (k == best) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                simplex[k][j] = simplex[best][j] + kShrink * (simplex[k][j] - simplex[best][j]);
            }
            values[k] = f(simplex[k]);
        }
    }
}

} // namespace

NelderMeadResult nelder_mead(const Objective& f, std::span<const double> start, const NelderMeadOptions& options) {
    if (start.empty()) {
        throw DimensionError("Nelder-Mead needs at least one parameter");
    }
    Counted counted{f};
    NelderMeadResult result;
    result.x.assign(start.begin(), start.end());
    result.value = counted(result.x);

    std::size_t used = 0;
    bool have_previous = false;
    while (used < options.max_iterations || !have_previous) {
        RunResult run = single_run(counted, result.x, result.value, options, options.max_iterations - used);
        used += run.iterations;
        const double previous = result.value;
        if (run.value <= result.value) {
            result.x = std::move(run.x);
            result.value = run.value;
        }
        if (!run.converged) {
            result.converged = false;
            break;
        }
        const double gain = previous - result.value;
        if (have_previous && gain <= options.tolerance * (std::abs(result.value) + kTiny)) {
            result.converged = true;
            break;
        }
        have_previous = true;
        if (used >= options.max_iterations) {
            // Budget exhausted right after a converged run; accept it.
            result.converged = true;
            break;
        }
    }
    result.iterations = used;
    result.evaluations = counted.evaluations;
    return result;
}

} // namespace aircast::optim
