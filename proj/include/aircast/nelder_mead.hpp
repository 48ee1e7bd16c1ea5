#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace aircast::optim {

struct NelderMeadOptions {
    /// Budget shared by the first run and every restart.
    std::size_t max_iterations = 2000;
    /// Relative spread of simplex function values at which a run stops.
    double tolerance = 1e-8;
    /// Per-coordinate offsets of the initial simplex; `default_step` fills missing entries.
    std::vector<double> initial_step;
    double default_step = 0.1;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Minimizes `f` with the downhill simplex method, restarting around the best
/// vertex after each convergence until a restart no longer improves it.
/// Non-finite objective values rank worse than any finite value. The returned
/// value never exceeds f(start).
NelderMeadResult nelder_mead(const Objective& f, std::span<const double> start,
                             const NelderMeadOptions& options = {});

} // namespace aircast::optim
