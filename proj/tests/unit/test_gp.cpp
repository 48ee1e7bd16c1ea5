#include "aircast/error.hpp"
#include "aircast/gp.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace aircast;
using namespace aircast::gp;

namespace {

std::vector<double> distinct_times(std::size_t n, std::mt19937_64& rng, double spread = 20.0) {
    std::uniform_real_distribution<double> u(0.0, spread);
    std::vector<double> xs;
    while (xs.size() < n) {
        const double x = u(rng);
        if (std::none_of(xs.begin(), xs.end(), [&](double y) { return std::abs(x - y) < 1e-3; })) {
            xs.push_back(x);
        }
    }
    return xs;
}

std::vector<double> normals(std::size_t n, std::mt19937_64& rng, double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> z(mean, sd);
    std::vector<double> v(n);
    for (double& x : v) {
        x = z(rng);
    }
    return v;
}

/// One draw from a zero-mean GP with the given kernel plus white noise.
std::vector<double> sample_gp(const std::vector<double>& xs, const SeKernelParams& params, double noise,
                              std::mt19937_64& rng) {
    Eigen::MatrixXd k = gram_matrix(xs, params);
    k.diagonal().array() += noise + 1e-8 * params.amplitude;
    const Eigen::MatrixXd l = k.llt().matrixL();
    const std::vector<double> z = normals(xs.size(), rng);
    const Eigen::VectorXd y = l * Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
    return {y.data(), y.data() + y.size()};
}

/// Roughly unit-spaced times with jitter, shuffled; keeps Gram matrices well conditioned.
std::vector<double> jittered_times(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = static_cast<double>(i) + u(rng);
    }
    std::shuffle(xs.begin(), xs.end(), rng);
    return xs;
}

std::vector<double> iota_times(std::size_t n) {
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = static_cast<double>(i);
    }
    return xs;
}

} // namespace

TEST_CASE("se_kernel") {
    const SeKernelParams p{2.5, 4.0};
    CHECK(se_kernel(3.0, 3.0, p) == 2.5);
    CHECK(se_kernel(1.0, 5.0, {1.0, 4.0}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    CHECK(se_kernel(1.0, 5.0, {1.0, 4.0}) == doctest::Approx(0.367879).epsilon(1e-6));
    std::mt19937_64 rng(1);
    for (const double a : normals(50, rng, 0.0, 10.0)) {
        const double b = a * 0.3 - 1.0;
        CHECK(se_kernel(a, b, p) == se_kernel(b, a, p));
        CHECK(se_kernel(a, b, p) == doctest::Approx(oracle::se(a, b, 2.5, 4.0)).epsilon(1e-14));
    }
    CHECK_THROWS_AS((SeKernelParams{0.0, 1.0}.validate()), PreconditionError);
    CHECK_THROWS_AS((SeKernelParams{1.0, -1.0}.validate()), PreconditionError);
}

TEST_CASE("gram_matrix") {
    const SeKernelParams p{1.7, 3.0};
    const Eigen::MatrixXd one = gram_matrix(std::vector<double>{4.0}, p);
    REQUIRE(one.rows() == 1);
    CHECK(one(0, 0) == 1.7);
    CHECK((gram_matrix(std::vector<double>{2.0, 2.0}, p).array() == 1.7).all());
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto xs = distinct_times(6, rng);
        const Eigen::MatrixXd k = gram_matrix(xs, p);
        CHECK(k == k.transpose());
        CHECK((k.diagonal().array() == 1.7).all());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    }
    const Eigen::MatrixXd cross = cross_kernel(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 2.0, 5.0}, p);
    CHECK(cross.rows() == 2);
    CHECK(cross.cols() == 3);
    CHECK(cross(1, 1) == se_kernel(1.0, 2.0, p));
}

TEST_CASE("fit_gp") {
    SUBCASE("single point, no noise") {
        const GpModel m = fit_gp(std::vector<double>{0.0}, std::vector<double>{5.0}, {1.0, 1.0}, 0.0);
        CHECK(m.offset() == 5.0);
        CHECK(posterior(m, std::vector<double>{0.0}).means[0] == doctest::Approx(5.0).epsilon(1e-12));
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(fit_gp(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 2.0}, {1.0, 1.0}, 0.1),
                        PreconditionError);
        CHECK_THROWS_AS(fit_gp(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0}, {1.0, 1.0}, 0.1),
                        PreconditionError);
        CHECK_THROWS_AS(fit_gp(std::vector<double>{}, std::vector<double>{}, {1.0, 1.0}, 0.1), PreconditionError);
        CHECK_THROWS_AS(fit_gp(std::vector<double>{1.0}, std::vector<double>{1.0}, {1.0, 1.0}, -0.1),
                        PreconditionError);
        const auto many = iota_times(kMaxTrainingPoints + 1);
        CHECK_THROWS_AS(fit_gp(many, many, {1.0, 1.0}, 0.1), PreconditionError);
    }
    SUBCASE("factor reproduces the regularized Gram matrix") {
        std::mt19937_64 rng(3);
        const auto xs = distinct_times(20, rng);
        const auto ys = normals(20, rng, 30.0, 5.0);
        const SeKernelParams p{4.0, 2.5};
        const GpModel m = fit_gp(xs, ys, p, 0.3);
        Eigen::MatrixXd expect = gram_matrix(xs, p);
        expect.diagonal().array() += 0.3 + m.jitter();
        CHECK((m.factor() * m.factor().transpose() - expect).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(m.jitter() == 1e-10 * p.amplitude);
    }
    SUBCASE("jitter ladder rescues a nearly singular Gram matrix") {
        std::vector<double> xs(50);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            xs[i] = 1e-6 * static_cast<double>(i);
        }
        const GpModel m = fit_gp(xs, std::vector<double>(50, 1.0), {3.0, 100.0}, 0.0);
        CHECK(m.jitter() >= 1e-10 * 3.0);
        CHECK(m.jitter() <= 1e-4 * 3.0 * (1.0 + 1e-12));
        const double rungs = std::log10(m.jitter() / (1e-10 * 3.0));
        CHECK(rungs <= 6.0 + 1e-9);
        CHECK(std::abs(rungs - std::round(rungs)) < 1e-9);
    }
}

TEST_CASE("posterior matches the dense-inverse oracle") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> amp(0.2, 5.0);
    std::uniform_real_distribution<double> len(0.5, 6.0);
    std::uniform_real_distribution<double> noise(0.01, 1.0);
    std::uniform_real_distribution<double> query(-3.0, 15.0);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + static_cast<std::size_t>(rep % 12);
        const auto xs = jittered_times(n, rng);
        const auto ys = normals(n, rng, 20.0, 4.0);
        std::vector<double> qs(4);
        for (double& q : qs) {
            q = query(rng);
        }
        const SeKernelParams p{amp(rng), len(rng)};
        const double nv = noise(rng) * p.amplitude;
        const GpModel m = fit_gp(xs, ys, p, nv);
        const Posterior post = posterior(m, qs);
        const oracle::GpResult ref = oracle::gp_dense(xs, ys, p.amplitude, p.length_scale, nv + m.jitter(), qs);
        for (std::size_t i = 0; i < qs.size(); ++i) {
            CHECK(std::abs(post.means[i] - ref.means[i]) < 1e-8 * std::max(1.0, std::abs(ref.means[i])));
            CHECK(ref.variances[i] >= -1e-8);
            CHECK(post.variances[i] >= 0.0);
            CHECK(std::abs(post.variances[i] - std::max(0.0, ref.variances[i])) < 1e-8 * std::max(1.0, p.amplitude));
        }
        CHECK(std::abs(log_marginal_likelihood(m) - ref.log_marginal_likelihood) <
              1e-8 * std::max(1.0, std::abs(ref.log_marginal_likelihood)));
    }
}

TEST_CASE("posterior examples") {
    std::mt19937_64 rng(5);
    const auto xs = jittered_times(8, rng);
    const auto ys = normals(8, rng, 15.0, 3.0);
    SUBCASE("noise-free interpolation") {
        for (const double l : {0.5, 1.0, 1.5}) {
            const GpModel m = fit_gp(xs, ys, {2.0, l}, 0.0);
            const Posterior post = posterior(m, xs);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                CHECK(std::abs(post.means[i] - ys[i]) < 1e-6);
                CHECK(post.variances[i] <= 1e-6);
            }
        }
    }
    SUBCASE("far from the data the prior returns") {
        const GpModel m = fit_gp(xs, ys, {2.0, 3.0}, 0.2);
        const Posterior post = posterior(m, std::vector<double>{1e4, -1e4});
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(std::abs(post.means[i] - m.offset()) < 1e-6);
            CHECK(std::abs(post.variances[i] - 2.0) < 1e-6);
        }
        double mean = 0.0;
        for (const double y : ys) {
            mean += y / 8.0;
        }
        CHECK(m.offset() == doctest::Approx(mean).epsilon(1e-14));
    }
    CHECK(posterior(fit_gp(xs, ys, {1.0, 1.0}, 0.1), std::vector<double>{}).means.empty());
}

TEST_CASE("log marginal likelihood") {
    SUBCASE("scalar formula") {
        // One point: the centred target is 0, so only the determinant term remains.
        const GpModel m = fit_gp(std::vector<double>{0.0}, std::vector<double>{7.0}, {1.5, 1.0}, 0.5);
        const double v = 1.5 + 0.5 + m.jitter();
        CHECK(log_marginal_likelihood(m) ==
              doctest::Approx(-0.5 * (0.0 + std::log(v) + std::log(2.0 * std::numbers::pi))).epsilon(1e-14));
    }
    SUBCASE("two points against the closed form") {
        const double a = 2.0;
        const double nv = 0.3;
        const GpModel m = fit_gp(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 3.0}, {a, 1.0}, nv);
        const double d = a + nv + m.jitter();
        const double c = a * std::exp(-1.0);
        const double det = d * d - c * c;
        // centred targets are (-1, 1)
        const double quad = (d * 1.0 + d * 1.0 + 2.0 * c * 1.0) / det;
        CHECK(log_marginal_likelihood(m) ==
              doctest::Approx(-0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
    }
    SUBCASE("permutation invariance") {
        std::mt19937_64 rng(6);
        for (int rep = 0; rep < 10; ++rep) {
            auto xs = distinct_times(9, rng);
            auto ys = normals(9, rng, 10.0, 2.0);
            const SeKernelParams p{1.0 + rep, 2.0};
            const double base = log_marginal_likelihood(fit_gp(xs, ys, p, 0.25));
            std::vector<std::size_t> idx(9);
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            std::shuffle(idx.begin(), idx.end(), rng);
            std::vector<double> px(9);
            std::vector<double> py(9);
            for (std::size_t i = 0; i < 9; ++i) {
                px[i] = xs[idx[i]];
                py[i] = ys[idx[i]];
            }
            CHECK(std::abs(log_marginal_likelihood(fit_gp(px, py, p, 0.25)) - base) < 1e-9);
        }
    }
}

TEST_CASE("fit_hyperparameters") {
    SUBCASE("single cell") {
        const auto xs = iota_times(10);
        const std::vector<double> ys{1, 2, 1, 3, 2, 4, 3, 5, 4, 6};
        const HyperparameterFit f = fit_hyperparameters(xs, ys, std::vector<double>{0.2}, std::vector<double>{1.5},
                                                        std::vector<double>{4.0});
        CHECK(f.params == SeKernelParams{1.5, 4.0});
        CHECK(f.noise_variance == 0.2);
        CHECK(f.log_marginal_likelihood == log_marginal_likelihood(fit_gp(xs, ys, {1.5, 4.0}, 0.2)));
    }
    SUBCASE("recovers the simulating length scale") {
        const auto xs = iota_times(80);
        int hits = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(700 + seed);
            const auto ys = sample_gp(xs, {1.0, 10.0}, 0.01, rng);
            const HyperparameterFit f = fit_hyperparameters(xs, ys, std::vector<double>{0.01}, std::vector<double>{1.0},
                                                            std::vector<double>{1.0, 10.0, 100.0});
            hits += f.params.length_scale == 10.0 ? 1 : 0;
        }
        CHECK(hits >= 16);
    }
    SUBCASE("white noise selects the largest noise variance") {
        const auto xs = iota_times(80);
        int hits = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(800 + seed);
            const auto ys = normals(80, rng);
            const HyperparameterFit f =
                fit_hyperparameters(xs, ys, std::vector<double>{0.1, 0.5, 1.0}, std::vector<double>{0.05, 0.2},
                                    std::vector<double>{2.0, 10.0});
            hits += f.noise_variance == 1.0 ? 1 : 0;
        }
        CHECK(hits >= 16);
    }
    SUBCASE("ties prefer the longer length scale") {
        // A single observation gives the same evidence for every length scale.
        const HyperparameterFit f =
            fit_hyperparameters(std::vector<double>{0.0}, std::vector<double>{3.0}, std::vector<double>{0.1},
                                std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 30.0, 7.0});
        CHECK(f.params.length_scale == 30.0);
        CHECK(f.params.amplitude == 1.0);
    }
    SUBCASE("invalid grids") {
        const auto xs = iota_times(5);
        CHECK_THROWS_AS(fit_hyperparameters(xs, xs, std::vector<double>{}, std::vector<double>{1.0},
                                            std::vector<double>{1.0}),
                        PreconditionError);
        CHECK_THROWS_AS(fit_hyperparameters(xs, xs, std::vector<double>{0.1}, std::vector<double>{-1.0},
                                            std::vector<double>{1.0}),
                        PreconditionError);
    }
}

TEST_CASE("forecast_gp") {
    const Date start{std::chrono::year{2021}, std::chrono::March, std::chrono::day{1}};
    const auto daily = [&](std::vector<double> v) {
        return TimeSeries::regular(Granularity::Daily, local_midnight(start), std::move(v));
    };
    SUBCASE("constant series") {
        const GpForecast f = forecast_gp(daily(std::vector<double>(40, 33.0)), 5);
        REQUIRE(f.means.size() == 5);
        for (const double m : f.means) {
            CHECK(std::abs(m - 33.0) < 0.01 * 33.0);
        }
    }
    SUBCASE("horizon zero") {
        const GpForecast f = forecast_gp(daily(std::vector<double>(12, 1.0)), 0);
        CHECK(f.means.empty());
        CHECK(f.variances.empty());
    }
    SUBCASE("variance grows with distance") {
        std::mt19937_64 rng(9);
        const GpForecast f = forecast_gp(daily(normals(120, rng, 25.0, 6.0)), 30);
        for (std::size_t h = 1; h < f.variances.size(); ++h) {
            CHECK(f.variances[h] >= f.variances[h - 1]);
        }
    }
    SUBCASE("too short") {
        CHECK_THROWS_AS(forecast_gp(daily(std::vector<double>(9, 1.0)), 3), TooShort);
    }
    SUBCASE("time indices count granularity steps") {
        auto s = daily({1.0, 2.0, 3.0});
        CHECK(time_indices(s) == std::vector<double>{0.0, 1.0, 2.0});
    }
}

TEST_CASE("summary JSON round trip") {
    std::mt19937_64 rng(10);
    const auto xs = distinct_times(15, rng);
    const auto ys = normals(15, rng, 40.0, 10.0);
    const GpModel m = fit_gp(xs, ys, {3.3, 4.4}, 0.7);
    const GpSummary s = summarize(m);
    CHECK(s.n == 15);
    CHECK(s.log_marginal_likelihood == log_marginal_likelihood(m));
    const nlohmann::json j = s;
    const GpSummary back = nlohmann::json::parse(j.dump()).get<GpSummary>();
    CHECK(back == s);
    const GpModel again = restore(back);
    CHECK(again.factor() == m.factor());
    CHECK(posterior(again, std::vector<double>{25.0}).means == posterior(m, std::vector<double>{25.0}).means);
    nlohmann::json broken = j;
    broken.erase("noise_variance");
    CHECK_THROWS_AS(broken.get<GpSummary>(), SchemaError);
}
