#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dmilo/errors.hpp"
#include "dmilo/prior.hpp"
#include "dmilo/rng.hpp"
#include "dmilo/schedule.hpp"
#include "testutil.hpp"

using namespace ilo;

namespace {

// time with alpha = 0.8, sigma = 0.6 under the default (0.1, 20) coefficients
constexpr double kT08 = 0.20681969263776171;

GmmPrior random_mixture(int K, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vec> means;
    Vec w, taus;
    for (int k = 0; k < K; ++k) {
        means.push_back(rng.normal_vec(static_cast<std::size_t>(n)));
        w.push_back(0.2 + rng.uniform());
        taus.push_back(0.3 + rng.uniform());
    }
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return make_gmm(means, w, taus);
}

}  // namespace

TEST_SUITE_BEGIN("prior");

TEST_CASE("make_gmm validates") {
    CHECK_THROWS_AS(make_gmm({}, {}, {}), ConfigError);
    CHECK_THROWS_AS(make_gmm({{0.0}}, {0.5}, {1.0}), ConfigError);            // weights != 1
    CHECK_THROWS_AS(make_gmm({{0.0}}, {1.0}, {0.0}), ConfigError);            // tau = 0
    CHECK_THROWS_AS(make_gmm({{0.0}, {0.0, 1.0}}, {0.5, 0.5}, {1.0, 1.0}), ConfigError);
}

TEST_CASE("standard normal at the mode") {
    // tau = 1 keeps the diffused variance alpha^2 + sigma^2 = 1 at every t
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = make_gmm({{0.0}}, {1.0}, {1.0});
    const double got = marginal_log_density(p, s, {0.0}, 0.5);
    CHECK(got == doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-12));
}

TEST_CASE("duplicated components degenerate to one") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto one = make_gmm({{0.3, -0.7}}, {1.0}, {0.4});
    const auto two = make_gmm({{0.3, -0.7}, {0.3, -0.7}}, {0.5, 0.5}, {0.4, 0.4});
    const Vec x = {0.9, 0.2};
    CHECK(marginal_log_density(one, s, x, 0.4) ==
          doctest::Approx(marginal_log_density(two, s, x, 0.4)).epsilon(1e-13));
}

TEST_CASE("log density matches naive summation for K = 2") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = make_gmm({{0.5, -0.5}, {-1.0, 1.0}}, {0.3, 0.7}, {0.5, 0.8});
    const Vec x = {0.2, 0.1};
    const double t = 0.5;
    // naive oracle without log-sum-exp
    const double a = s.alpha(t), sg2 = s.sigma(t) * s.sigma(t);
    double total = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
        const double s2 = a * a * p.stddevs[k] * p.stddevs[k] + sg2;
        double q = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            const double d = x[i] - a * p.means[k][i];
            q += d * d;
        }
        total += p.weights[k] * std::exp(-0.5 * q / s2) / (2.0 * std::numbers::pi * s2);
    }
    CHECK(marginal_log_density(p, s, x, t) == doctest::Approx(std::log(total)).epsilon(1e-12));
}

TEST_CASE("shape errors") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = make_gmm({{0.0, 0.0}}, {1.0}, {1.0});
    CHECK_THROWS_AS(marginal_log_density(p, s, {0.0}, 0.5), ShapeError);
    CHECK_THROWS_AS(score(p, s, {0.0, 0.0, 0.0}, 0.5), ShapeError);
}

TEST_CASE("single-component score closed form") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = make_gmm({{2.0}}, {1.0}, {1.0});
    // alpha = 0.8, sigma = 0.6: score = -(x - 1.6)/(0.64 + 0.36)
    const Vec got = score(p, s, {1.0}, kT08);
    CHECK(got[0] == doctest::Approx(0.6).epsilon(1e-12));
    // finite differences of the log density agree
    const Vec fd = testutil::fd_gradient(
        [&](const Vec& x) { return marginal_log_density(p, s, x, kT08); }, {1.0});
    CHECK(got[0] == doctest::Approx(fd[0]).epsilon(1e-7));
    // zero at the scaled mode
    const Vec at_mode = score(p, s, {1.6}, kT08);
    CHECK(std::fabs(at_mode[0]) < 1e-14);
}

TEST_CASE("score matches finite differences on random mixtures") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = random_mixture(3, 8, 7);
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec x = rng.normal_vec(8);
        const double t = 0.05 + 0.9 * rng.uniform();
        const Vec got = score(p, s, x, t);
        const Vec fd = testutil::fd_gradient(
            [&](const Vec& xx) { return marginal_log_density(p, s, xx, t); }, x);
        CHECK(testutil::rel_err(got, fd) < 1e-5);
    }
}

TEST_CASE("denoise closed form and quadrature oracle") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = make_gmm({{2.0}}, {1.0}, {1.0});
    const Vec got = denoise(p, s, {1.0}, kT08);
    // mu + (alpha tau^2 / (alpha^2 tau^2 + sigma^2)) (x - alpha mu) = 2 + 0.8*(-0.6)
    CHECK(got[0] == doctest::Approx(1.52).epsilon(1e-12));

    // numerical integration of the posterior mean
    const double a = 0.8, sg = 0.6, mu = 2.0, tau = 1.0, x = 1.0;
    double num = 0.0, den = 0.0;
    const int steps = 200000;
    for (int i = 0; i <= steps; ++i) {
        const double x0 = mu - 12.0 + 24.0 * i / steps;
        const double lik = std::exp(-0.5 * (x - a * x0) * (x - a * x0) / (sg * sg));
        const double pri = std::exp(-0.5 * (x0 - mu) * (x0 - mu) / (tau * tau));
        num += x0 * lik * pri;
        den += lik * pri;
    }
    CHECK(got[0] == doctest::Approx(num / den).epsilon(1e-6));
}

TEST_CASE("denoise limits") {
    const auto s = make_schedule(0.1, 20.0, 1e-8, 1.0, 3);
    const auto p = make_gmm({{2.0}}, {1.0}, {1.0});
    // noiseless limit: sigma -> 0 makes the posterior collapse onto x
    const Vec near = denoise(p, s, {0.37}, 1e-8);
    CHECK(std::fabs(near[0] - 0.37) < 1e-6);
    // point-mass prior: posterior mean pinned at the mean
    const auto pm = make_gmm({{2.0}}, {1.0}, {1e-8});
    const Vec pinned = denoise(pm, s, {-5.0}, 0.5);
    CHECK(pinned[0] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("denoise_vjp single component is a scalar multiple") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = make_gmm({{2.0, -1.0}}, {1.0}, {0.7});
    const double t = 0.5;
    const double a = s.alpha(t), sg2 = s.sigma(t) * s.sigma(t);
    const double coeff = a * 0.49 / (a * a * 0.49 + sg2);
    const Vec u = {0.3, -1.1};
    const Vec got = denoise_vjp(p, s, {0.5, 0.25}, t, u);
    CHECK(got[0] == doctest::Approx(coeff * u[0]).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(coeff * u[1]).epsilon(1e-12));

    const Vec zero = denoise_vjp(p, s, {0.5, 0.25}, t, {0.0, 0.0});
    CHECK(norm2(zero) == 0.0);
}

TEST_CASE("denoise_vjp matches finite differences on random mixtures") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = random_mixture(3, 8, 13);
    Rng rng(17);
    for (int rep = 0; rep < 20; ++rep) {
        const Vec x = rng.normal_vec(8);
        const Vec u = rng.normal_vec(8);
        const double t = 0.05 + 0.9 * rng.uniform();
        const Vec got = denoise_vjp(p, s, x, t, u);
        const Vec fd =
            testutil::fd_vjp([&](const Vec& xx) { return denoise(p, s, xx, t); }, x, u);
        CHECK(testutil::rel_err(got, fd) < 1e-5);
    }
}

TEST_CASE("tweedie identity ties score and denoise") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = random_mixture(4, 6, 23);
    Rng rng(29);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec x = rng.normal_vec(6);
        const double t = 0.05 + 0.9 * rng.uniform();
        const double a = s.alpha(t), sg2 = s.sigma(t) * s.sigma(t);
        const Vec den = denoise(p, s, x, t);
        const Vec sc = score(p, s, x, t);
        for (std::size_t i = 0; i < 6; ++i)
            CHECK(std::fabs(a * den[i] - x[i] - sg2 * sc[i]) < 1e-10);
    }
}

TEST_CASE("denoise_vjp linear in the cotangent") {
    const auto s = make_schedule(0.1, 20.0, 1e-3, 1.0, 3);
    const auto p = random_mixture(3, 5, 31);
    Rng rng(37);
    const Vec x = rng.normal_vec(5);
    const Vec u1 = rng.normal_vec(5), u2 = rng.normal_vec(5);
    const double a = 1.7, b = -0.4;
    const Vec lhs = denoise_vjp(p, s, x, 0.6, axpy(scaled(u1, a), b, u2));
    const Vec rhs = axpy(scaled(denoise_vjp(p, s, x, 0.6, u1), a), b,
                         denoise_vjp(p, s, x, 0.6, u2));
    CHECK(dist2(lhs, rhs) < 1e-12);
}

TEST_CASE("sample_prior determinism and degenerate scales") {
    const auto p = make_gmm({{1.0, -1.0}, {3.0, 0.0}}, {0.4, 0.6}, {1e-12, 1e-12});
    const auto a = sample_prior(p, 99, 50);
    const auto b = sample_prior(p, 99, 50);
    REQUIRE(a.size() == 50);
    for (int i = 0; i < 50; ++i) CHECK(a[i] == b[i]);
    for (const Vec& x : a) {
        const bool near_first = dist2(x, p.means[0]) < 1e-9;
        const bool near_second = dist2(x, p.means[1]) < 1e-9;
        CHECK((near_first || near_second));
    }
    CHECK_THROWS_AS(sample_prior(p, 1, 0), ConfigError);
}

TEST_CASE("sample_prior CLT bound for one component") {
    const double tau = 0.5;
    const auto p = make_gmm({{0.7, -0.2, 1.1}}, {1.0}, {tau});
    const auto draws = sample_prior(p, 2718, 10000);
    Vec mean(3, 0.0);
    for (const Vec& x : draws)
        for (int i = 0; i < 3; ++i) mean[i] += x[i];
    for (int i = 0; i < 3; ++i) {
        mean[i] /= 10000.0;
        CHECK(std::fabs(mean[i] - p.means[0][i]) < 4.0 * tau / 100.0);
    }
}

TEST_CASE("default_gmm is reproducible and in range") {
    const auto p = default_gmm(5, 16, 0.1, 7);
    const auto q = default_gmm(5, 16, 0.1, 7);
    REQUIRE(p.components() == 5);
    REQUIRE(p.dim() == 16);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(p.means[k] == q.means[k]);
        for (double v : p.means[k]) {
            CHECK(v <= 1.0);
            CHECK(v >= -1.0);
        }
    }
}

TEST_SUITE_END();
