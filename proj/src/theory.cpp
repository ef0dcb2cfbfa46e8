#include "dmilo/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "dmilo/errors.hpp"
#include "dmilo/prior.hpp"
#include "dmilo/rng.hpp"
#include "dmilo/sampler.hpp"
#include "dmilo/schedule.hpp"

namespace ilo {

std::vector<Vec> greedy_epsilon_net(const std::vector<Vec>& points, double eps) {
    if (!(eps > 0.0)) throw ConfigError("greedy_epsilon_net: eps must be > 0");
    std::vector<Vec> net;
    for (const Vec& p : points) {
        bool covered = false;
        for (const Vec& q : net) {
            if (dist2(p, q) <= eps) {
                covered = true;
                break;
            }
        }
        if (!covered) net.push_back(p);
    }
    return net;
}

namespace {

// Uniform draw from the l1-ball of radius r: exponential spacings with random
// signs, normalized by an extra exponential so the point lands inside the ball.
Vec sample_l1_ball(Rng& rng, int n, double r) {
    Vec g(static_cast<std::size_t>(n));
    double total = 0.0;
    for (double& v : g) {
        v = rng.exponential();
        total += v;
    }
    total += rng.exponential();
    Vec x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        x[static_cast<std::size_t>(i)] = sign * r * g[static_cast<std::size_t>(i)] / total;
    }
    return x;
}

}  // namespace

MaureyReport maurey_check(int n, double r, double L1, double delta, int samples,
                          std::uint64_t seed) {
    if (n < 1 || r < 0.0 || !(L1 > 0.0) || !(delta > 0.0) || samples < 1)
        throw ConfigError("maurey_check: invalid parameters");
    std::vector<Vec> pts;
    pts.reserve(static_cast<std::size_t>(samples));
    Rng rng(seed);
    for (int i = 0; i < samples; ++i) pts.push_back(sample_l1_ball(rng, n, r));
    const auto net = greedy_epsilon_net(pts, delta / L1);

    MaureyReport rep;
    rep.net_size = net.size();
    rep.log_net_size = std::log(static_cast<double>(net.size()));
    rep.bound = (r * r * L1 * L1 / (delta * delta)) * std::log(3.0 * n);
    rep.holds = rep.log_net_size <= rep.bound;
    return rep;
}

double srec_gamma(const ForwardOperator& A, const std::vector<Vec>& points, double delta) {
    if (points.size() < 2) throw DegenerateInputError("srec_gamma: need at least two points");
    // cache the measurements; the pair loop then touches only norms
    std::vector<Vec> images;
    images.reserve(points.size());
    for (const Vec& p : points) images.push_back(A.apply(p));

    double gamma = std::numeric_limits<double>::infinity();
    bool any_pair = false;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            double dn = 0.0;
            for (std::size_t c = 0; c < points[i].size(); ++c) {
                const double d = points[i][c] - points[j][c];
                dn += d * d;
            }
            if (dn <= 0.0) continue;  // coincident points carry no constraint
            double an = 0.0;
            for (std::size_t c = 0; c < images[i].size(); ++c) {
                const double d = images[i][c] - images[j][c];
                an += d * d;
            }
            gamma = std::min(gamma, (std::sqrt(an) + delta) / std::sqrt(dn));
            any_pair = true;
        }
    }
    if (!any_pair) throw DegenerateInputError("srec_gamma: all points coincide");
    return gamma;
}

ConcentrationReport concentration_check(int n, int m, double eps, int trials,
                                        std::uint64_t seed) {
    if (!(eps > 0.0) || !(eps < 1.0)) throw ConfigError("concentration_check: eps must be in (0,1)");
    if (n < 1 || m < 1 || trials < 1) throw ConfigError("concentration_check: invalid sizes");

    Rng xrng(derive_seed(seed, 0, /*tag=*/1));
    const Vec x = xrng.normal_vec(static_cast<std::size_t>(n));
    const double xn2 = dot(x, x);

    ConcentrationReport rep;
    rep.trials = trials;
    rep.bound = 2.0 * std::exp(-eps * eps * (1.0 - eps) * m / 4.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (int t = 0; t < trials; ++t) {
        Rng arng(derive_seed(seed, static_cast<std::uint64_t>(t) + 1, /*tag=*/2));
        double axn2 = 0.0;
        for (int i = 0; i < m; ++i) {
            double row_dot = 0.0;
            for (int j = 0; j < n; ++j)
                row_dot += scale * arng.normal() * x[static_cast<std::size_t>(j)];
            axn2 += row_dot * row_dot;
        }
        if (axn2 < (1.0 - eps) * xn2 || axn2 > (1.0 + eps) * xn2) ++rep.failures;
    }
    rep.failure_rate = static_cast<double>(rep.failures) / trials;
    rep.holds = rep.failure_rate <= rep.bound;
    return rep;
}

TheoryInstance make_toy_instance(int n, double delta, double k_param, std::uint64_t seed,
                                 int latent_grid) {
    if (n < 1 || !(delta > 0.0) || !(k_param > 0.0) || latent_grid < 2)
        throw ConfigError("make_toy_instance: invalid parameters");

    // g2: tanh(W z + b) from the latent box [-1, 1]^2
    Rng rng(derive_seed(seed, 0, /*tag=*/3));
    auto W = std::make_shared<std::vector<Vec>>();
    for (int i = 0; i < n; ++i) W->push_back(rng.normal_vec(2));
    auto b = std::make_shared<Vec>(rng.normal_vec(static_cast<std::size_t>(n)));
    for (double& v : *b) v *= 0.3;

    TheoryInstance inst;
    inst.n = n;
    inst.delta = delta;
    inst.latent_grid = latent_grid;
    inst.g2 = [W, b, n](const Vec& z) {
        if (z.size() != 2) throw ShapeError("toy g2: latent dimension must be 2");
        Vec out(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            out[static_cast<std::size_t>(i)] =
                std::tanh((*W)[static_cast<std::size_t>(i)][0] * z[0] +
                          (*W)[static_cast<std::size_t>(i)][1] * z[1] + (*b)[static_cast<std::size_t>(i)]);
        return out;
    };

    // g1: one sampling step of a single-Gaussian prior; affine, so its Lipschitz
    // constant is the absolute slope of the scalar step map
    auto sched = std::make_shared<Schedule>(make_schedule(0.1, 20.0, 1e-3, 1.0, 3));
    Vec mean(static_cast<std::size_t>(n), 0.0);
    const double tau = 0.5;
    auto prior = std::make_shared<GmmPrior>(
        make_gmm({mean}, Vec{1.0}, Vec{tau}));
    auto den = std::make_shared<DenoiserInterface>(make_denoiser(*prior, *sched));
    inst.g1 = [sched, den](const Vec& v) { return ddim_step(*sched, *den, 1, v); };

    const double t1 = sched->grid[1], t0 = sched->grid[0];
    const double a1 = sched->alpha(t1), s1 = sched->sigma(t1);
    const double a0 = sched->alpha(t0), s0 = sched->sigma(t0);
    const double jac = a1 * tau * tau / (a1 * a1 * tau * tau + s1 * s1);
    inst.L1 = std::fabs(s0 / s1 + s0 * (a0 / s0 - a1 / s1) * jac);
    inst.r = k_param * delta / inst.L1;
    return inst;
}

std::vector<Vec> l1_ball_discretization(int n, double r) {
    std::vector<Vec> base;
    base.push_back(zeros(static_cast<std::size_t>(n)));
    for (int i = 0; i < n; ++i) {
        for (double sign : {1.0, -1.0}) {
            Vec v = zeros(static_cast<std::size_t>(n));
            v[static_cast<std::size_t>(i)] = sign * r;
            base.push_back(v);
        }
    }
    std::vector<Vec> out = base;
    for (std::size_t i = 0; i < base.size(); ++i)
        for (std::size_t j = i + 1; j < base.size(); ++j)
            out.push_back(scaled(add(base[i], base[j]), 0.5));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

Theorem1Report theorem1_check(const TheoryInstance& inst, const ForwardOperator& A,
                              const Vec& xstar, std::size_t max_candidates) {
    const int G = inst.latent_grid;
    const auto ball = l1_ball_discretization(inst.n, inst.r);
    const std::size_t total = static_cast<std::size_t>(G) * static_cast<std::size_t>(G) * ball.size();
    if (total > max_candidates)
        throw ConfigError("theorem1_check: candidate budget exceeded (" + std::to_string(total) +
                          " > " + std::to_string(max_candidates) + ")");

    std::vector<Vec> images;
    images.reserve(total);
    for (int zi = 0; zi < G; ++zi) {
        for (int zj = 0; zj < G; ++zj) {
            const Vec z = {-1.0 + 2.0 * zi / (G - 1), -1.0 + 2.0 * zj / (G - 1)};
            const Vec base = inst.g2(z);
            for (const Vec& dev : ball) images.push_back(inst.g1(add(base, dev)));
        }
    }

    const Vec ax_star = A.apply(xstar);
    std::size_t best_idx = 0, meas_idx = 0;
    double best_val = std::numeric_limits<double>::infinity();
    double meas_val = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < images.size(); ++c) {
        const double dv = dist2(images[c], xstar);
        if (dv < best_val) {
            best_val = dv;
            best_idx = c;
        }
        const double mv = dist2(A.apply(images[c]), ax_star);
        if (mv < meas_val) {
            meas_val = mv;
            meas_idx = c;
        }
    }

    Theorem1Report rep;
    rep.candidates = total;
    rep.gamma = srec_gamma(A, images, inst.delta);
    rep.best_residual = dist2(images[best_idx], xstar);
    rep.measured_residual = dist2(images[meas_idx], xstar);
    rep.rhs = (1.0 + 3.0 / rep.gamma) * rep.best_residual + inst.delta / rep.gamma;
    rep.holds = rep.measured_residual <= rep.rhs;
    return rep;
}

}  // namespace ilo
