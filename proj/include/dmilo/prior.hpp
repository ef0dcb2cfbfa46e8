#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dmilo/schedule.hpp"
#include "dmilo/vec.hpp"

namespace ilo {

// Isotropic Gaussian-mixture data prior: p_0 = sum_k w_k N(mu_k, tau_k^2 I).
// The diffused marginal at time t is the mixture of N(alpha_t mu_k, (alpha_t^2 tau_k^2 + sigma_t^2) I),
// which keeps the score, the posterior mean E[x_0 | x_t] and its Jacobian in closed form.
struct GmmPrior {
    Vec weights;            // K positive entries summing to 1
    std::vector<Vec> means; // K vectors of shared dimension n
    Vec stddevs;            // K per-component scales tau_k > 0

    std::size_t components() const { return weights.size(); }
    std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
};

// Validates the mixture invariants (positive weights summing to 1, shared mean
// dimension, positive scales). Throws ConfigError on violation.
GmmPrior make_gmm(std::vector<Vec> means, Vec weights, Vec stddevs);

// The toy experiment prior: K means drawn once from a seeded standard normal and
// rescaled so every coordinate lies in [-1, 1]; uniform weights; shared scale tau.
GmmPrior default_gmm(int K, int n, double tau, std::uint64_t seed);

double marginal_log_density(const GmmPrior& p, const Schedule& s, const Vec& x, double t);

// Exact gradient of marginal_log_density in x.
Vec score(const GmmPrior& p, const Schedule& s, const Vec& x, double t);

// Posterior mean E[x_0 | x_t = x] via the Tweedie identity
// denoise = (x + sigma_t^2 * score(x, t)) / alpha_t.
Vec denoise(const GmmPrior& p, const Schedule& s, const Vec& x, double t);

// u^T d(denoise)/dx using the closed-form mixture score Jacobian.
Vec denoise_vjp(const GmmPrior& p, const Schedule& s, const Vec& x, double t, const Vec& u);

// i.i.d. draws from p_0; deterministic given seed.
std::vector<Vec> sample_prior(const GmmPrior& p, std::uint64_t seed, int count);

// What the samplers and solvers consume: the data-prediction map x |-> E[x_0 | x_t = x]
// and its vector-Jacobian product.
struct DenoiserInterface {
    std::function<Vec(const Vec&, double)> predict;
    std::function<Vec(const Vec&, double, const Vec&)> vjp;
};

DenoiserInterface make_denoiser(const GmmPrior& p, const Schedule& s);

}  // namespace ilo
