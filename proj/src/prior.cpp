#include "dmilo/prior.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dmilo/errors.hpp"
#include "dmilo/rng.hpp"

namespace ilo {

namespace {

struct MixtureAtTime {
    double alpha;
    double sigma2;
    Vec log_comp;   // per-component log(w_k) + log N(x; alpha mu_k, s_k^2 I)
    Vec inv_s2;     // 1 / (alpha^2 tau_k^2 + sigma^2)
    double log_density;
    Vec resp;       // softmax responsibilities
};

MixtureAtTime eval_mixture(const GmmPrior& p, const Schedule& s, const Vec& x, double t) {
    const std::size_t K = p.components();
    const std::size_t n = p.dim();
    if (x.size() != n)
        throw ShapeError("prior: x has dimension " + std::to_string(x.size()) +
                         ", prior has " + std::to_string(n));

    MixtureAtTime m;
    m.alpha = s.alpha(t);
    const double sig = s.sigma(t);
    m.sigma2 = sig * sig;
    m.log_comp.resize(K);
    m.inv_s2.resize(K);

    constexpr double log_2pi = 1.8378770664093454836;  // log(2*pi)
    for (std::size_t k = 0; k < K; ++k) {
        const double s2 = m.alpha * m.alpha * p.stddevs[k] * p.stddevs[k] + m.sigma2;
        m.inv_s2[k] = 1.0 / s2;
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = x[i] - m.alpha * p.means[k][i];
            q += d * d;
        }
        m.log_comp[k] = std::log(p.weights[k]) -
                        0.5 * static_cast<double>(n) * (log_2pi + std::log(s2)) -
                        0.5 * q * m.inv_s2[k];
    }

    // log-sum-exp; responsibilities underflow at small t without it
    const double mx = *std::max_element(m.log_comp.begin(), m.log_comp.end());
    double acc = 0.0;
    for (double lc : m.log_comp) acc += std::exp(lc - mx);
    m.log_density = mx + std::log(acc);

    m.resp.resize(K);
    for (std::size_t k = 0; k < K; ++k) m.resp[k] = std::exp(m.log_comp[k] - m.log_density);
    return m;
}

}  // namespace

GmmPrior make_gmm(std::vector<Vec> means, Vec weights, Vec stddevs) {
    if (means.empty() || weights.size() != means.size() || stddevs.size() != means.size())
        throw ConfigError("make_gmm: weights/means/stddevs must have equal nonzero length");
    const std::size_t n = means.front().size();
    double sum = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (!(weights[k] > 0.0)) throw ConfigError("make_gmm: weights must be strictly positive");
        if (!(stddevs[k] > 0.0)) throw ConfigError("make_gmm: stddevs must be strictly positive");
        if (means[k].size() != n) throw ConfigError("make_gmm: means must share one dimension");
        sum += weights[k];
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw ConfigError("make_gmm: weights must sum to 1");
    return GmmPrior{std::move(weights), std::move(means), std::move(stddevs)};
}

GmmPrior default_gmm(int K, int n, double tau, std::uint64_t seed) {
    if (K < 1 || n < 1 || !(tau > 0.0)) throw ConfigError("default_gmm: need K >= 1, n >= 1, tau > 0");
    Rng rng(derive_seed(seed, 0, /*tag=*/0x6d65616e73ULL));  // "means"
    std::vector<Vec> means(static_cast<std::size_t>(K));
    double max_abs = 0.0;
    for (auto& mu : means) {
        mu = rng.normal_vec(static_cast<std::size_t>(n));
        for (double v : mu) max_abs = std::max(max_abs, std::fabs(v));
    }
    if (max_abs > 0.0)
        for (auto& mu : means)
            for (double& v : mu) v /= max_abs;
    Vec w(static_cast<std::size_t>(K), 1.0 / K);
    Vec taus(static_cast<std::size_t>(K), tau);
    // renormalize exactly; 1/K * K may miss 1.0 by an ulp
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return make_gmm(std::move(means), std::move(w), std::move(taus));
}

double marginal_log_density(const GmmPrior& p, const Schedule& s, const Vec& x, double t) {
    return eval_mixture(p, s, x, t).log_density;
}

Vec score(const GmmPrior& p, const Schedule& s, const Vec& x, double t) {
    const auto m = eval_mixture(p, s, x, t);
    const std::size_t n = x.size();
    Vec g(n, 0.0);
    for (std::size_t k = 0; k < p.components(); ++k) {
        const double c = m.resp[k] * m.inv_s2[k];
        for (std::size_t i = 0; i < n; ++i) g[i] -= c * (x[i] - m.alpha * p.means[k][i]);
    }
    return g;
}

Vec denoise(const GmmPrior& p, const Schedule& s, const Vec& x, double t) {
    const double a = s.alpha(t);
    if (a == 0.0) throw DomainError("denoise: alpha(t) = 0");
    const double sig2 = s.sigma(t) * s.sigma(t);
    const Vec sc = score(p, s, x, t);
    Vec out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] + sig2 * sc[i]) / a;
    return out;
}

Vec denoise_vjp(const GmmPrior& p, const Schedule& s, const Vec& x, double t, const Vec& u) {
    check_same_dim(x, u, "denoise_vjp");
    const auto m = eval_mixture(p, s, x, t);
    const double a = m.alpha;
    if (a == 0.0) throw DomainError("denoise_vjp: alpha(t) = 0");
    const std::size_t n = x.size();
    const std::size_t K = p.components();

    // score Jacobian H = sum_k r_k m_k m_k^T - sbar sbar^T - (sum_k r_k / s_k^2) I,
    // with m_k = -(x - alpha mu_k)/s_k^2 and sbar = sum_k r_k m_k. H is symmetric,
    // so u^T H = H u, computable in O(K n).
    Vec sbar(n, 0.0);
    std::vector<Vec> mk(K, Vec(n));
    double trace_coeff = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            mk[k][i] = -(x[i] - a * p.means[k][i]) * m.inv_s2[k];
            sbar[i] += m.resp[k] * mk[k][i];
        }
        trace_coeff += m.resp[k] * m.inv_s2[k];
    }
    Vec hu(n, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const double mu_dot_u = dot(mk[k], u);
        for (std::size_t i = 0; i < n; ++i) hu[i] += m.resp[k] * mu_dot_u * mk[k][i];
    }
    const double sbar_dot_u = dot(sbar, u);
    for (std::size_t i = 0; i < n; ++i) hu[i] -= sbar_dot_u * sbar[i] + trace_coeff * u[i];

    // d(denoise)/dx = (I + sigma^2 H) / alpha
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (u[i] + m.sigma2 * hu[i]) / a;
    return out;
}

std::vector<Vec> sample_prior(const GmmPrior& p, std::uint64_t seed, int count) {
    if (count < 1) throw ConfigError("sample_prior: count must be >= 1");
    Rng rng(seed);
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c) {
        const std::size_t k = rng.categorical(p.weights);
        Vec x = p.means[k];
        for (double& v : x) v += p.stddevs[k] * rng.normal();
        out.push_back(std::move(x));
    }
    return out;
}

DenoiserInterface make_denoiser(const GmmPrior& p, const Schedule& s) {
    // captured by value so the interface owns its coefficients
    DenoiserInterface d;
    d.predict = [p, s](const Vec& x, double t) { return denoise(p, s, x, t); };
    d.vjp = [p, s](const Vec& x, double t, const Vec& u) { return denoise_vjp(p, s, x, t, u); };
    return d;
}

}  // namespace ilo
