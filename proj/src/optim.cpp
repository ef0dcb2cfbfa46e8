#include "dmilo/optim.hpp"

#include <cmath>

#include "dmilo/errors.hpp"

namespace ilo {

void adam_step(AdamState& st, Vec& params, const Vec& grad) {
    check_same_dim(params, grad, "adam_step");
    check_same_dim(params, st.first_moment, "adam_step state");
    ++st.step_count;
    const double c1 = 1.0 - std::pow(st.beta_1, static_cast<double>(st.step_count));
    const double c2 = 1.0 - std::pow(st.beta_2, static_cast<double>(st.step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.first_moment[i] = st.beta_1 * st.first_moment[i] + (1.0 - st.beta_1) * grad[i];
        st.second_moment[i] = st.beta_2 * st.second_moment[i] + (1.0 - st.beta_2) * grad[i] * grad[i];
        const double mhat = st.first_moment[i] / c1;
        const double vhat = st.second_moment[i] / c2;
        params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps_stab);
    }
}

Vec soft_threshold(const Vec& v, double kappa) {
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double mag = std::fabs(v[i]) - kappa;
        out[i] = mag > 0.0 ? (v[i] > 0.0 ? mag : -mag) : 0.0;
    }
    return out;
}

namespace {

inline double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

InnerResult solve_inner(const InnerProblem& p, const Vec& x0, const Vec& nu0, InnerMode mode) {
    InnerResult r;
    r.x = x0;
    r.nu = nu0;
    r.loss_trace.reserve(static_cast<std::size_t>(p.iters));

    AdamState st_x(x0.size(), p.lr);
    AdamState st_nu(nu0.size(), p.lr);

    for (int it = 1; it <= p.iters; ++it) {
        const Vec fx = p.apply(r.x, r.nu);
        check_same_dim(fx, p.target, "solve_inner");
        Vec resid(fx.size());
        double fit = 0.0;
        for (std::size_t i = 0; i < fx.size(); ++i) {
            resid[i] = fx[i] - p.target[i];
            fit += resid[i] * resid[i];
        }
        // d/dv ||F - target||^2 = 2 * vjp(resid)
        const Vec cot = scaled(resid, 2.0);
        Vec gx = p.vjp_x(r.x, r.nu, cot);
        Vec gnu = p.vjp_nu(r.x, r.nu, cot);
        if (p.l2_weight > 0.0)
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * p.l2_weight * r.x[i];
        if (mode == InnerMode::Subgradient && p.lambda > 0.0)
            for (std::size_t i = 0; i < gnu.size(); ++i) gnu[i] += p.lambda * sign0(r.nu[i]);

        // objective at the current iterate, before the update
        double loss = fit + p.lambda * norm1(r.nu);
        if (p.l2_weight > 0.0) loss += p.l2_weight * dot(r.x, r.x);
        r.loss_trace.push_back(loss);
        if (!std::isfinite(loss))
            throw DivergenceError("solve_inner: non-finite loss at iteration " + std::to_string(it),
                                  it);

        adam_step(st_x, r.x, gx);
        adam_step(st_nu, r.nu, gnu);
        if (mode == InnerMode::Proximal && p.lambda > 0.0)
            r.nu = soft_threshold(r.nu, p.lr * p.lambda);
    }
    return r;
}

InnerProblem additive_inner(Vec target,
                            std::function<Vec(const Vec&)> map_apply,
                            std::function<Vec(const Vec&, const Vec&)> map_vjp) {
    InnerProblem p;
    p.target = std::move(target);
    p.apply = [map_apply](const Vec& x, const Vec& nu) { return add(map_apply(x), nu); };
    p.vjp_x = [map_vjp](const Vec& x, const Vec&, const Vec& u) { return map_vjp(x, u); };
    p.vjp_nu = [](const Vec&, const Vec&, const Vec& u) { return u; };
    return p;
}

}  // namespace ilo
