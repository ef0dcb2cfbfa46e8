#pragma once

#include <functional>
#include <string>

#include "dmilo/vec.hpp"

namespace ilo {

// Per-variable Adam state with bias correction.
struct AdamState {
    Vec first_moment;
    Vec second_moment;
    long step_count = 0;
    double lr = 0.02;
    double beta_1 = 0.9;
    double beta_2 = 0.999;
    double eps_stab = 1e-8;

    explicit AdamState(std::size_t n, double lr = 0.02)
        : first_moment(n, 0.0), second_moment(n, 0.0), lr(lr) {}
};

// One bias-corrected Adam update of params in place.
void adam_step(AdamState& st, Vec& params, const Vec& grad);

// Elementwise sign(v) * max(|v| - kappa, 0).
Vec soft_threshold(const Vec& v, double kappa);

enum class InnerMode { Subgradient, Proximal };

// The per-layer subproblem
//
//   min_{x, nu}  || target - F(x, nu) ||_2^2 + lambda ||nu||_1 + l2_weight ||x||_2^2
//
// where F carries the deviation through the layer map: F(x, nu) = g_i(x) + nu for
// interior layers and F(x, nu) = A(g_1(x) + nu) for the measurement layer. Both
// variables are updated jointly by Adam from the supplied warm starts.
struct InnerProblem {
    Vec target;
    std::function<Vec(const Vec&, const Vec&)> apply;                 // F(x, nu)
    std::function<Vec(const Vec&, const Vec&, const Vec&)> vjp_x;     // u^T dF/dx
    std::function<Vec(const Vec&, const Vec&, const Vec&)> vjp_nu;    // u^T dF/dnu
    double lambda = 0.1;
    double l2_weight = 0.0;
    int iters = 200;
    double lr = 0.02;
};

struct InnerResult {
    Vec x;
    Vec nu;
    Vec loss_trace;  // objective value at each iteration, after the update
};

// Subgradient mode differentiates lambda||nu||_1 via sign(nu) (0 at 0) inside the
// Adam gradient; proximal mode Adam-steps the smooth part and then applies
// soft_threshold(nu, lr*lambda). Throws DivergenceError on a non-finite loss.
InnerResult solve_inner(const InnerProblem& p, const Vec& x0, const Vec& nu0, InnerMode mode);

// Convenience: F(x, nu) = M(x) + nu for a layer map M with a vjp.
InnerProblem additive_inner(Vec target,
                            std::function<Vec(const Vec&)> map_apply,
                            std::function<Vec(const Vec&, const Vec&)> map_vjp);

}  // namespace ilo
