#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dmilo/operators.hpp"
#include "dmilo/vec.hpp"

namespace ilo {

// Greedy cover: a point joins the net iff it is more than eps from every current
// net point. Every input ends within eps of the net; net points are > eps apart.
std::vector<Vec> greedy_epsilon_net(const std::vector<Vec>& points, double eps);

struct MaureyReport {
    std::size_t net_size = 0;
    double log_net_size = 0.0;
    double bound = 0.0;  // (r^2 L1^2 / delta^2) log(3n)
    bool holds = false;
};

// Samples the l1-ball B_1^n(r), builds a greedy (delta/L1)-net of the samples and
// compares its log-cardinality against the Maurey covering bound.
MaureyReport maurey_check(int n, double r, double L1, double delta, int samples,
                          std::uint64_t seed);

// Largest gamma for which the point set satisfies S-REC(., gamma, delta):
// min over distinct pairs of (||A(s1 - s2)|| + delta) / ||s1 - s2||.
double srec_gamma(const ForwardOperator& A, const std::vector<Vec>& points, double delta);

struct ConcentrationReport {
    int failures = 0;
    int trials = 0;
    double failure_rate = 0.0;
    double bound = 0.0;  // 2 exp(-eps^2 (1 - eps) m / 4)
    bool holds = false;
};

// Fixes one random x, then over seeded trials draws A with i.i.d. N(0, 1/m) entries
// and tests (1 - eps) ||x||^2 <= ||A x||^2 <= (1 + eps) ||x||^2.
ConcentrationReport concentration_check(int n, int m, double eps, int trials,
                                        std::uint64_t seed);

// Tiny two-layer generator for the bound oracle: g2 maps the latent box [-1,1]^2
// into R^n (affine + tanh, intrinsic dimension 2 by construction) and g1 is an
// affine sampling step whose Lipschitz constant is exact.
struct TheoryInstance {
    std::function<Vec(const Vec&)> g2;
    std::function<Vec(const Vec&)> g1;
    double L1 = 0.0;
    double r = 0.0;      // l1-ball radius, r = k * delta / L1
    double delta = 0.0;
    int latent_grid = 8; // grid resolution per latent axis
    int n = 0;
};

TheoryInstance make_toy_instance(int n, double delta, double k_param, std::uint64_t seed,
                                 int latent_grid = 8);

// Cross-polytope vertices scaled to radius r, the origin, and one level of pairwise
// midpoints (deduplicated).
std::vector<Vec> l1_ball_discretization(int n, double r);

struct Theorem1Report {
    double best_residual = 0.0;     // ||g1(xbar) - xstar||, true optimum
    double measured_residual = 0.0; // ||g1(xhat) - xstar||, measurement optimum
    double gamma = 0.0;             // empirical S-REC constant of g1(extended range)
    double rhs = 0.0;               // (1 + 3/gamma) best + delta/gamma
    bool holds = false;
    std::size_t candidates = 0;
};

// Brute-forces both optima over the discretized extended range X2 + B_1^n(r) and
// checks ||g1(xhat) - xstar|| <= (1 + 3/gamma) ||g1(xbar) - xstar|| + delta/gamma.
// Argmin ties break toward the first candidate in enumeration order.
Theorem1Report theorem1_check(const TheoryInstance& inst, const ForwardOperator& A,
                              const Vec& xstar, std::size_t max_candidates = 1000000);

}  // namespace ilo
