#pragma once

#include <vector>

#include "dmilo/errors.hpp"

namespace ilo {

// Variance-preserving diffusion schedule on [epsilon, T] with a uniform time grid
// t_0 = epsilon < t_1 < ... < t_N = T.
//
//   alpha(t) = exp(-(beta0*t + (beta1-beta0)*t^2/2) / 2),  sigma(t) = sqrt(1 - alpha(t)^2)
//
// so alpha^2 + sigma^2 = 1 everywhere and the signal-to-noise ratio alpha^2/sigma^2
// is strictly decreasing in t.
struct Schedule {
    double beta0 = 0.1;
    double beta1 = 20.0;
    double epsilon = 1e-3;
    double T = 1.0;
    int N = 3;
    std::vector<double> grid;  // N+1 entries

    double alpha(double t) const;
    double sigma(double t) const;
};

Schedule make_schedule(double beta0, double beta1, double epsilon, double T, int N);

// log(alpha(t)/sigma(t)); strictly decreasing in t. t must lie in [epsilon, T].
double half_log_snr(const Schedule& s, double t);

}  // namespace ilo
