#include "dmilo/schedule.hpp"

#include <cmath>
#include <string>

namespace ilo {

double Schedule::alpha(double t) const {
    return std::exp(-0.5 * (beta0 * t + 0.5 * (beta1 - beta0) * t * t));
}

double Schedule::sigma(double t) const {
    // expm1 keeps sigma accurate near t = 0 where alpha -> 1
    return std::sqrt(-std::expm1(-(beta0 * t + 0.5 * (beta1 - beta0) * t * t)));
}

Schedule make_schedule(double beta0, double beta1, double epsilon, double T, int N) {
    if (N < 1) throw ConfigError("make_schedule: N must be >= 1, got " + std::to_string(N));
    if (!(epsilon > 0.0) || !(epsilon < T))
        throw ConfigError("make_schedule: need 0 < epsilon < T");
    if (!(beta0 > 0.0) || !(beta0 < beta1))
        throw ConfigError("make_schedule: need 0 < beta0 < beta1");

    Schedule s;
    s.beta0 = beta0;
    s.beta1 = beta1;
    s.epsilon = epsilon;
    s.T = T;
    s.N = N;
    s.grid.resize(static_cast<std::size_t>(N) + 1);
    for (int i = 0; i <= N; ++i)
        s.grid[static_cast<std::size_t>(i)] = epsilon + (T - epsilon) * static_cast<double>(i) / N;
    s.grid.back() = T;
    return s;
}

double half_log_snr(const Schedule& s, double t) {
    if (t < s.epsilon || t > s.T)
        throw DomainError("half_log_snr: t=" + std::to_string(t) + " outside [" +
                          std::to_string(s.epsilon) + ", " + std::to_string(s.T) + "]");
    return std::log(s.alpha(t) / s.sigma(t));
}

}  // namespace ilo
