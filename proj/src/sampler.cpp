#include "dmilo/sampler.hpp"

#include <cstdio>
#include <string>

#include "dmilo/errors.hpp"

namespace ilo {

namespace {

struct StepCoeffs {
    double ratio;  // sigma_{i-1} / sigma_i
    double gain;   // sigma_{i-1} (alpha_{i-1}/sigma_{i-1} - alpha_i/sigma_i)
    double t_i;
};

StepCoeffs step_coeffs(const Schedule& s, int i) {
    if (i < 1 || i > s.N)
        throw DomainError("sampler: step index " + std::to_string(i) + " outside [1, " +
                          std::to_string(s.N) + "]");
    const double t_prev = s.grid[static_cast<std::size_t>(i) - 1];
    const double t_cur = s.grid[static_cast<std::size_t>(i)];
    const double a_prev = s.alpha(t_prev), sg_prev = s.sigma(t_prev);
    const double a_cur = s.alpha(t_cur), sg_cur = s.sigma(t_cur);
    if (sg_cur == 0.0) throw DomainError("sampler: sigma(t_i) = 0");
    return {sg_prev / sg_cur, sg_prev * (a_prev / sg_prev - a_cur / sg_cur), t_cur};
}

}  // namespace

Vec ddim_step(const Schedule& s, const DenoiserInterface& d, int i, const Vec& x) {
    const auto c = step_coeffs(s, i);
    const Vec pred = d.predict(x, c.t_i);
    check_same_dim(x, pred, "ddim_step");
    Vec out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = c.ratio * x[j] + c.gain * pred[j];
    return out;
}

Vec ddim_step_vjp(const Schedule& s, const DenoiserInterface& d, int i, const Vec& x,
                  const Vec& u) {
    check_same_dim(x, u, "ddim_step_vjp");
    const auto c = step_coeffs(s, i);
    const Vec dv = d.vjp(x, c.t_i, u);
    Vec out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = c.ratio * u[j] + c.gain * dv[j];
    return out;
}

ComposeResult sample_compose(const Schedule& s, const DenoiserInterface& d, const Vec& xT,
                             RetainedContextCounter* counter, bool retain_all) {
    ComposeResult r;
    r.trace.reserve(static_cast<std::size_t>(s.N));
    Vec x = xT;
    for (int i = s.N; i >= 1; --i) {
        if (retain_all) {
            if (counter) counter->acquire();
            x = ddim_step(s, d, i, x);
        } else {
            StepContext ctx(counter);
            x = ddim_step(s, d, i, x);
        }
        r.trace.push_back(x);
    }
    r.x0 = x;
    return r;
}

std::string trace_to_csv(const Schedule& s, const ComposeResult& r) {
    std::string out = "step,latent_norm\n";
    char buf[48];
    for (std::size_t j = 0; j < r.trace.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g\n", s.N - static_cast<int>(j),
                      norm2(r.trace[j]));
        out += buf;
    }
    return out;
}

Vec compose_vjp(const Schedule& s, const DenoiserInterface& d, const Vec& xT,
                const std::vector<Vec>& trace, const Vec& u,
                RetainedContextCounter* counter) {
    if (trace.size() != static_cast<std::size_t>(s.N))
        throw ShapeError("compose_vjp: trace length " + std::to_string(trace.size()) +
                         " != N = " + std::to_string(s.N));
    // trace[N-i] holds the input to step i for i < N; step N's input is xT
    Vec cot = u;
    for (int i = 1; i <= s.N; ++i) {
        const Vec& input = (i == s.N) ? xT : trace[static_cast<std::size_t>(s.N - i) - 1];
        cot = ddim_step_vjp(s, d, i, input, cot);
        if (counter) counter->release();
    }
    return cot;
}

}  // namespace ilo
