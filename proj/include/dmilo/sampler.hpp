#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "dmilo/prior.hpp"
#include "dmilo/schedule.hpp"
#include "dmilo/vec.hpp"

namespace ilo {

// Counts simultaneously retained per-step differentiation contexts. One context is
// the forward state of a single sampling step held for gradient transport; the peak
// count is the portable stand-in for activation memory.
struct RetainedContextCounter {
    int current = 0;
    int peak = 0;

    void acquire() {
        ++current;
        peak = std::max(peak, current);
    }
    void release() { --current; }
    void reset() { current = 0; peak = 0; }
};

// RAII guard for one step context.
class StepContext {
  public:
    explicit StepContext(RetainedContextCounter* c) : counter_(c) {
        if (counter_) counter_->acquire();
    }
    ~StepContext() {
        if (counter_) counter_->release();
    }
    StepContext(const StepContext&) = delete;
    StepContext& operator=(const StepContext&) = delete;

  private:
    RetainedContextCounter* counter_;
};

// The i-th sampling step maps the latent at t_i to t_{i-1}, i in [1, N]:
//
//   g_i(x) = (sigma_{i-1}/sigma_i) x
//          + sigma_{i-1} (alpha_{i-1}/sigma_{i-1} - alpha_i/sigma_i) predict(x, t_i)
Vec ddim_step(const Schedule& s, const DenoiserInterface& d, int i, const Vec& x);

// u^T dg_i/dx.
Vec ddim_step_vjp(const Schedule& s, const DenoiserInterface& d, int i, const Vec& x, const Vec& u);

struct ComposeResult {
    Vec x0;
    std::vector<Vec> trace;  // latents after each step: x_{t_{N-1}}, ..., x_{t_0}
};

// Applies g_N, ..., g_1 starting from xT. With retain_all the counter acquires one
// context per step and releases none (full-graph mode, peak N); otherwise each step's
// context is acquired and released in turn (per-layer mode, peak 1).
ComposeResult sample_compose(const Schedule& s, const DenoiserInterface& d, const Vec& xT,
                             RetainedContextCounter* counter = nullptr, bool retain_all = false);

// Gradient of a scalar-valued function through the full composition: given the
// cotangent u at x0 = G(xT), transports it back to xT. Consumes (releases) the
// contexts acquired by a retain_all forward pass when a counter is supplied.
Vec compose_vjp(const Schedule& s, const DenoiserInterface& d, const Vec& xT,
                const std::vector<Vec>& trace, const Vec& u,
                RetainedContextCounter* counter = nullptr);

// Debug trace as CSV rows "step,latent_norm" (step N down to 1).
std::string trace_to_csv(const Schedule& s, const ComposeResult& r);

}  // namespace ilo
