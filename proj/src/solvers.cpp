#include "dmilo/solvers.hpp"

#include <cmath>
#include <string>

#include "dmilo/errors.hpp"
#include "dmilo/rng.hpp"

namespace ilo {

namespace {

// Shared per-run machinery for the chain solvers: layer subproblems, re-synthesis,
// and retained-context bookkeeping.
struct ChainRun {
    const Schedule& s;
    const DenoiserInterface& d;
    const SolverOptions& cfg;
    RetainedContextCounter counter;
    SolverState st;
    double chain_error = 0.0;

    ChainRun(const Schedule& s, const DenoiserInterface& d, const SolverOptions& cfg, int n,
             Rng& rng)
        : s(s), d(d), cfg(cfg) {
        const int N = s.N;
        st.latents.assign(static_cast<std::size_t>(N), Vec());
        st.deviations.assign(static_cast<std::size_t>(N), zeros(static_cast<std::size_t>(n)));
        st.latents[static_cast<std::size_t>(N) - 1] = rng.normal_vec(static_cast<std::size_t>(n));
        for (int i = N; i >= 2; --i) {
            StepContext ctx(&counter);
            st.latents[static_cast<std::size_t>(i) - 2] =
                ddim_step(s, d, i, st.latents[static_cast<std::size_t>(i) - 1]);
        }
        {
            StepContext ctx(&counter);
            st.estimate = ddim_step(s, d, 1, st.latents[0]);
        }
    }

    Vec& latent(int i) { return st.latents[static_cast<std::size_t>(i) - 1]; }
    Vec& deviation(int i) { return st.deviations[static_cast<std::size_t>(i) - 1]; }

    // Solves one layer subproblem, warm-started at the stored (x_{t_i}, nu_{t_i}).
    // The layer map is wrapped so gradient transport holds exactly one step context.
    void solve_layer(int i, InnerProblem p, int outer) {
        p.lambda = cfg.lambda;
        p.iters = cfg.inner_iters;
        p.lr = cfg.inner_lr;
        if (!cfg.sparse_deviations) {
            // ablation: nu stays frozen at its (zero) warm start
            p.vjp_nu = [](const Vec&, const Vec&, const Vec& u) { return zeros(u.size()); };
        }
        try {
            InnerResult r = solve_inner(p, latent(i), deviation(i), cfg.mode);
            latent(i) = std::move(r.x);
            deviation(i) = std::move(r.nu);
        } catch (const DivergenceError& e) {
            throw DivergenceError("inner solve diverged (layer " + std::to_string(i) + ", outer " +
                                      std::to_string(outer) + "): " + e.what(),
                                  e.iteration, i, outer);
        }
    }

    // min_{x,nu} ||x_{t_{i-1}} - (g_i(x) + nu)||^2 + lambda ||nu||_1, i >= 2
    void solve_interior_layer(int i, int outer) {
        InnerProblem p;
        p.target = latent(i - 1);
        p.l2_weight = 0.0;
        auto* ctr = &counter;
        const Schedule* sp = &s;
        const DenoiserInterface* dp = &d;
        p.apply = [sp, dp, ctr, i](const Vec& x, const Vec& nu) {
            StepContext ctx(ctr);
            return add(ddim_step(*sp, *dp, i, x), nu);
        };
        p.vjp_x = [sp, dp, ctr, i](const Vec& x, const Vec&, const Vec& u) {
            StepContext ctx(ctr);
            return ddim_step_vjp(*sp, *dp, i, x, u);
        };
        p.vjp_nu = [](const Vec&, const Vec&, const Vec& u) { return u; };
        solve_layer(i, std::move(p), outer);
    }

    // min_{x,nu} ||target_y - A(g_1(x) + nu)||^2 + lambda ||nu||_1 + l2 ||x||^2
    void solve_measurement_layer(const Vec& target_y, const ForwardOperator& A, int outer) {
        InnerProblem p;
        p.target = target_y;
        p.l2_weight = cfg.l2_weight;
        auto* ctr = &counter;
        const Schedule* sp = &s;
        const DenoiserInterface* dp = &d;
        const ForwardOperator* Ap = &A;
        p.apply = [sp, dp, ctr, Ap](const Vec& x, const Vec& nu) {
            StepContext ctx(ctr);
            return Ap->apply(add(ddim_step(*sp, *dp, 1, x), nu));
        };
        p.vjp_x = [sp, dp, ctr, Ap](const Vec& x, const Vec& nu, const Vec& u) {
            StepContext ctx(ctr);
            const Vec signal = add(ddim_step(*sp, *dp, 1, x), nu);
            return ddim_step_vjp(*sp, *dp, 1, x, Ap->vjp(signal, u));
        };
        p.vjp_nu = [sp, dp, ctr, Ap](const Vec& x, const Vec& nu, const Vec& u) {
            StepContext ctx(ctr);
            const Vec signal = add(ddim_step(*sp, *dp, 1, x), nu);
            return Ap->vjp(signal, u);
        };
        solve_layer(1, std::move(p), outer);
    }

    // x_{t_{i-1}} = g_i(x_{t_i}) + nu_{t_i} for i = N..1 (or only i = 1 in
    // last-timestep mode), then verifies the stored chain reproduces itself.
    void resynthesize() {
        const int lo = cfg.last_timestep_only ? 1 : s.N;
        for (int i = lo; i >= 1; --i) {
            Vec next;
            {
                StepContext ctx(&counter);
                next = add(ddim_step(s, d, i, latent(i)), deviation(i));
            }
            if (i == 1)
                st.estimate = std::move(next);
            else
                latent(i - 1) = std::move(next);
        }
        for (int i = lo; i >= 1; --i) {
            StepContext ctx(&counter);
            const Vec again = add(ddim_step(s, d, i, latent(i)), deviation(i));
            const Vec& stored = (i == 1) ? st.estimate : latent(i - 1);
            chain_error = std::max(chain_error, norm_inf(sub(again, stored)));
        }
    }

    void run_interior_layers(int outer) {
        if (cfg.last_timestep_only) return;
        for (int i = 2; i <= s.N; ++i) solve_interior_layer(i, outer);
    }
};

double residual_norm(const Vec& y, const ForwardOperator& A, const Vec& x) {
    return norm2(sub(y, A.apply(x)));
}

void finalize(RunReport& rep, ChainRun& run) {
    rep.estimate = run.st.estimate;
    rep.chain_error = run.chain_error;
    rep.context_peak = run.counter.peak;
}

}  // namespace

SolverState init_chain(const Schedule& s, const DenoiserInterface& d, int n, std::uint64_t seed,
                       RetainedContextCounter* counter) {
    Rng rng(seed);
    SolverOptions cfg;
    ChainRun run(s, d, cfg, n, rng);
    if (counter) *counter = run.counter;
    return run.st;
}

RunReport dmilo(const Vec& y, const ForwardOperator& A, const Schedule& s,
                const DenoiserInterface& d, const SolverOptions& cfg) {
    Rng rng(cfg.seed);
    ChainRun run(s, d, cfg, A.in_dim, rng);

    RunReport rep;
    rep.solver_kind = "dmilo";
    rep.seed = cfg.seed;
    rep.residual_init = residual_norm(y, A, run.st.estimate);
    for (int j = 1; j <= cfg.outer_iters; ++j) {
        run.st.outer_index = j;
        run.solve_measurement_layer(y, A, j);
        run.run_interior_layers(j);
        run.resynthesize();
        rep.residual_trace.push_back(residual_norm(y, A, run.st.estimate));
    }
    finalize(rep, run);
    return rep;
}

RunReport dmilo_pgd(const Vec& y, const ForwardOperator& A, const Schedule& s,
                    const DenoiserInterface& d, const SolverOptions& cfg) {
    Rng rng(cfg.seed);
    ChainRun run(s, d, cfg, A.in_dim, rng);
    // the PGD iterate starts from the zero vector, not from the synthesized chain
    run.st.estimate = zeros(static_cast<std::size_t>(A.in_dim));

    RunReport rep;
    rep.solver_kind = "dmilo_pgd";
    rep.seed = cfg.seed;
    rep.residual_init = residual_norm(y, A, run.st.estimate);
    for (int e = 1; e <= cfg.outer_iters; ++e) {
        run.st.outer_index = e;
        // gradient step on the fidelity ||y - A(x)||^2; gradient = 2 vjp(x, A(x) - y)
        Vec ax = A.apply(run.st.estimate);
        const double fid_before = dot(sub(y, ax), sub(y, ax));
        const Vec grad = scaled(A.vjp(run.st.estimate, sub(ax, y)), 2.0);
        run.st.estimate = axpy(run.st.estimate, -cfg.eta, grad);
        ax = A.apply(run.st.estimate);
        const double fid_after = dot(sub(y, ax), sub(y, ax));
        rep.fidelity_before.push_back(fid_before);
        rep.fidelity_after.push_back(fid_after);

        // projection: DMILO against the operator-filtered target A(x_{t_0})
        run.solve_measurement_layer(ax, A, e);
        run.run_interior_layers(e);
        run.resynthesize();
        rep.residual_trace.push_back(residual_norm(y, A, run.st.estimate));
    }
    finalize(rep, run);
    return rep;
}

RunReport dmplug_baseline(const Vec& y, const ForwardOperator& A, const Schedule& s,
                          const DenoiserInterface& d, const SolverOptions& cfg) {
    Rng rng(cfg.seed);
    Vec z = rng.normal_vec(static_cast<std::size_t>(A.in_dim));
    RetainedContextCounter counter;

    RunReport rep;
    rep.solver_kind = "dmplug";
    rep.seed = cfg.seed;
    {
        const Vec x0 = sample_compose(s, d, z, &counter, false).x0;
        rep.residual_init = residual_norm(y, A, x0);
    }

    AdamState st(z.size(), cfg.inner_lr);
    for (int outer = 1; outer <= cfg.outer_iters; ++outer) {
        for (int it = 1; it <= cfg.inner_iters; ++it) {
            // full-graph gradient: every step context stays retained until its
            // backward transport completes
            ComposeResult fwd = sample_compose(s, d, z, &counter, true);
            const Vec resid = sub(A.apply(fwd.x0), y);
            const double loss = dot(resid, resid);
            if (!std::isfinite(loss))
                throw DivergenceError("dmplug: non-finite loss (outer " + std::to_string(outer) +
                                          ", iteration " + std::to_string(it) + ")",
                                      it, -1, outer);
            const Vec cot = scaled(A.vjp(fwd.x0, resid), 2.0);
            const Vec grad = compose_vjp(s, d, z, fwd.trace, cot, &counter);
            adam_step(st, z, grad);
        }
        const Vec x0 = sample_compose(s, d, z, &counter, false).x0;
        rep.residual_trace.push_back(residual_norm(y, A, x0));
    }
    rep.estimate = sample_compose(s, d, z, &counter, false).x0;
    rep.context_peak = counter.peak;
    return rep;
}

namespace {

// Layer-1 solve for blind deblurring: jointly Adam-optimizes (x, nu, k) on
// ||y - k * (g_1(x) + nu)||^2 + lambda ||nu||_1 + l2 ||x||^2.
void solve_bid_measurement_layer(ChainRun& run, const Vec& y, Vec& kernel_taps, int outer) {
    const SolverOptions& cfg = run.cfg;
    Vec x = run.latent(1);
    Vec nu = run.deviation(1);
    AdamState st_x(x.size(), cfg.inner_lr);
    AdamState st_nu(nu.size(), cfg.inner_lr);
    AdamState st_k(kernel_taps.size(), cfg.inner_lr);

    for (int it = 1; it <= cfg.inner_iters; ++it) {
        Kernel k = kernel_from_taps(kernel_taps);
        Vec u, fx;
        Vec g_x, g_nu, g_k;
        {
            StepContext ctx(&run.counter);
            u = add(ddim_step(run.s, run.d, 1, x), nu);
            fx = circ_conv_apply(k, u);
            Vec resid = sub(fx, y);
            const Vec cot = scaled(resid, 2.0);
            g_k = circ_conv_vjp_kernel(k, u, cot);
            const Vec g_u = circ_conv_vjp_signal(k, cot);
            g_x = ddim_step_vjp(run.s, run.d, 1, x, g_u);
            g_nu = g_u;
        }
        double loss = dot(sub(fx, y), sub(fx, y)) + cfg.lambda * norm1(nu);
        if (cfg.l2_weight > 0.0) {
            for (std::size_t i = 0; i < g_x.size(); ++i) g_x[i] += 2.0 * cfg.l2_weight * x[i];
            loss += cfg.l2_weight * dot(x, x);
        }
        if (!std::isfinite(loss))
            throw DivergenceError("bid layer 1: non-finite loss (outer " + std::to_string(outer) +
                                      ", iteration " + std::to_string(it) + ")",
                                  it, 1, outer);
        if (cfg.sparse_deviations) {
            if (cfg.mode == InnerMode::Subgradient && cfg.lambda > 0.0)
                for (std::size_t i = 0; i < g_nu.size(); ++i)
                    g_nu[i] += cfg.lambda * (nu[i] > 0.0 ? 1.0 : (nu[i] < 0.0 ? -1.0 : 0.0));
        } else {
            g_nu = zeros(g_nu.size());
        }

        adam_step(st_x, x, g_x);
        adam_step(st_nu, nu, g_nu);
        adam_step(st_k, kernel_taps, g_k);
        if (cfg.sparse_deviations && cfg.mode == InnerMode::Proximal && cfg.lambda > 0.0)
            nu = soft_threshold(nu, cfg.inner_lr * cfg.lambda);
        if (cfg.normalize_kernel) {
            double sum = 0.0;
            for (double v : kernel_taps) sum += v;
            if (std::fabs(sum) > 1e-12)
                for (double& v : kernel_taps) v /= sum;
        }
    }
    run.latent(1) = std::move(x);
    run.deviation(1) = std::move(nu);
}

Vec init_bid_kernel(const SolverOptions& cfg, Rng& rng) {
    if (!cfg.kernel_init.empty()) return cfg.kernel_init;
    if (cfg.kernel_length < 1) throw ConfigError("bid: kernel_length must be >= 1");
    return rng.normal_vec(static_cast<std::size_t>(cfg.kernel_length));
}

}  // namespace

RunReport dmilo_bid(const Vec& y, const Schedule& s, const DenoiserInterface& d,
                    const SolverOptions& cfg) {
    Rng rng(cfg.seed);
    Vec kernel_taps = init_bid_kernel(cfg, rng);
    ChainRun run(s, d, cfg, static_cast<int>(y.size()), rng);

    RunReport rep;
    rep.solver_kind = "dmilo_bid";
    rep.seed = cfg.seed;
    rep.residual_init = norm2(sub(y, circ_conv_apply(kernel_from_taps(kernel_taps), run.st.estimate)));
    for (int j = 1; j <= cfg.outer_iters; ++j) {
        run.st.outer_index = j;
        solve_bid_measurement_layer(run, y, kernel_taps, j);
        run.run_interior_layers(j);
        run.resynthesize();
        rep.residual_trace.push_back(
            norm2(sub(y, circ_conv_apply(kernel_from_taps(kernel_taps), run.st.estimate))));
    }
    finalize(rep, run);
    rep.kernel = kernel_taps;
    return rep;
}

RunReport dmilo_pgd_bid(const Vec& y, const Schedule& s, const DenoiserInterface& d,
                        const SolverOptions& cfg) {
    Rng rng(cfg.seed);
    Vec kernel_taps = init_bid_kernel(cfg, rng);
    ChainRun run(s, d, cfg, static_cast<int>(y.size()), rng);
    run.st.estimate = zeros(y.size());

    RunReport rep;
    rep.solver_kind = "dmilo_pgd_bid";
    rep.seed = cfg.seed;
    rep.residual_init = norm2(sub(y, circ_conv_apply(kernel_from_taps(kernel_taps), run.st.estimate)));
    for (int e = 1; e <= cfg.outer_iters; ++e) {
        run.st.outer_index = e;
        const Kernel k = kernel_from_taps(kernel_taps);

        // signal gradient step under the current kernel
        Vec kx = circ_conv_apply(k, run.st.estimate);
        const double fid_before = dot(sub(y, kx), sub(y, kx));
        const Vec grad = scaled(circ_conv_vjp_signal(k, sub(kx, y)), 2.0);
        run.st.estimate = axpy(run.st.estimate, -cfg.eta, grad);
        kx = circ_conv_apply(k, run.st.estimate);
        const double fid_after = dot(sub(y, kx), sub(y, kx));
        rep.fidelity_before.push_back(fid_before);
        rep.fidelity_after.push_back(fid_after);

        // projection against the kernel-filtered target, kernel held fixed
        const ForwardOperator conv = circ_conv_operator(static_cast<int>(y.size()), k);
        run.solve_measurement_layer(kx, conv, e);
        run.run_interior_layers(e);
        run.resynthesize();

        // kernel gradient step against the re-synthesized estimate
        const Vec kresid = sub(circ_conv_apply(k, run.st.estimate), y);
        const Vec gk = scaled(circ_conv_vjp_kernel(k, run.st.estimate, kresid), 2.0);
        kernel_taps = axpy(kernel_taps, -cfg.eta_k, gk);
        if (cfg.normalize_kernel) {
            double sum = 0.0;
            for (double v : kernel_taps) sum += v;
            if (std::fabs(sum) > 1e-12)
                for (double& v : kernel_taps) v /= sum;
        }
        rep.residual_trace.push_back(
            norm2(sub(y, circ_conv_apply(kernel_from_taps(kernel_taps), run.st.estimate))));
    }
    finalize(rep, run);
    rep.kernel = kernel_taps;
    return rep;
}

}  // namespace ilo
