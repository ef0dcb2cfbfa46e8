#include "dmilo/harness.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "dmilo/errors.hpp"
#include "dmilo/metrics.hpp"
#include "dmilo/rng.hpp"
#include "dmilo/sampler.hpp"
#include "dmilo/theory.hpp"

namespace ilo {

using nlohmann::json;

namespace {

Vec default_gaussian_kernel_taps() {
    // 5-tap discrete Gaussian, unit sum
    Vec t = {std::exp(-2.0), std::exp(-0.5), 1.0, std::exp(-0.5), std::exp(-2.0)};
    double s = 0.0;
    for (double v : t) s += v;
    for (double& v : t) v /= s;
    return t;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
    ExperimentSetup s;
    s.schedule = make_schedule(cfg.schedule.beta0, cfg.schedule.beta1, cfg.schedule.epsilon,
                               cfg.schedule.T, cfg.schedule.N);
    if (!cfg.prior.means.empty())
        s.prior = make_gmm(cfg.prior.means, cfg.prior.weights, cfg.prior.taus);
    else
        s.prior = default_gmm(cfg.prior.K, cfg.prior.n, cfg.prior.tau, cfg.prior.seed);
    s.denoiser = make_denoiser(s.prior, s.schedule);

    const int n = static_cast<int>(s.prior.dim());
    const TaskConfig& t = cfg.task;
    if (t.kind == "inpaint") {
        s.op = mask_operator(n, t.keep_fraction, t.seed);
    } else if (t.kind == "downsample") {
        s.op = downsample_operator(n, t.factor);
    } else if (t.kind == "deblur" && !t.kernel2d.empty()) {
        if (!t.grid_layout)
            throw ConfigError("build_setup: kernel2d requires task.grid_h and task.grid_w");
        s.op = circ_conv2d_operator(t.grid_h, t.grid_w, t.kernel2d);
    } else if (t.kind == "deblur" || t.kind == "nonlinear" || t.kind == "blind_deblur") {
        const Vec taps = t.kernel.empty() ? default_gaussian_kernel_taps() : t.kernel;
        s.true_kernel = kernel_from_taps(taps);
        ForwardOperator conv = circ_conv_operator(n, s.true_kernel);
        if (t.kind == "nonlinear")
            s.op = nonlinear_operator(std::move(conv), t.gain);
        else
            s.op = std::move(conv);
        s.blind = t.kind == "blind_deblur";
    } else if (t.kind == "gaussian") {
        s.op = gaussian_operator(t.m, n, t.seed);
    } else {
        throw ConfigError("build_setup: unknown task.kind '" + t.kind + "'");
    }

    const bool blind_solver = cfg.solver.kind == "dmilo_bid" || cfg.solver.kind == "dmilo_pgd_bid";
    if (s.blind != blind_solver)
        throw ConfigError("build_setup: blind_deblur tasks pair with dmilo_bid/dmilo_pgd_bid "
                          "solvers and vice versa");
    if (cfg.task.grid_layout &&
        static_cast<std::size_t>(cfg.task.grid_h) * static_cast<std::size_t>(cfg.task.grid_w) !=
            s.prior.dim())
        throw ConfigError("build_setup: grid_h * grid_w must equal the prior dimension");
    return s;
}

Vec draw_ground_truth(const ExperimentSetup& setup, const ExperimentConfig& cfg, int trial) {
    const std::uint64_t gt_seed =
        derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), kStreamGroundTruth);
    const std::size_t n = setup.prior.dim();

    if (cfg.task.groundtruth == GroundTruth::Prior)
        return sample_prior(setup.prior, gt_seed, 1)[0];

    Rng rng(gt_seed);
    Vec xT = rng.normal_vec(n);
    Vec x = sample_compose(setup.schedule, setup.denoiser, xT).x0;
    if (cfg.task.groundtruth == GroundTruth::RangeSpike) {
        Rng spike_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), kStreamSpike));
        auto perm = spike_rng.permutation(n);
        const int k = std::min<int>(cfg.task.spike_count, static_cast<int>(n));
        for (int i = 0; i < k; ++i) {
            const double sign = spike_rng.uniform() < 0.5 ? -1.0 : 1.0;
            x[perm[static_cast<std::size_t>(i)]] += sign * cfg.task.spike_magnitude;
        }
    }
    return x;
}

namespace {

SolverOptions make_solver_options(const ExperimentConfig& cfg, std::uint64_t trial_seed) {
    SolverOptions o;
    o.inner_lr = cfg.optim.inner_lr;
    o.inner_iters = cfg.optim.inner_iters;
    o.lambda = cfg.optim.lambda;
    o.l2_weight = cfg.optim.l2_weight;
    o.mode = cfg.optim.mode;
    o.outer_iters = cfg.solver.outer_iters;
    o.eta = cfg.solver.eta;
    o.eta_k = cfg.solver.eta_k;
    o.last_timestep_only = cfg.solver.last_timestep_only;
    o.sparse_deviations = cfg.solver.sparse_deviations;
    o.seed = trial_seed;
    o.kernel_length = cfg.solver.kernel_length;
    o.kernel_init = cfg.solver.kernel_init;
    o.normalize_kernel = cfg.solver.normalize_kernel;
    return o;
}

RunReport dispatch_solver(const ExperimentConfig& cfg, const ExperimentSetup& setup, const Vec& y,
                          const SolverOptions& opts) {
    const std::string& kind = cfg.solver.kind;
    if (kind == "dmilo") return dmilo(y, setup.op, setup.schedule, setup.denoiser, opts);
    if (kind == "dmilo_pgd") return dmilo_pgd(y, setup.op, setup.schedule, setup.denoiser, opts);
    if (kind == "dmplug") return dmplug_baseline(y, setup.op, setup.schedule, setup.denoiser, opts);
    if (kind == "dmilo_bid") return dmilo_bid(y, setup.schedule, setup.denoiser, opts);
    if (kind == "dmilo_pgd_bid") return dmilo_pgd_bid(y, setup.schedule, setup.denoiser, opts);
    throw ConfigError("dispatch_solver: unknown solver.kind '" + kind + "'");
}

struct Quartiles {
    double median = 0.0;
    double iqr = 0.0;
};

Quartiles quartiles(std::vector<double> v) {
    Quartiles q;
    if (v.empty()) return q;
    std::sort(v.begin(), v.end());
    auto at = [&](double p) {
        const double idx = p * (static_cast<double>(v.size()) - 1.0);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        const double w = idx - static_cast<double>(lo);
        return v[lo] * (1.0 - w) + v[hi] * w;
    };
    q.median = at(0.5);
    q.iqr = at(0.75) - at(0.25);
    return q;
}

Summary summarize(const std::vector<TrialRecord>& records) {
    Summary s;
    s.trials = static_cast<int>(records.size());
    std::vector<double> mses, psnrs, resids, ssims;
    for (const auto& r : records) {
        if (r.failed()) {
            ++s.failures;
            continue;
        }
        mses.push_back(r.report.metrics.mse);
        if (std::isfinite(r.report.metrics.psnr)) psnrs.push_back(r.report.metrics.psnr);
        resids.push_back(r.report.metrics.residual);
        if (r.report.metrics.has_ssim) ssims.push_back(r.report.metrics.ssim);
        s.context_peak = std::max(s.context_peak, r.report.context_peak);
    }
    const auto qm = quartiles(mses);
    s.median_mse = qm.median;
    s.iqr_mse = qm.iqr;
    const auto qp = quartiles(psnrs);
    s.median_psnr = qp.median;
    s.iqr_psnr = qp.iqr;
    const auto qr = quartiles(resids);
    s.median_residual = qr.median;
    s.iqr_residual = qr.iqr;
    if (!ssims.empty()) {
        s.has_ssim = true;
        const auto qs = quartiles(ssims);
        s.median_ssim = qs.median;
        s.iqr_ssim = qs.iqr;
    }
    return s;
}

}  // namespace

BatchResult run_experiment(const ExperimentConfig& cfg) {
    const ExperimentSetup setup = build_setup(cfg);
    BatchResult batch;
    batch.config = cfg;
    batch.config_hash = config_hash(cfg);

    for (int trial = 0; trial < cfg.trials; ++trial) {
        TrialRecord rec;
        rec.trial = trial;
        rec.seed = derive_seed(cfg.seed ^ mix64(cfg.solver.seed), static_cast<std::uint64_t>(trial),
                               kStreamSolver);
        try {
            rec.ground_truth = draw_ground_truth(setup, cfg, trial);
            Vec y = setup.op.apply(rec.ground_truth);
            y = add_noise(y, cfg.task.noise_sigma,
                          derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), kStreamNoise));

            const SolverOptions opts = make_solver_options(cfg, rec.seed);
            const auto t0 = std::chrono::steady_clock::now();
            rec.report = dispatch_solver(cfg, setup, y, opts);
            const auto t1 = std::chrono::steady_clock::now();
            rec.report.wall_ms =
                cfg.timing ? std::chrono::duration<double, std::milli>(t1 - t0).count() : 0.0;

            const double lo = *std::min_element(rec.ground_truth.begin(), rec.ground_truth.end());
            const double hi = *std::max_element(rec.ground_truth.begin(), rec.ground_truth.end());
            const double peak = std::max(hi - lo, 1e-12);
            const Layout layout = cfg.task.grid_layout
                                      ? Layout::image(cfg.task.grid_h, cfg.task.grid_w)
                                      : Layout::flat();
            rec.report.metrics =
                compute_metrics(rec.report.estimate, rec.ground_truth, peak, layout);
            rec.report.metrics.residual = rec.report.residual_trace.empty()
                                              ? rec.report.residual_init
                                              : rec.report.residual_trace.back();
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        batch.records.push_back(std::move(rec));
    }
    batch.summary = summarize(batch.records);
    return batch;
}

std::vector<BatchResult> run_ablation(const ExperimentConfig& cfg, const std::string& axis,
                                      const std::vector<std::string>& values) {
    if (values.empty()) throw ConfigError("ablate: --values must be nonempty");
    std::string pointer = "/" + axis;
    for (auto& c : pointer)
        if (c == '.') c = '/';

    std::vector<BatchResult> batches;
    for (const std::string& value : values) {
        json j = json::parse(config_to_json(cfg));
        json parsed_value;
        try {
            parsed_value = json::parse(value);
        } catch (const json::exception&) {
            parsed_value = value;  // plain string value
        }
        try {
            j[json::json_pointer(pointer)] = parsed_value;
        } catch (const json::exception& e) {
            throw ConfigError("ablate: bad axis '" + axis + "': " + e.what());
        }
        ExperimentConfig patched = parse_config(j.dump());
        BatchResult b = run_experiment(patched);
        b.axis = axis;
        b.axis_value = value;
        batches.push_back(std::move(b));
    }
    return batches;
}

namespace {

json metrics_to_json(const MetricSet& m) {
    json j;
    j["mse"] = m.mse;
    if (std::isfinite(m.psnr))
        j["psnr"] = m.psnr;
    else
        j["psnr"] = "inf";
    if (m.has_ssim) j["ssim"] = m.ssim;
    j["residual"] = m.residual;
    return j;
}

json summary_to_json(const Summary& s) {
    json j;
    j["trials"] = s.trials;
    j["failures"] = s.failures;
    j["median_mse"] = s.median_mse;
    j["iqr_mse"] = s.iqr_mse;
    j["median_psnr"] = s.median_psnr;
    j["iqr_psnr"] = s.iqr_psnr;
    j["median_residual"] = s.median_residual;
    j["iqr_residual"] = s.iqr_residual;
    if (s.has_ssim) {
        j["median_ssim"] = s.median_ssim;
        j["iqr_ssim"] = s.iqr_ssim;
    }
    j["context_peak"] = s.context_peak;
    j["psnr_peak_convention"] = "empirical_range_of_ground_truth";
    return j;
}

}  // namespace

std::string batch_to_json(const std::vector<BatchResult>& batches) {
    json out;
    out["batches"] = json::array();
    for (const auto& b : batches) {
        json jb;
        jb["config_hash"] = b.config_hash;
        jb["config"] = json::parse(config_to_json(b.config));
        if (!b.axis.empty()) {
            jb["axis"] = b.axis;
            jb["axis_value"] = b.axis_value;
        }
        jb["summary"] = summary_to_json(b.summary);
        jb["reports"] = json::array();
        for (const auto& r : b.records) {
            json jr;
            jr["trial"] = r.trial;
            jr["seed"] = r.seed;
            jr["config_hash"] = b.config_hash;
            jr["solver"] = b.config.solver.kind;
            if (r.failed()) {
                jr["error"] = r.error;
            } else {
                jr["metrics"] = metrics_to_json(r.report.metrics);
                jr["residual_init"] = r.report.residual_init;
                jr["residual_trace"] = r.report.residual_trace;
                jr["context_peak"] = r.report.context_peak;
                jr["chain_error"] = r.report.chain_error;
                jr["wall_ms"] = r.report.wall_ms;
                if (!r.report.kernel.empty()) jr["kernel"] = r.report.kernel;
            }
            jb["reports"].push_back(std::move(jr));
        }
        out["batches"].push_back(std::move(jb));
    }
    return out.dump(2);
}

std::string batch_to_csv(const BatchResult& batch) {
    std::ostringstream os;
    os << "trial,seed,solver,task,mse,psnr,ssim,residual_init,residual_final,context_peak,"
          "wall_ms\n";
    for (const auto& r : batch.records) {
        os << r.trial << "," << r.seed << "," << batch.config.solver.kind << ","
           << batch.config.task.kind << ",";
        if (r.failed()) {
            os << "error,error,,,,," << "\n";
            continue;
        }
        const auto& m = r.report.metrics;
        os << fmt(m.mse) << ",";
        os << (std::isfinite(m.psnr) ? fmt(m.psnr) : "inf") << ",";
        os << (m.has_ssim ? fmt(m.ssim) : "") << ",";
        os << fmt(r.report.residual_init) << "," << fmt(m.residual) << ","
           << r.report.context_peak << "," << fmt(r.report.wall_ms) << "\n";
    }
    return os.str();
}

void write_results(const std::vector<BatchResult>& batches, const std::string& out_base) {
    const std::filesystem::path base(out_base);
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());

    std::ofstream jf(out_base + ".json");
    if (!jf) throw ConfigError("write_results: cannot write '" + out_base + ".json'");
    jf << batch_to_json(batches);

    for (const auto& b : batches) {
        std::string suffix;
        if (!b.axis.empty()) {
            suffix = "__" + b.axis_value;
            for (auto& c : suffix)
                if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' &&
                    c != '.')
                    c = '_';
        }
        std::ofstream cf(out_base + suffix + ".csv");
        if (!cf) throw ConfigError("write_results: cannot write CSV for '" + out_base + "'");
        cf << batch_to_csv(b);
    }
}

std::string format_report_table(const std::string& results_json) {
    json j;
    try {
        j = json::parse(results_json);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("report: bad results JSON: ") + e.what());
    }
    if (!j.contains("batches")) throw ConfigError("report: results JSON has no 'batches'");

    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-14s %-28s %7s %5s %10s %12s %12s %9s\n", "solver", "axis",
                  "trials", "fail", "med_psnr", "med_mse", "med_resid", "ctx_peak");
    os << line;
    for (const auto& jb : j["batches"]) {
        const std::string hash = jb.at("config_hash").get<std::string>();
        for (const auto& jr : jb.at("reports"))
            if (jr.at("config_hash").get<std::string>() != hash)
                throw ConfigError("report: reports from different configs cannot be mixed");
        const auto& s = jb.at("summary");
        const std::string solver = jb.at("config").at("solver").at("kind").get<std::string>();
        std::string axis = "-";
        if (jb.contains("axis"))
            axis = jb.at("axis").get<std::string>() + "=" + jb.at("axis_value").get<std::string>();
        std::snprintf(line, sizeof(line), "%-14s %-28s %7d %5d %10.3f %12.4e %12.4e %9d\n",
                      solver.c_str(), axis.c_str(), s.at("trials").get<int>(),
                      s.at("failures").get<int>(), s.at("median_psnr").get<double>(),
                      s.at("median_mse").get<double>(), s.at("median_residual").get<double>(),
                      s.at("context_peak").get<int>());
        os << line;
    }
    return os.str();
}

std::string run_theory_checks(const TheoryConfig& cfg, bool& all_pass) {
    json checks = json::array();
    all_pass = true;
    auto push = [&](json c, bool pass) {
        c["pass"] = pass ? "pass" : "fail";
        all_pass = all_pass && pass;
        checks.push_back(std::move(c));
    };

    // Lemma-style norm concentration at each m
    for (int m : cfg.conc_ms) {
        const auto rep = concentration_check(cfg.conc_n, m, cfg.conc_eps, cfg.conc_trials,
                                             derive_seed(cfg.seed, static_cast<std::uint64_t>(m), 11));
        json c;
        c["name"] = "concentration_m" + std::to_string(m);
        c["failure_rate"] = rep.failure_rate;
        c["bound"] = rep.bound;
        push(std::move(c), rep.holds);
    }

    // Maurey covering bound on the l1 ball
    {
        const auto rep = maurey_check(cfg.maurey_n, cfg.maurey_r, cfg.maurey_L1, cfg.maurey_delta,
                                      cfg.maurey_samples, derive_seed(cfg.seed, 0, 12));
        json c;
        c["name"] = "maurey_bound";
        c["log_net_size"] = rep.log_net_size;
        c["bound"] = rep.bound;
        push(std::move(c), rep.holds);
    }

    // covering-number dimension scaling of a 2-dim manifold
    {
        const TheoryInstance inst =
            make_toy_instance(cfg.net_ambient, cfg.delta, cfg.k, derive_seed(cfg.seed, 0, 13));
        Rng rng(derive_seed(cfg.seed, 1, 13));
        std::vector<Vec> pts;
        for (int i = 0; i < cfg.net_samples; ++i) {
            const Vec z = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
            pts.push_back(inst.g2(z));
        }
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        json sizes = json::array();
        for (double eps : cfg.net_eps_values) {
            const double ns = static_cast<double>(greedy_epsilon_net(pts, eps).size());
            const double x = std::log(1.0 / eps), y = std::log(ns);
            sizes.push_back({{"eps", eps}, {"net_size", ns}});
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double k = static_cast<double>(cfg.net_eps_values.size());
        const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
        json c;
        c["name"] = "net_dimension_scaling";
        c["slope"] = slope;
        c["max_slope"] = cfg.net_max_slope;
        c["nets"] = sizes;
        push(std::move(c), slope <= cfg.net_max_slope);
    }

    // S-REC constant of Gaussian maps over manifold points
    {
        const TheoryInstance inst =
            make_toy_instance(cfg.net_ambient, cfg.delta, cfg.k, derive_seed(cfg.seed, 0, 14));
        const int m_srec = static_cast<int>(
            std::ceil(8.0 * 2.0 * std::log(static_cast<double>(cfg.net_ambient) / cfg.delta)));
        int ok = 0;
        for (int t = 0; t < cfg.srec_trials; ++t) {
            Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t), 15));
            std::vector<Vec> pts;
            for (int i = 0; i < cfg.srec_points; ++i) {
                const Vec z = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
                pts.push_back(inst.g2(z));
            }
            const ForwardOperator A = gaussian_operator(
                m_srec, cfg.net_ambient, derive_seed(cfg.seed, static_cast<std::uint64_t>(t), 16));
            if (srec_gamma(A, pts, /*delta=*/0.0) >= cfg.srec_min_gamma) ++ok;
        }
        json c;
        c["name"] = "srec_gamma";
        c["m"] = m_srec;
        c["passes"] = ok;
        c["trials"] = cfg.srec_trials;
        c["min_gamma"] = cfg.srec_min_gamma;
        push(std::move(c), ok >= cfg.srec_min_pass);
    }

    // brute-force Theorem-1 inequality on tiny instances
    {
        const TheoryInstance inst = make_toy_instance(cfg.n, cfg.delta, cfg.k,
                                                      derive_seed(cfg.seed, 0, 17), cfg.latent_grid);
        int holds = 0;
        double min_gamma = std::numeric_limits<double>::infinity();
        for (int t = 0; t < cfg.instances; ++t) {
            const ForwardOperator A =
                gaussian_operator(cfg.m, cfg.n, derive_seed(cfg.seed, static_cast<std::uint64_t>(t), 18));
            Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t), 19));
            const Vec z = {2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0};
            Vec xstar = inst.g1(inst.g2(z));
            for (double& v : xstar) v += 0.05 * rng.normal();
            const auto rep = theorem1_check(inst, A, xstar);
            min_gamma = std::min(min_gamma, rep.gamma);
            if (rep.holds) ++holds;
        }
        json c;
        c["name"] = "theorem1_bound";
        c["holds"] = holds;
        c["instances"] = cfg.instances;
        c["min_hold"] = cfg.min_hold;
        c["min_gamma"] = min_gamma;
        push(std::move(c), holds >= cfg.min_hold);
    }

    json out;
    out["checks"] = std::move(checks);
    out["all_pass"] = all_pass;
    return out.dump(2);
}

}  // namespace ilo
