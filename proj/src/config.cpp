#include "dmilo/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dmilo/errors.hpp"

namespace ilo {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void parse_schedule(const json& j, ScheduleConfig& c) {
    reject_unknown(j, {"beta0", "beta1", "epsilon", "T", "N"}, "schedule");
    get_to(j, "beta0", c.beta0);
    get_to(j, "beta1", c.beta1);
    get_to(j, "epsilon", c.epsilon);
    get_to(j, "T", c.T);
    get_to(j, "N", c.N);
}

void parse_prior(const json& j, PriorConfig& c) {
    reject_unknown(j, {"K", "n", "tau", "seed", "means", "weights", "taus"}, "prior");
    get_to(j, "K", c.K);
    get_to(j, "n", c.n);
    get_to(j, "tau", c.tau);
    get_to(j, "seed", c.seed);
    get_to(j, "means", c.means);
    get_to(j, "weights", c.weights);
    get_to(j, "taus", c.taus);
}

void parse_task(const json& j, TaskConfig& c) {
    reject_unknown(j,
                   {"kind", "keep_fraction", "factor", "kernel", "kernel2d", "m", "gain",
                    "noise_sigma", "seed", "groundtruth", "spike_count", "spike_magnitude",
                    "grid_h", "grid_w"},
                   "task");
    get_to(j, "kind", c.kind);
    get_to(j, "keep_fraction", c.keep_fraction);
    get_to(j, "factor", c.factor);
    get_to(j, "kernel", c.kernel);
    get_to(j, "kernel2d", c.kernel2d);
    get_to(j, "m", c.m);
    get_to(j, "gain", c.gain);
    get_to(j, "noise_sigma", c.noise_sigma);
    get_to(j, "seed", c.seed);
    if (j.contains("groundtruth")) {
        const std::string g = j.at("groundtruth").get<std::string>();
        if (g == "prior")
            c.groundtruth = GroundTruth::Prior;
        else if (g == "range")
            c.groundtruth = GroundTruth::Range;
        else if (g == "range_spike")
            c.groundtruth = GroundTruth::RangeSpike;
        else
            throw ConfigError("config: task.groundtruth must be prior|range|range_spike");
    }
    get_to(j, "spike_count", c.spike_count);
    get_to(j, "spike_magnitude", c.spike_magnitude);
    get_to(j, "grid_h", c.grid_h);
    get_to(j, "grid_w", c.grid_w);
    c.grid_layout = c.grid_h > 0 && c.grid_w > 0;

    static const std::set<std::string> kinds = {"inpaint",  "downsample",   "deblur",
                                                "gaussian", "nonlinear", "blind_deblur"};
    if (!kinds.count(c.kind)) throw ConfigError("config: unknown task.kind '" + c.kind + "'");
}

void parse_optim(const json& j, OptimConfig& c) {
    reject_unknown(j, {"inner_lr", "inner_iters", "lambda", "l2_weight", "mode"}, "optim");
    get_to(j, "inner_lr", c.inner_lr);
    get_to(j, "inner_iters", c.inner_iters);
    get_to(j, "lambda", c.lambda);
    get_to(j, "l2_weight", c.l2_weight);
    if (j.contains("mode")) {
        const std::string m = j.at("mode").get<std::string>();
        if (m == "subgradient")
            c.mode = InnerMode::Subgradient;
        else if (m == "proximal")
            c.mode = InnerMode::Proximal;
        else
            throw ConfigError("config: optim.mode must be subgradient|proximal");
    }
}

void parse_solver(const json& j, SolverKindConfig& c) {
    reject_unknown(j,
                   {"kind", "outer_iters", "eta", "eta_k", "last_timestep_only",
                    "sparse_deviations", "seed", "kernel_length", "kernel_init",
                    "normalize_kernel"},
                   "solver");
    get_to(j, "kind", c.kind);
    get_to(j, "outer_iters", c.outer_iters);
    get_to(j, "eta", c.eta);
    get_to(j, "eta_k", c.eta_k);
    get_to(j, "last_timestep_only", c.last_timestep_only);
    get_to(j, "sparse_deviations", c.sparse_deviations);
    get_to(j, "seed", c.seed);
    get_to(j, "kernel_length", c.kernel_length);
    get_to(j, "kernel_init", c.kernel_init);
    get_to(j, "normalize_kernel", c.normalize_kernel);

    static const std::set<std::string> kinds = {"dmilo", "dmilo_pgd", "dmplug", "dmilo_bid",
                                                "dmilo_pgd_bid"};
    if (!kinds.count(c.kind)) throw ConfigError("config: unknown solver.kind '" + c.kind + "'");
}

void parse_theory(const json& j, TheoryConfig& c) {
    reject_unknown(j,
                   {"n", "m", "latent_grid", "delta", "k", "instances", "min_hold", "seed",
                    "conc_n", "conc_eps", "conc_trials", "conc_ms", "maurey_n", "maurey_r",
                    "maurey_L1", "maurey_delta", "maurey_samples", "net_samples", "net_ambient",
                    "net_eps_values", "net_max_slope", "srec_points", "srec_trials",
                    "srec_min_gamma", "srec_min_pass"},
                   "theory");
    get_to(j, "n", c.n);
    get_to(j, "m", c.m);
    get_to(j, "latent_grid", c.latent_grid);
    get_to(j, "delta", c.delta);
    get_to(j, "k", c.k);
    get_to(j, "instances", c.instances);
    get_to(j, "min_hold", c.min_hold);
    get_to(j, "seed", c.seed);
    get_to(j, "conc_n", c.conc_n);
    get_to(j, "conc_eps", c.conc_eps);
    get_to(j, "conc_trials", c.conc_trials);
    get_to(j, "conc_ms", c.conc_ms);
    get_to(j, "maurey_n", c.maurey_n);
    get_to(j, "maurey_r", c.maurey_r);
    get_to(j, "maurey_L1", c.maurey_L1);
    get_to(j, "maurey_delta", c.maurey_delta);
    get_to(j, "maurey_samples", c.maurey_samples);
    get_to(j, "net_samples", c.net_samples);
    get_to(j, "net_ambient", c.net_ambient);
    get_to(j, "net_eps_values", c.net_eps_values);
    get_to(j, "net_max_slope", c.net_max_slope);
    get_to(j, "srec_points", c.srec_points);
    get_to(j, "srec_trials", c.srec_trials);
    get_to(j, "srec_min_gamma", c.srec_min_gamma);
    get_to(j, "srec_min_pass", c.srec_min_pass);
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: JSON parse failure: ") + e.what());
    }
    reject_unknown(j, {"schedule", "prior", "task", "optim", "solver", "theory", "trials", "seed",
                       "out", "timing"},
                   "top level");

    ExperimentConfig cfg;
    try {
        if (j.contains("schedule")) parse_schedule(j["schedule"], cfg.schedule);
        if (j.contains("prior")) parse_prior(j["prior"], cfg.prior);
        if (j.contains("task")) parse_task(j["task"], cfg.task);
        if (j.contains("optim")) parse_optim(j["optim"], cfg.optim);
        if (j.contains("solver")) parse_solver(j["solver"], cfg.solver);
        if (j.contains("theory")) parse_theory(j["theory"], cfg.theory);
        get_to(j, "trials", cfg.trials);
        get_to(j, "seed", cfg.seed);
        get_to(j, "out", cfg.out);
        get_to(j, "timing", cfg.timing);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad field type: ") + e.what());
    }
    if (cfg.trials < 1) throw ConfigError("config: trials must be >= 1");
    if (cfg.optim.inner_iters < 1) throw ConfigError("config: optim.inner_iters must be >= 1");
    if (!(cfg.optim.inner_lr > 0.0)) throw ConfigError("config: optim.inner_lr must be > 0");
    if (cfg.optim.lambda < 0.0) throw ConfigError("config: optim.lambda must be >= 0");
    if (cfg.optim.l2_weight < 0.0) throw ConfigError("config: optim.l2_weight must be >= 0");
    if (cfg.solver.outer_iters < 0) throw ConfigError("config: solver.outer_iters must be >= 0");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["schedule"] = {{"beta0", cfg.schedule.beta0}, {"beta1", cfg.schedule.beta1},
                     {"epsilon", cfg.schedule.epsilon}, {"T", cfg.schedule.T},
                     {"N", cfg.schedule.N}};
    j["prior"] = {{"K", cfg.prior.K}, {"n", cfg.prior.n}, {"tau", cfg.prior.tau},
                  {"seed", cfg.prior.seed}};
    if (!cfg.prior.means.empty()) {
        j["prior"]["means"] = cfg.prior.means;
        j["prior"]["weights"] = cfg.prior.weights;
        j["prior"]["taus"] = cfg.prior.taus;
    }
    const char* gt = cfg.task.groundtruth == GroundTruth::Prior
                         ? "prior"
                         : (cfg.task.groundtruth == GroundTruth::Range ? "range" : "range_spike");
    j["task"] = {{"kind", cfg.task.kind},
                 {"keep_fraction", cfg.task.keep_fraction},
                 {"factor", cfg.task.factor},
                 {"kernel", cfg.task.kernel},
                 {"kernel2d", cfg.task.kernel2d},
                 {"m", cfg.task.m},
                 {"gain", cfg.task.gain},
                 {"noise_sigma", cfg.task.noise_sigma},
                 {"seed", cfg.task.seed},
                 {"groundtruth", gt},
                 {"spike_count", cfg.task.spike_count},
                 {"spike_magnitude", cfg.task.spike_magnitude},
                 {"grid_h", cfg.task.grid_h},
                 {"grid_w", cfg.task.grid_w}};
    j["optim"] = {{"inner_lr", cfg.optim.inner_lr},
                  {"inner_iters", cfg.optim.inner_iters},
                  {"lambda", cfg.optim.lambda},
                  {"l2_weight", cfg.optim.l2_weight},
                  {"mode", cfg.optim.mode == InnerMode::Subgradient ? "subgradient" : "proximal"}};
    j["solver"] = {{"kind", cfg.solver.kind},
                   {"outer_iters", cfg.solver.outer_iters},
                   {"eta", cfg.solver.eta},
                   {"eta_k", cfg.solver.eta_k},
                   {"last_timestep_only", cfg.solver.last_timestep_only},
                   {"sparse_deviations", cfg.solver.sparse_deviations},
                   {"seed", cfg.solver.seed},
                   {"kernel_length", cfg.solver.kernel_length},
                   {"kernel_init", cfg.solver.kernel_init},
                   {"normalize_kernel", cfg.solver.normalize_kernel}};
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["timing"] = cfg.timing;
    return j.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = config_to_json(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace ilo
