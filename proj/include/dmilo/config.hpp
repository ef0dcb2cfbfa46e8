#pragma once

#include <cstdint>
#include <string>

#include "dmilo/optim.hpp"
#include "dmilo/vec.hpp"

namespace ilo {

struct ScheduleConfig {
    double beta0 = 0.1;
    double beta1 = 20.0;
    double epsilon = 1e-3;
    double T = 1.0;
    int N = 3;
};

struct PriorConfig {
    int K = 5;
    int n = 16;
    double tau = 0.1;
    std::uint64_t seed = 7;
    // explicit mixture; when nonempty it overrides the seeded construction
    std::vector<Vec> means;
    Vec weights;
    Vec taus;
};

enum class GroundTruth { Prior, Range, RangeSpike };

struct TaskConfig {
    std::string kind = "inpaint";  // inpaint | downsample | deblur | gaussian | nonlinear | blind_deblur
    double keep_fraction = 0.3;
    int factor = 2;
    Vec kernel;  // taps; defaults to a 5-tap Gaussian when empty and needed
    std::vector<Vec> kernel2d;  // kh x kw taps for deblur on a grid layout
    int m = 8;
    double gain = 1.0;
    double noise_sigma = 0.01;
    std::uint64_t seed = 11;
    GroundTruth groundtruth = GroundTruth::Prior;
    int spike_count = 3;
    double spike_magnitude = 0.5;
    bool grid_layout = false;
    int grid_h = 0;
    int grid_w = 0;
};

struct OptimConfig {
    double inner_lr = 0.02;
    int inner_iters = 200;
    double lambda = 0.1;
    double l2_weight = 1e-3;
    InnerMode mode = InnerMode::Subgradient;
};

struct SolverKindConfig {
    std::string kind = "dmilo";  // dmilo | dmilo_pgd | dmplug | dmilo_bid | dmilo_pgd_bid
    int outer_iters = 5;
    double eta = 0.5;
    double eta_k = 0.01;
    bool last_timestep_only = false;
    bool sparse_deviations = true;
    std::uint64_t seed = 0;
    int kernel_length = 5;
    Vec kernel_init;
    bool normalize_kernel = false;
};

struct TheoryConfig {
    int n = 6;
    int m = 24;
    int latent_grid = 8;
    double delta = 0.1;
    double k = 1.5;
    int instances = 50;
    int min_hold = 48;
    std::uint64_t seed = 2024;
    // auxiliary checks
    int conc_n = 16;
    double conc_eps = 0.5;
    int conc_trials = 1000;
    std::vector<int> conc_ms = {50, 100, 400};
    int maurey_n = 8;
    double maurey_r = 1.0;
    double maurey_L1 = 1.0;
    double maurey_delta = 0.5;
    int maurey_samples = 2000;
    int net_samples = 500;
    int net_ambient = 16;
    Vec net_eps_values = {0.4, 0.2, 0.1, 0.05};
    double net_max_slope = 2.5;
    int srec_points = 200;
    int srec_trials = 100;
    double srec_min_gamma = 0.5;
    int srec_min_pass = 95;
};

struct ExperimentConfig {
    ScheduleConfig schedule;
    PriorConfig prior;
    TaskConfig task;
    OptimConfig optim;
    SolverKindConfig solver;
    TheoryConfig theory;
    int trials = 1;
    std::uint64_t seed = 1;
    std::string out = "results";
    bool timing = true;  // false zeroes wall_ms in outputs for byte-identical reruns
};

// Parses (and defaults) the JSON config; unknown keys raise ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// Canonical serialization of the effective config, and its FNV-1a hash.
std::string config_to_json(const ExperimentConfig& cfg);
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace ilo
