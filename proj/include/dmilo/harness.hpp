#pragma once

#include <string>
#include <vector>

#include "dmilo/config.hpp"
#include "dmilo/operators.hpp"
#include "dmilo/prior.hpp"
#include "dmilo/schedule.hpp"
#include "dmilo/solvers.hpp"

namespace ilo {

// Everything a batch shares: immutable inputs built once from the config.
struct ExperimentSetup {
    Schedule schedule;
    GmmPrior prior;
    DenoiserInterface denoiser;
    ForwardOperator op;       // measurement operator (the true kernel's, for blind tasks)
    Kernel true_kernel;       // blind tasks only
    bool blind = false;
};

ExperimentSetup build_setup(const ExperimentConfig& cfg);

// Seed-stream tags: per-trial streams derive as (master seed, trial, tag) so trials
// are order-independent and ablation sweeps pair exactly.
enum : std::uint64_t {
    kStreamGroundTruth = 101,
    kStreamNoise = 102,
    kStreamSolver = 103,
    kStreamSpike = 104,
};

// Ground truth for one trial under the configured mode.
Vec draw_ground_truth(const ExperimentSetup& setup, const ExperimentConfig& cfg, int trial);

struct TrialRecord {
    int trial = 0;
    std::uint64_t seed = 0;
    RunReport report;
    Vec ground_truth;
    std::string error;  // nonempty when the run failed
    bool failed() const { return !error.empty(); }
};

struct Summary {
    int trials = 0;
    int failures = 0;
    double median_mse = 0.0, iqr_mse = 0.0;
    double median_psnr = 0.0, iqr_psnr = 0.0;
    double median_residual = 0.0, iqr_residual = 0.0;
    double median_ssim = 0.0, iqr_ssim = 0.0;
    bool has_ssim = false;
    int context_peak = 0;  // max over trials
};

struct BatchResult {
    ExperimentConfig config;
    std::string config_hash;
    std::vector<TrialRecord> records;
    Summary summary;
    std::string axis;        // set by ablation sweeps
    std::string axis_value;
};

// Runs every trial (continuing past per-trial failures), computes metrics against
// the per-trial ground truth, and summarizes with median/IQR.
BatchResult run_experiment(const ExperimentConfig& cfg);

// Runs one batch per axis value, patching cfg at the dotted path; all batches share
// the master seed so per-trial draws pair across values.
std::vector<BatchResult> run_ablation(const ExperimentConfig& cfg, const std::string& axis,
                                      const std::vector<std::string>& values);

std::string batch_to_json(const std::vector<BatchResult>& batches);
std::string batch_to_csv(const BatchResult& batch);
void write_results(const std::vector<BatchResult>& batches, const std::string& out_base);

// Pretty per-solver table from a results JSON; throws ConfigError when reports in a
// batch do not all carry the batch's config hash.
std::string format_report_table(const std::string& results_json);

// Theory verification suite driven by the config's theory block; returns the JSON
// report and sets all_pass.
std::string run_theory_checks(const TheoryConfig& cfg, bool& all_pass);

// CLI entry point shared by the binary and the tests.
// Subcommands: solve <config.json>, verify-theory <config.json>,
// ablate <config.json> --axis <field> --values <v1,v2,...>, report <results.json>.
// Exit codes: 0 success, 1 config/usage error, 2 run failure.
int cli_main(const std::vector<std::string>& args);

}  // namespace ilo
