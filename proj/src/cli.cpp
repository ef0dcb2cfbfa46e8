#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dmilo/errors.hpp"
#include "dmilo/harness.hpp"

namespace ilo {

namespace {

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"Intermediate-layer optimization lab for diffusion-prior inverse problems"};
    app.require_subcommand(1);

    std::string config_path, results_path, axis, values_csv, out_override;
    int trials_override = -1;
    std::int64_t seed_override = -1;

    auto* solve = app.add_subcommand("solve", "run the configured solver over seeded trials");
    solve->add_option("config", config_path, "experiment config JSON")->required();
    solve->add_option("--trials", trials_override, "override config trials");
    solve->add_option("--seed", seed_override, "override config master seed");
    solve->add_option("--out", out_override, "override config output base path");

    auto* verify = app.add_subcommand("verify-theory", "run the theory verification checks");
    verify->add_option("config", config_path, "config JSON with a theory block")->required();
    verify->add_option("--out", out_override, "write the JSON report here instead of stdout");

    auto* ablate = app.add_subcommand("ablate", "sweep one config field over paired-seed batches");
    ablate->add_option("config", config_path, "experiment config JSON")->required();
    ablate->add_option("--axis", axis, "dotted config path, e.g. solver.sparse_deviations")
        ->required();
    ablate->add_option("--values", values_csv, "comma-separated values for the axis")->required();
    ablate->add_option("--trials", trials_override, "override config trials");
    ablate->add_option("--seed", seed_override, "override config master seed");
    ablate->add_option("--out", out_override, "override config output base path");

    auto* report = app.add_subcommand("report", "print a summary table from a results JSON");
    report->add_option("results", results_path, "results JSON written by solve/ablate")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (solve->parsed() || ablate->parsed()) {
            ExperimentConfig cfg = load_config(config_path);
            if (trials_override > 0) cfg.trials = trials_override;
            if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
            if (!out_override.empty()) cfg.out = out_override;

            std::vector<BatchResult> batches;
            if (solve->parsed())
                batches.push_back(run_experiment(cfg));
            else
                batches = run_ablation(cfg, axis, split_commas(values_csv));

            write_results(batches, cfg.out);
            int failures = 0;
            for (const auto& b : batches) failures += b.summary.failures;
            std::cout << "wrote " << cfg.out << ".json (" << batches.size() << " batch"
                      << (batches.size() == 1 ? "" : "es") << ", " << failures << " failed trial"
                      << (failures == 1 ? "" : "s") << ")\n";
            return failures == 0 ? 0 : 2;
        }
        if (verify->parsed()) {
            const ExperimentConfig cfg = load_config(config_path);
            bool all_pass = false;
            const std::string json_report = run_theory_checks(cfg.theory, all_pass);
            if (out_override.empty()) {
                std::cout << json_report << "\n";
            } else {
                std::ofstream out(out_override);
                if (!out) throw ConfigError("cannot write '" + out_override + "'");
                out << json_report;
                std::cout << "wrote " << out_override << "\n";
            }
            return all_pass ? 0 : 2;
        }
        if (report->parsed()) {
            std::cout << format_report_table(read_file(results_path));
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "run failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace ilo
