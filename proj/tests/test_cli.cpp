#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "dmilo/harness.hpp"

using namespace ilo;

namespace {

std::filesystem::path scratch_dir() {
    const auto dir = std::filesystem::temp_directory_path() / "dmilo_cli_test";
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write_config(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path);
    out << body;
    return path.string();
}

const char* kSmallConfig = R"({
  "prior": {"K": 3, "n": 8, "tau": 0.1, "seed": 7},
  "task": {"kind": "inpaint", "keep_fraction": 1.0, "noise_sigma": 0.0, "groundtruth": "range"},
  "optim": {"inner_iters": 30},
  "solver": {"kind": "dmilo", "outer_iters": 2},
  "trials": 2,
  "seed": 5,
  "timing": false
})";

// theory block scaled down so the subcommand finishes quickly
const char* kSmallTheory = R"({
  "theory": {
    "instances": 5, "min_hold": 4, "latent_grid": 6,
    "conc_trials": 200, "conc_ms": [50, 100],
    "maurey_samples": 500,
    "net_samples": 200,
    "srec_trials": 20, "srec_min_pass": 19, "srec_points": 80
  }
})";

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("missing config file exits with a config error") {
    CHECK(cli_main({"solve", "/definitely/missing.json"}) == 1);
}

TEST_CASE("unknown subcommand exits with usage") {
    CHECK(cli_main({"frobnicate"}) == 1);
    CHECK(cli_main({}) == 1);
}

TEST_CASE("solve writes results and reports on them") {
    const auto dir = scratch_dir();
    const auto cfg = write_config(dir / "cfg.json", kSmallConfig);
    const auto out = (dir / "run").string();
    CHECK(cli_main({"solve", cfg, "--out", out}) == 0);
    CHECK(std::filesystem::exists(dir / "run.json"));
    CHECK(std::filesystem::exists(dir / "run.csv"));
    CHECK(cli_main({"report", out + ".json"}) == 0);
    CHECK(cli_main({"report", (dir / "nothere.json").string()}) == 1);
}

TEST_CASE("solve honors trial and seed overrides deterministically") {
    const auto dir = scratch_dir();
    const auto cfg = write_config(dir / "cfg2.json", kSmallConfig);
    const auto out1 = (dir / "a").string(), out2 = (dir / "b").string();
    CHECK(cli_main({"solve", cfg, "--trials", "3", "--seed", "123", "--out", out1}) == 0);
    CHECK(cli_main({"solve", cfg, "--trials", "3", "--seed", "123", "--out", out2}) == 0);
    std::ifstream a(out1 + ".csv"), b(out2 + ".csv");
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
}

TEST_CASE("ablate emits paired batches") {
    const auto dir = scratch_dir();
    const auto cfg = write_config(dir / "cfg3.json", kSmallConfig);
    const auto out = (dir / "abl").string();
    CHECK(cli_main({"ablate", cfg, "--axis", "solver.sparse_deviations", "--values",
                    "true,false", "--out", out}) == 0);
    CHECK(std::filesystem::exists(out + ".json"));
    CHECK(std::filesystem::exists(out + "__true.csv"));
    CHECK(std::filesystem::exists(out + "__false.csv"));
    CHECK(cli_main({"report", out + ".json"}) == 0);
}

TEST_CASE("verify-theory passes on the reduced default config") {
    const auto dir = scratch_dir();
    const auto cfg = write_config(dir / "theory.json", kSmallTheory);
    const auto out = (dir / "theory_report.json").string();
    CHECK(cli_main({"verify-theory", cfg, "--out", out}) == 0);
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str().find("\"all_pass\": true") != std::string::npos);
}

TEST_SUITE_END();
