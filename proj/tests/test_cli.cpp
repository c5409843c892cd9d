#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

namespace {

const char* kCli = HAVOK_MPC_CLI_PATH;

fs::path work_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "havok_mpc_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream file(path);
    file << content;
}

std::string slurp(const fs::path& path) {
    std::ifstream file(path);
    std::stringstream ss;
    ss << file.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = "\""s + kCli + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string base_config(int duration = 400, int depth = 8) {
    std::ostringstream ss;
    ss << R"({
      "run": {"seed": 42},
      "plant": {"gain": 2.0, "time_constant": 3.0, "dead_time": 2.0,
                "sample_period": 1.0},
      "excitation": {"kind": "prbs", "duration": )"
       << duration << R"(, "period": 1, "amplitude": 1.0},
      "embedding": {"depth": )"
       << depth << R"(, "include_inputs": true, "rank_policy": "full"},
      "mpc": {"horizon": 15, "q": 1.0, "r": 0.05, "u_min": -5, "u_max": 5,
              "reference": {"kind": "constant", "value": 1.0}, "steps": 80,
              "max_qp_iterations": 3000},
      "bench": {"depths": [4, 8, 12], "rank": 4, "steps": 8}
    })";
    return ss.str();
}

}  // namespace

TEST_CASE("identify produces artifacts and exit code 0") {
    const auto dir = work_dir("identify");
    write_file(dir / "config.json", base_config());
    const int rc = run_cli("--config "s + (dir / "config.json").string() + " --out " +
                           (dir / "out").string() + " identify");
    CHECK(rc == 0);
    CHECK(fs::exists(dir / "out" / "model.json"));
    CHECK(fs::exists(dir / "out" / "fit_report.csv"));
    CHECK(fs::exists(dir / "out" / "spectrum.csv"));
}

TEST_CASE("identify is bit-deterministic for a fixed seed") {
    const auto dir = work_dir("determinism");
    write_file(dir / "config.json", base_config());
    REQUIRE(run_cli("--config "s + (dir / "config.json").string() + " --out " +
                    (dir / "a").string() + " identify") == 0);
    REQUIRE(run_cli("--config "s + (dir / "config.json").string() + " --out " +
                    (dir / "b").string() + " identify") == 0);
    CHECK(slurp(dir / "a" / "model.json") == slurp(dir / "b" / "model.json"));
    CHECK(slurp(dir / "a" / "fit_report.csv") == slurp(dir / "b" / "fit_report.csv"));
    CHECK(slurp(dir / "a" / "spectrum.csv") == slurp(dir / "b" / "spectrum.csv"));
}

TEST_CASE("an oversized embedding depth exits with the data code") {
    const auto dir = work_dir("too_deep");
    write_file(dir / "config.json", base_config(/*duration=*/50, /*depth=*/200));
    const int rc = run_cli("--config "s + (dir / "config.json").string() + " --out " +
                           (dir / "out").string() + " identify");
    CHECK(rc == 3);
}

TEST_CASE("an invalid config exits with the config code") {
    const auto dir = work_dir("bad_config");
    write_file(dir / "config.json", R"({"embedding": {"depth": 3}})");
    const int rc = run_cli("--config "s + (dir / "config.json").string() + " identify");
    CHECK(rc == 2);

    CHECK(run_cli("--config /nonexistent/config.json identify") == 2);
    CHECK(run_cli("--bogus-flag identify") == 2);
}

TEST_CASE("the full pipeline runs: identify, predict, closed-loop, bench, simulate") {
    const auto dir = work_dir("pipeline");
    write_file(dir / "config.json", base_config());
    const std::string cfg = "--config "s + (dir / "config.json").string();
    const std::string out = (dir / "out").string();

    REQUIRE(run_cli(cfg + " --out " + out + " identify") == 0);
    const std::string model = (dir / "out" / "model.json").string();

    CHECK(run_cli(cfg + " --model " + model + " --out " + out + " predict") == 0);
    CHECK(fs::exists(dir / "out" / "predictions.csv"));

    CHECK(run_cli(cfg + " --model " + model + " --out " + out + " closed-loop") == 0);
    CHECK(fs::exists(dir / "out" / "telemetry.csv"));
    CHECK(fs::exists(dir / "out" / "summary.txt"));
    const std::string summary = slurp(dir / "out" / "summary.txt");
    CHECK(summary.find("tracking_rmse_final_half") != std::string::npos);
    CHECK(summary.find("fallback_steps: 0") != std::string::npos);

    CHECK(run_cli(cfg + " --out " + out + " bench-delay") == 0);
    CHECK(fs::exists(dir / "out" / "bench.csv"));
    const std::string bench = slurp(dir / "out" / "bench.csv");
    // Three depths, one QP dimension: 15 decision variables each.
    CHECK(bench.find("4,4,15,") != std::string::npos);
    CHECK(bench.find("8,4,15,") != std::string::npos);
    CHECK(bench.find("12,4,15,") != std::string::npos);

    CHECK(run_cli(cfg + " --out " + out + " simulate") == 0);
    CHECK(fs::exists(dir / "out" / "dataset.csv"));
}

TEST_CASE("a crippled solver cap still completes with fallback warnings") {
    const auto dir = work_dir("fallback");
    std::string cfg_text = base_config();
    const auto pos = cfg_text.find("\"max_qp_iterations\": 3000");
    REQUIRE(pos != std::string::npos);
    cfg_text.replace(pos, std::string("\"max_qp_iterations\": 3000").size(),
                     "\"max_qp_iterations\": 1");
    write_file(dir / "config.json", cfg_text);
    const std::string cfg = "--config "s + (dir / "config.json").string();
    const std::string out = (dir / "out").string();

    REQUIRE(run_cli(cfg + " --out " + out + " identify") == 0);
    const std::string model = (dir / "out" / "model.json").string();
    CHECK(run_cli(cfg + " --model " + model + " --out " + out + " closed-loop") == 0);
    const std::string summary = slurp(dir / "out" / "summary.txt");
    CHECK(summary.find("fallback_steps: 0") == std::string::npos);
}

TEST_CASE("predict without a model is a config error") {
    const auto dir = work_dir("no_model");
    write_file(dir / "config.json", base_config());
    CHECK(run_cli("--config "s + (dir / "config.json").string() + " predict") == 2);
}
