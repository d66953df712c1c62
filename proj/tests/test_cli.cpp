#include "doctest.h"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout only
};

CommandResult run_cli(const std::string& args) {
    const std::string command = std::string(CLI_BINARY_PATH) + " " + args + " 2>/dev/null";
    CommandResult result;
    FILE* pipe = popen(command.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buffer{};
    while (std::size_t n = fread(buffer.data(), 1, buffer.size(), pipe)) {
        result.output.append(buffer.data(), n);
        if (n < buffer.size()) break;
    }
    const int status = pclose(pipe);
    result.exit_code = WEXITSTATUS(status);
    return result;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string asset(const std::string& rel) { return std::string(ASSET_DIR) + "/" + rel; }
std::string golden(const std::string& rel) { return std::string(GOLDEN_DIR) + "/" + rel; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("validate accepts the bundled config and prints its version") {
    auto r = run_cli("validate " + asset("configs/send_sms.yaml"));
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("OK, version ") == 0);
}

TEST_CASE("validate exit codes distinguish violations from io errors") {
    auto missing = run_cli("validate no_such_file.yaml");
    CHECK(missing.exit_code == 2);

    const std::string bad_path = "cli_bad_weights.yaml";
    {
        std::ofstream out(bad_path, std::ios::trunc);
        out << "operation: SEND_SMS\n"
               "providers:\n"
               "  - {id: alpha, supported_regions: [US]}\n"
               "gates: [region_supported]\n"
               "scores:\n"
               "  - {factor: completion_rate, weight: 0.9}\n"
               "control: {default_provider: alpha}\n";
    }
    auto bad = run_cli("validate " + bad_path);
    CHECK(bad.exit_code == 1);
    CHECK(bad.output.find("sum to 1") != std::string::npos);
    std::remove(bad_path.c_str());
}

TEST_CASE("model table output is byte-stable") {
    auto r = run_cli("model --table2 --format json");
    CHECK(r.exit_code == 0);
    CHECK(r.output == read_file(golden("model_table2.json")));
}

TEST_CASE("model availability output is byte-stable") {
    auto r = run_cli("model --avail 0.999 0.999 0.999 --format json");
    CHECK(r.exit_code == 0);
    CHECK(r.output == read_file(golden("model_avail_serial.json")));
}

TEST_CASE("model rejects invalid parameters") {
    CHECK(run_cli("model --avail 1.2").exit_code == 2);
    CHECK(run_cli("model").exit_code == 2);
    CHECK(run_cli("model --switch 0 --lambda -4").exit_code == 2);
}

TEST_CASE("seeded simulations are identical across runs") {
    auto a = run_cli("simulate " + asset("scenarios/recovery.yaml") + " --format json");
    auto b = run_cli("simulate " + asset("scenarios/recovery.yaml") + " --format json");
    CHECK(a.exit_code == 0);
    CHECK(a.output == b.output);
    auto c = run_cli("simulate " + asset("scenarios/recovery.yaml") + " --seed 777 --format json");
    CHECK(c.exit_code == 0);
    CHECK(a.output != c.output);
}

TEST_CASE("explain narrates a traced request and fails on unknown ids") {
    namespace fs = std::filesystem;
    const auto out_dir = fs::temp_directory_path() / "froute_cli_explain";
    auto sim = run_cli("simulate " + asset("scenarios/outage.yaml") + " --out " +
                       out_dir.string());
    REQUIRE(sim.exit_code == 0);
    auto traces = (out_dir / "traces.jsonl").string();

    auto ok = run_cli("explain " + traces + " r100");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("request r100") != std::string::npos);
    CHECK(ok.output.find("alpha") != std::string::npos);
    CHECK(ok.output.find("beta") != std::string::npos);
    CHECK(ok.output.find("selected:") != std::string::npos);

    auto missing = run_cli("explain " + traces + " zz_unknown");
    CHECK(missing.exit_code == 1);
    fs::remove_all(out_dir);
}

TEST_CASE("replay of the producing config via files reports zero diffs") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "froute_cli_replay";
    auto sim = run_cli("simulate " + asset("scenarios/recovery.yaml") + " --out " + dir.string());
    REQUIRE(sim.exit_code == 0);

    // Extract the factor list that produced the log into a config file.
    const std::string config_path = (dir / "candidate.yaml").string();
    {
        std::ofstream out(config_path, std::ios::trunc);
        out << "operation: SEND_SMS\n"
               "providers:\n"
               "  - {id: alpha, supported_regions: [US], static_cost: 0.003}\n"
               "  - {id: beta, supported_regions: [US], static_cost: 0.03}\n"
               "gates: [circuit_closed, region_supported, quota_available]\n"
               "scores:\n"
               "  - {factor: completion_rate, weight: 0.5, default_value: 0.5}\n"
               "  - {factor: latency_p95, weight: 0.2, lower_bound: 100, upper_bound: 1100, "
               "default_value: 0.5}\n"
               "  - {factor: cost, weight: 0.15, lower_bound: 0.001, upper_bound: 0.05, "
               "default_value: 0.5}\n"
               "  - {factor: incident_penalty, weight: 0.15, default_value: 1.0}\n"
               "control:\n"
               "  default_provider: alpha\n"
               "  hysteresis_delta: 0.04\n"
               "  circuit_open_ms: 180000\n"
               "  sustained_windows_required: 2\n";
    }
    auto r = run_cli("replay " + (dir / "events.jsonl").string() + " " + config_path +
                     " --tau-ms 60000");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("diffs: 0") != std::string::npos);
    fs::remove_all(dir);
}

}  // TEST_SUITE
