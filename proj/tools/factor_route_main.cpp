// factor-route: operator CLI for factor-list validation, scenario
// simulation, event-log replay, decision explanation and the analytical
// failover model.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "froute/config.hpp"
#include "froute/router.hpp"
#include "froute/sim/analytical.hpp"
#include "froute/sim/conformance.hpp"
#include "froute/sim/engine.hpp"
#include "froute/sim/replay.hpp"
#include "froute/sim/scenario.hpp"
#include "froute/telemetry.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

std::optional<std::uint64_t> env_seed() {
    const char* raw = std::getenv("FACTOR_ROUTE_SEED");
    if (!raw || !*raw) return std::nullopt;
    char* end = nullptr;
    const auto v = std::strtoull(raw, &end, 10);
    if (end && *end == '\0') return v;
    return std::nullopt;
}

bool write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out << content;
    return static_cast<bool>(out);
}

int cmd_validate(const std::string& path, bool /*strict*/) {
    if (!fs::exists(path)) {
        std::cerr << "error: cannot read " << path << "\n";
        return kExitUsage;
    }
    auto parsed = froute::load_factor_list_file(path);
    if (!parsed) {
        std::cout << "PARSE ERROR";
        if (parsed.line >= 0) std::cout << " at line " << parsed.line << ":" << parsed.column;
        std::cout << ": " << parsed.error << "\n";
        return kExitValidation;
    }
    auto violations = froute::validate_factor_list(*parsed.value);
    if (!violations.empty()) {
        for (const auto& v : violations) std::cout << "VIOLATION: " << v << "\n";
        return kExitValidation;
    }
    std::cout << "OK, version " << parsed.value->version << "\n";
    return kExitOk;
}

void print_simulation_summary(const froute::sim::SimReport& r) {
    std::cout << "scenario: " << r.scenario_name << " (mode " << froute::sim::to_string(r.mode)
              << ", seed " << r.seed << ")\n";
    if (!r.sweep.empty()) {
        std::cout << "forced-switch sweep (" << r.sweep.size() << " rows):\n";
        for (const auto& row : r.sweep) {
            std::cout << "  switch " << row.switch_min
                      << " min: simulated_failures=" << std::llround(row.simulated_failures)
                      << " expected_failures=" << std::llround(row.expected_failures);
            if (std::abs(row.switch_min - 0.5) < 1e-12 &&
                std::llround(row.expected_failures) == 570) {
                std::cout << " (reference table lists 595 for this row, see NOTES.md)";
            }
            if (r.mode == froute::sim::SimMode::sampled) std::cout << " sigma=" << row.sigma;
            std::cout << "\n";
        }
        return;
    }
    const double rate =
        r.total_requests > 0 ? r.completed_requests / static_cast<double>(r.total_requests) : 0;
    std::cout << "  requests: " << r.total_requests << " attempts: " << r.total_attempts
              << " completion_rate: " << rate << "\n";
    std::cout << "  failed: " << r.failed_requests << " (fallbacks " << r.fallback_requests
              << ", shed " << r.shed_requests << ")\n";
    std::cout << "  switches: " << r.switch_count << " flaps: " << r.flap_count << "\n";
    if (r.completed_requests > 0)
        std::cout << "  cost_per_success: " << r.cost_total / r.completed_requests << "\n";
    if (r.observed_failover_delay_ms) {
        std::cout << "  failover_delay_ms: " << *r.observed_failover_delay_ms;
        if (r.failover_bound_ms)
            std::cout << " bound_ms: " << *r.failover_bound_ms
                      << (r.bound_respected ? " (within bound)" : " (BOUND EXCEEDED)");
        std::cout << "\n";
    }
    if (r.model_expected_failures)
        std::cout << "  analytical comparison: expected_failures(T=observed)="
                  << *r.model_expected_failures << " vs simulated " << r.failed_requests << "\n";
    std::cout << "  traces: " << r.trace_complete << "/" << r.trace_total << " complete\n";
}

int cmd_simulate(const std::string& path, const std::string& mode_flag,
                 std::optional<std::uint64_t> seed_flag, const std::string& out_dir,
                 const std::string& format) {
    auto parsed = froute::sim::load_scenario_file(path);
    if (!parsed) {
        std::cerr << "error: " << parsed.error;
        if (parsed.line >= 0) std::cerr << " (line " << parsed.line << ")";
        std::cerr << "\n";
        return kExitUsage;
    }
    std::optional<froute::sim::SimMode> mode;
    if (mode_flag == "expectation") {
        mode = froute::sim::SimMode::expectation;
    } else if (mode_flag == "sampled") {
        mode = froute::sim::SimMode::sampled;
    } else if (!mode_flag.empty()) {
        std::cerr << "error: unknown mode '" << mode_flag << "'\n";
        return kExitUsage;
    }
    auto seed = seed_flag ? seed_flag : env_seed();
    auto run = froute::sim::run_scenario(*parsed.value, mode, seed);
    if (!run) {
        std::cerr << "error: " << run.error << "\n";
        return kExitUsage;
    }
    const auto& report = *run.value;

    if (!out_dir.empty()) {
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        write_file(fs::path(out_dir) / "report.json", froute::sim::report_to_json(report));
        write_file(fs::path(out_dir) / "completion_buckets.csv",
                   froute::sim::completion_series_csv(report));
        write_file(fs::path(out_dir) / "switches.jsonl", froute::sim::switches_to_jsonl(report));
        std::string traces;
        for (const auto& t : report.traces) traces += froute::trace_to_jsonl(t) + "\n";
        write_file(fs::path(out_dir) / "traces.jsonl", traces);
        std::string events;
        for (const auto& e : report.events) events += froute::event_to_jsonl(e) + "\n";
        write_file(fs::path(out_dir) / "events.jsonl", events);
        std::string incidents;
        for (const auto& m : report.incidents) incidents += froute::incident_to_jsonl(m) + "\n";
        write_file(fs::path(out_dir) / "incidents.jsonl", incidents);
        std::string snapshots;
        for (const auto& s : report.final_snapshots)
            snapshots += froute::snapshot_to_jsonl(s) + "\n";
        write_file(fs::path(out_dir) / "snapshots.jsonl", snapshots);
    }

    if (format == "json") {
        std::cout << froute::sim::report_to_json(report) << "\n";
    } else if (format == "csv") {
        std::cout << froute::sim::completion_series_csv(report);
    } else {
        print_simulation_summary(report);
    }

    if (parsed.value->check_conformance && !parsed.value->forced_switch_sweep_min) {
        auto conf = froute::sim::check_state_machine(report, *parsed.value);
        if (format != "json" && format != "csv") {
            for (const auto& [scope, w] : parsed.value->regions) {
                (void)w;
                std::cout << "  preference path [" << scope << "]: " << conf.path(scope) << "\n";
            }
        }
        if (!conf.conformant) {
            for (const auto& v : conf.violations) std::cerr << v << "\n";
            return kExitValidation;
        }
    }
    return kExitOk;
}

int cmd_replay(const std::string& log_path, const std::string& config_path,
               const std::string& out_file, froute::Millis window_ms, froute::Millis bucket_ms,
               froute::Millis tau_ms, const std::string& format) {
    auto config = froute::load_factor_list_file(config_path);
    if (!config) {
        std::cerr << "error: " << config.error << "\n";
        return kExitUsage;
    }
    auto violations = froute::validate_factor_list(*config.value);
    if (!violations.empty()) {
        std::cerr << "error: invalid factor list: " << violations.front() << "\n";
        return kExitUsage;
    }
    froute::sim::ReplayOptions options;
    options.telemetry.window_ms = window_ms;
    options.telemetry.bucket_ms = bucket_ms;
    options.telemetry.incident_decay_tau_ms = tau_ms;
    auto run = froute::sim::replay_file(log_path, *config.value, options);
    if (!run) {
        std::cerr << "error: " << run.error << "\n";
        return kExitUsage;
    }
    const auto& r = *run.value;
    if (format == "json") {
        std::cout << froute::sim::replay_report_to_json(r) << "\n";
    } else {
        std::cout << "replayed " << r.decisions << " decisions against version "
                  << r.candidate_version << "\n";
        std::cout << "  diffs: " << r.diffs << " (" << r.substituted_outcomes
                  << " substituted outcomes)\n";
        std::cout << "  switches: " << r.recorded_switches << " -> " << r.counterfactual_switches
                  << " (delta " << (r.counterfactual_switches - r.recorded_switches) << ")\n";
        std::cout << "  flaps: " << r.recorded_flaps << " -> " << r.counterfactual_flaps
                  << " (delta " << (r.counterfactual_flaps - r.recorded_flaps) << ")\n";
        std::cout << "  expected_failure_delta: " << r.expected_failure_delta << "\n";
    }
    if (!out_file.empty()) write_file(out_file, froute::sim::replay_report_to_json(r));
    return kExitOk;
}

void print_trace_narrative(const froute::DecisionTrace& t) {
    std::cout << "request " << t.request_id << " (trace " << t.trace_id
              << ") at t=" << t.timestamp << "\n";
    if (t.factor_list_version.empty()) {
        std::cout << "  config store unavailable; fallback "
                  << (t.fallback ? froute::to_string(*t.fallback) : "?") << "\n";
        return;
    }
    std::cout << "  factor list " << t.factor_list_version << ", snapshot '" << t.snapshot_id
              << "' ts=" << t.snapshot_ts << (t.snapshot_stale ? " (STALE)" : " (fresh)") << "\n";
    std::cout << "  gates:\n";
    std::string current;
    for (const auto& g : t.gate_results) {
        if (g.provider.name != current) {
            current = g.provider.name;
            std::cout << "    " << current << ":\n";
        }
        std::cout << "      " << froute::to_string(g.gate) << " " << (g.passed ? "PASS" : "FAIL")
                  << (g.reason.empty() ? "" : " (" + g.reason + ")") << "\n";
    }
    if (!t.candidates.empty()) {
        std::cout << "  scores:\n";
        for (const auto& c : t.candidates) {
            std::cout << "    " << c.provider.name << (c.probe ? " [probe]" : "") << ":\n";
            for (const auto& f : c.per_factor) {
                std::cout << "      " << froute::to_string(f.factor) << " raw=";
                if (f.raw) {
                    std::cout << *f.raw;
                } else {
                    std::cout << "absent";
                }
                std::cout << " -> norm=" << f.normalized << " x w=" << f.weight << " = "
                          << f.normalized * f.weight << (f.used_default ? " [default]" : "")
                          << "\n";
            }
            std::cout << "      total " << c.total << "\n";
        }
    }
    std::cout << "  previous choice: " << (t.previous_choice ? t.previous_choice->name : "none")
              << "; hysteresis suppressed switch: " << (t.hysteresis_applied ? "yes" : "no")
              << "; tie break: "
              << (t.tie_break_applied ? froute::to_string(*t.tie_break_applied) : "none") << "\n";
    if (t.selected) {
        std::cout << "  selected: " << t.selected->name << "\n";
    } else {
        std::cout << "  no eligible providers -> fallback " << froute::to_string(*t.fallback)
                  << "\n";
    }
}

int cmd_explain(const std::string& trace_path, const std::string& request_id) {
    std::ifstream in(trace_path, std::ios::binary);
    if (!in) {
        std::cerr << "error: cannot read " << trace_path << "\n";
        return kExitUsage;
    }
    std::string line;
    std::string error;
    bool found = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto trace = froute::trace_from_jsonl(line, error);
        if (!trace) continue;
        if (trace->request_id != request_id) continue;
        found = true;
        print_trace_narrative(*trace);
    }
    if (!found) {
        std::cerr << "request " << request_id << " not found in " << trace_path << "\n";
        return kExitValidation;
    }
    return kExitOk;
}

int cmd_model(bool table2, const std::vector<double>& avail, double lambda, double duration,
              double switch_min, double pf, double ps, bool have_switch,
              const std::string& format) {
    ordered_json out;
    if (table2) {
        auto rows = froute::sim::failover_model_table();
        if (format == "json") {
            ordered_json arr = ordered_json::array();
            for (const auto& row : rows) {
                arr.push_back(ordered_json{{"label", row.label},
                                           {"failover_delay_min", row.switch_min},
                                           {"expected_failures", std::llround(row.expected)},
                                           {"note", row.note}});
            }
            out["table"] = std::move(arr);
            std::cout << out.dump(2) << "\n";
        } else {
            std::cout << "expected failed requests per 1000 req/min, 10-minute outage"
                         " (pf=0.05, ps=0.99):\n";
            for (const auto& row : rows) {
                std::cout << "  " << row.label << " (" << row.switch_min
                          << " min): " << std::llround(row.expected);
                if (!row.note.empty()) std::cout << "  [" << row.note << "]";
                std::cout << "\n";
            }
        }
        return kExitOk;
    }
    if (!avail.empty()) {
        for (double a : avail) {
            if (a < 0 || a > 1) {
                std::cerr << "error: availability values must be in [0,1]\n";
                return kExitUsage;
            }
        }
        auto serial = froute::sim::availability_serial(avail);
        if (format == "json") {
            out["serial"] = *serial;
            if (avail.size() == 2)
                out["parallel"] = froute::sim::availability_parallel(avail[0], avail[1]);
            std::cout << out.dump(2) << "\n";
        } else {
            std::cout << "serial availability: " << *serial << "\n";
            if (avail.size() == 2)
                std::cout << "parallel availability: "
                          << froute::sim::availability_parallel(avail[0], avail[1]) << "\n";
        }
        return kExitOk;
    }
    if (have_switch) {
        if (lambda <= 0 || duration < 0 || pf < 0 || pf > 1 || ps < 0 || ps > 1) {
            std::cerr << "error: invalid model parameters\n";
            return kExitUsage;
        }
        const double expected =
            froute::sim::expected_failures(lambda, duration, switch_min, pf, ps);
        if (format == "json") {
            out["expected_failures"] = expected;
            std::cout << out.dump(2) << "\n";
        } else {
            std::cout << "expected_failures: " << expected << "\n";
        }
        return kExitOk;
    }
    std::cerr << "error: give --table2, --avail, or --switch with model parameters\n";
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"configuration-driven dynamic routing engine and failover simulator"};
    app.require_subcommand(1);

    std::string validate_path;
    bool strict = true;
    auto* validate = app.add_subcommand("validate", "validate a factor-list config file");
    validate->add_option("config", validate_path, "factor list YAML")->required();
    validate->add_flag("--strict", strict, "strict parsing (default)");

    std::string sim_path;
    std::string sim_mode;
    std::string sim_out;
    std::string sim_format = "text";
    std::optional<std::uint64_t> sim_seed;
    auto* simulate = app.add_subcommand("simulate", "run a fault-injection scenario");
    simulate->add_option("scenario", sim_path, "scenario YAML")->required();
    simulate->add_option("--mode", sim_mode, "expectation | sampled");
    simulate->add_option("--seed", sim_seed, "seed override");
    simulate->add_option("--out", sim_out, "output directory for report files");
    simulate->add_option("--format", sim_format, "text | json | csv");

    std::string replay_log;
    std::string replay_config;
    std::string replay_out;
    std::string replay_format = "text";
    froute::Millis replay_window = 60000;
    froute::Millis replay_bucket = 5000;
    froute::Millis replay_tau = 300000;
    auto* replay = app.add_subcommand("replay", "replay an event log against a candidate config");
    replay->add_option("log", replay_log, "JSONL event log")->required();
    replay->add_option("config", replay_config, "candidate factor list YAML")->required();
    replay->add_option("--out", replay_out, "write full JSON report to this file");
    replay->add_option("--window-ms", replay_window, "metric window (must match the recording)");
    replay->add_option("--bucket-ms", replay_bucket, "metric bucket");
    replay->add_option("--tau-ms", replay_tau, "incident decay constant (must match)");
    replay->add_option("--format", replay_format, "text | json");

    std::string explain_path;
    std::string explain_request;
    auto* explain = app.add_subcommand("explain", "narrate the decision for a request id");
    explain->add_option("traces", explain_path, "JSONL decision traces")->required();
    explain->add_option("request_id", explain_request, "request id")->required();

    bool table2 = false;
    std::vector<double> avail;
    double lambda = 1000;
    double duration = 10;
    double switch_min = 0;
    double pf = 0.05;
    double ps = 0.99;
    std::string model_format = "text";
    auto* model = app.add_subcommand("model", "analytical failover model");
    model->add_flag("--table2", table2, "print the failover sensitivity table");
    model->add_option("--avail", avail, "availability list for the serial/parallel formulas");
    model->add_option("--lambda", lambda, "arrival rate per minute");
    model->add_option("--duration", duration, "outage duration in minutes");
    auto* switch_opt = model->add_option("--switch", switch_min, "failover delay in minutes");
    model->add_option("--pf", pf, "primary success probability during outage");
    model->add_option("--ps", ps, "secondary success probability");
    model->add_option("--format", model_format, "text | json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(validate_path, strict);
        if (simulate->parsed())
            return cmd_simulate(sim_path, sim_mode, sim_seed, sim_out, sim_format);
        if (replay->parsed())
            return cmd_replay(replay_log, replay_config, replay_out, replay_window, replay_bucket,
                              replay_tau, replay_format);
        if (explain->parsed()) return cmd_explain(explain_path, explain_request);
        if (model->parsed())
            return cmd_model(table2, avail, lambda, duration, switch_min, pf, ps,
                             switch_opt->count() > 0, model_format);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
