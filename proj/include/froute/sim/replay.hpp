#pragma once

#include <optional>
#include <string>
#include <vector>

#include "froute/router.hpp"
#include "froute/sim/engine.hpp"

namespace froute::sim {

struct ReplayOptions {
    WindowConfig telemetry;  // must match the settings that produced the log
    int max_diff_samples = 20;
};

struct ReplayDiff {
    std::string request_id;
    int retry_count = 0;
    Millis ts = 0;
    std::string recorded;        // provider attempted in the log
    std::string counterfactual;  // provider (or fallback kind) chosen on replay
    bool substituted = false;    // outcome was approximated from window stats
};

struct ReplayReport {
    std::string candidate_version;
    long long decisions = 0;
    long long diffs = 0;
    long long substituted_outcomes = 0;

    long long recorded_switches = 0;
    long long counterfactual_switches = 0;
    long long recorded_flaps = 0;
    long long counterfactual_flaps = 0;

    double recorded_failures = 0;
    double counterfactual_failures = 0;
    double expected_failure_delta = 0;  // counterfactual - recorded

    std::vector<SwitchEvent> counterfactual_switch_timeline;
    std::vector<ReplayDiff> diff_samples;
};

/// Re-drive the router over a recorded event stream with a candidate
/// factor list. When the counterfactual selection matches the recorded
/// attempt, the recorded outcome is reused; otherwise the outcome is a
/// seeded draw from the substituted provider's recorded window statistics
/// at that timestamp (an explicit approximation, flagged per decision).
Parsed<ReplayReport> replay(const std::vector<AttemptEvent>& log, const FactorList& candidate,
                            const ReplayOptions& options = {});

Parsed<ReplayReport> replay_file(const std::string& log_path, const FactorList& candidate,
                                 const ReplayOptions& options = {});

std::string replay_report_to_json(const ReplayReport& report);

}  // namespace froute::sim
