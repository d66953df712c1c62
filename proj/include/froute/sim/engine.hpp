#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "froute/router.hpp"
#include "froute/sim/scenario.hpp"

namespace froute::sim {

/// Deterministic generator used for every draw in a run. Fixed algorithm
/// (splitmix64 stream) so a seed reproduces bit-identical results across
/// builds and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() noexcept;
    double uniform01() noexcept;                     // [0,1)
    double exponential(double mean) noexcept;        // inverse CDF
    double normal() noexcept;                        // Box-Muller
    double lognormal(double median, double sigma) noexcept;

private:
    std::uint64_t state_;
};

struct ProviderStats {
    long long attempts = 0;
    double workflow_successes = 0;
    double failures = 0;
    double cost = 0;
};

struct SwitchEvent {
    Millis ts = 0;
    std::string scope;
    std::string from;
    std::string to;
    std::string trace_id;
};

struct CompletionBucket {
    Millis bucket_start = 0;
    // provider -> (attempted, completed); "__all__" aggregates.
    std::map<std::string, std::pair<double, double>> per_provider;
};

struct SweepRow {
    std::string label;
    double switch_min = 0;
    double simulated_failures = 0;
    double expected_failures = 0;  // closed form with the same parameters
    double sigma = 0;              // binomial std dev (sampled mode)
};

struct SimReport {
    std::string scenario_name;
    SimMode mode = SimMode::sampled;
    std::uint64_t seed = 0;
    Millis duration_ms = 0;

    long long total_requests = 0;
    double completed_requests = 0;
    double failed_requests = 0;
    long long fallback_requests = 0;
    long long shed_requests = 0;
    long long total_attempts = 0;
    double cost_total = 0;

    std::map<ProviderId, ProviderStats> provider_stats;

    std::vector<SwitchEvent> switch_timeline;
    long long switch_count = 0;
    long long flap_count = 0;  // immediate reversals (A->B then B->A)

    std::optional<Millis> observed_failover_delay_ms;
    std::optional<double> failover_bound_ms;
    bool bound_respected = true;
    std::optional<double> model_expected_failures;  // closed form at observed delay

    std::vector<CompletionBucket> completion_series;
    std::vector<SweepRow> sweep;

    long long trace_total = 0;
    long long trace_complete = 0;

    // Raw streams for conformance checking and file output.
    std::vector<DecisionTrace> traces;
    std::vector<std::string> trace_scopes;  // parallel to traces
    std::vector<IncidentMarker> incidents;
    std::vector<AttemptEvent> events;
    std::vector<MetricSnapshot> final_snapshots;  // aggregates at scenario end
};

Parsed<SimReport> run_scenario(const Scenario& scenario);

/// Same scenario with mode/seed overridden (CLI flags).
Parsed<SimReport> run_scenario(const Scenario& scenario, std::optional<SimMode> mode,
                               std::optional<std::uint64_t> seed);

std::string report_to_json(const SimReport& report);
std::string completion_series_csv(const SimReport& report);
std::string switches_to_jsonl(const SimReport& report);

}  // namespace froute::sim
