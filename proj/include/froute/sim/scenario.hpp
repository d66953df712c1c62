#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "froute/config.hpp"
#include "froute/domain.hpp"
#include "froute/telemetry.hpp"

namespace froute::sim {

enum class LatencyKind : std::uint8_t { constant, lognormal };

struct LatencyDist {
    LatencyKind kind = LatencyKind::constant;
    double value_ms = 100;   // constant
    double median_ms = 100;  // lognormal
    double sigma = 0.3;      // lognormal
};

enum class FaultKind : std::uint8_t {
    full_outage,
    partial_regional,
    rate_limit,
    latency_only,
    recovery_ramp,
};

struct FaultPhase {
    Millis start_ms = 0;
    Millis end_ms = 0;
    FaultKind kind = FaultKind::full_outage;
    double degraded_success_prob = 0;
    std::vector<std::string> affected_regions;  // empty = all
    double latency_multiplier = 1.0;
    double reject_fraction = 0;  // fraction answered with a throttle response
    Millis ramp_duration_ms = 0;
};

struct RegionBehavior {
    std::optional<double> success_prob;
    double latency_multiplier = 1.0;
};

/// Synthetic provider: success probability, latency distribution, cost,
/// per-region overrides and a timeline of injected faults.
struct ProviderModel {
    ProviderId id;
    double base_success_prob = 0.99;
    LatencyDist latency;
    double cost_per_attempt = 0.01;
    std::map<std::string, RegionBehavior> per_region;
    std::vector<FaultPhase> fault_timeline;
};

/// Success probability / latency multiplier / throttle fraction in force
/// for one provider, region and instant.
struct EffectiveBehavior {
    double success_prob = 1.0;
    double latency_multiplier = 1.0;
    double reject_fraction = 0;
};
EffectiveBehavior provider_behavior(const ProviderModel& model, const std::string& region,
                                    Millis t);

enum class ArrivalProcess : std::uint8_t { deterministic_uniform, poisson };
enum class SimMode : std::uint8_t { sampled, expectation };

struct TelemetryImpairment {
    std::optional<Millis> lag_ms;
    std::optional<Millis> frozen_from_ms;
};

struct ConfigImpairment {
    Millis unavailable_from_ms = 0;
    std::optional<Millis> unavailable_until_ms;
    std::optional<Millis> store_bound_ms;  // last-known-good service bound
};

struct FailoverBoundTerms {
    double t_detect_ms = 0;
    double t_publish_ms = 0;
    double t_aggregate_ms = 0;
    double t_refresh_ms = 0;
    double t_decision_ms = 0;
};

struct Scenario {
    std::string name;
    Millis duration_ms = 60000;
    double arrival_rate_per_min = 600;
    ArrivalProcess arrival_process = ArrivalProcess::deterministic_uniform;
    SimMode mode = SimMode::sampled;
    std::uint64_t seed = 1;
    std::vector<std::pair<std::string, double>> regions;  // ordered; weights sum to 1
    int user_pool = 1000;
    std::vector<ProviderModel> providers;
    FactorList factor_list;
    std::optional<TelemetryImpairment> telemetry_impairment;
    std::optional<ConfigImpairment> config_impairment;
    WindowConfig telemetry;
    /// When set, the router is bypassed: each entry runs one pass with all
    /// traffic forced to the first provider until the given minute, then
    /// to the second. Used for the analytical-model comparison.
    std::optional<std::vector<double>> forced_switch_sweep_min;
    std::optional<FailoverBoundTerms> failover_bound;
    bool check_conformance = false;

    [[nodiscard]] const ProviderModel* find_provider(const ProviderId& id) const;
};

Parsed<Scenario> parse_scenario(const std::string& text);
Parsed<Scenario> load_scenario_file(const std::string& path);
std::vector<std::string> validate_scenario(const Scenario& s);

std::string_view to_string(FaultKind v) noexcept;
std::string_view to_string(ArrivalProcess v) noexcept;
std::string_view to_string(SimMode v) noexcept;

}  // namespace froute::sim
