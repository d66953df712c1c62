#pragma once

#include <string>

#include "froute/config.hpp"
#include "froute/domain.hpp"
#include "froute/telemetry.hpp"

namespace froute::testing {

/// Two-provider factor list in the default shape: three gates, four
/// weighted factors, alpha preferred on cost.
inline FactorList make_two_provider_list() {
    FactorList fl;
    fl.operation = {"SEND_SMS"};
    ProviderConfig alpha;
    alpha.id = {"alpha"};
    alpha.supported_regions = {"US", "BR"};
    alpha.has_supported_regions = true;
    alpha.static_cost = 0.004;
    alpha.priority = 0;
    ProviderConfig beta;
    beta.id = {"beta"};
    beta.supported_regions = {"US", "BR"};
    beta.has_supported_regions = true;
    beta.static_cost = 0.02;
    beta.priority = 1;
    fl.providers = {alpha, beta};
    fl.gates = {{GateKind::circuit_closed, {}},
                {GateKind::region_supported, {}},
                {GateKind::quota_available, {}}};
    ScoreFactorSpec completion{ScoreFactorKind::completion_rate, 0.5,
                               Orientation::higher_is_better, std::nullopt, std::nullopt, 0.5};
    ScoreFactorSpec latency{ScoreFactorKind::latency_p95, 0.2, Orientation::lower_is_better,
                            100.0, 1100.0, 0.5};
    ScoreFactorSpec cost{ScoreFactorKind::cost, 0.15, Orientation::lower_is_better, 0.001, 0.05,
                         0.5};
    ScoreFactorSpec incident{ScoreFactorKind::incident_penalty, 0.15,
                             Orientation::lower_is_better, std::nullopt, std::nullopt, 1.0};
    fl.scores = {completion, latency, cost, incident};
    fl.control.default_provider = {"alpha"};
    fl.version = compute_version_id(fl);
    return fl;
}

inline AttemptEvent make_event(const std::string& request_id, const std::string& provider,
                               Millis start, Millis latency, bool completed,
                               const std::string& region = "US", int retry = 0) {
    AttemptEvent e;
    e.request_id = request_id;
    e.operation = {"SEND_SMS"};
    e.provider = {provider};
    e.region = region;
    e.start_time = start;
    e.end_time = start + latency;
    e.latency_ms = static_cast<double>(latency);
    e.retry_count = retry;
    if (completed) {
        e.transport = {TransportKind::success, 200, std::nullopt};
        e.business = {BusinessKind::completed};
    } else {
        e.transport = {TransportKind::server_error, 500, std::nullopt};
        e.business = {BusinessKind::failed};
    }
    e.cost = 0.004;
    e.factor_list_version = "testviewversion0";
    e.trace_id = "t-" + request_id;
    return e;
}

inline MetricSnapshot make_snapshot(const std::string& provider, double completion_rate,
                                    double p95, double mean_cost, double incident_penalty,
                                    long long samples, Millis freshness) {
    MetricSnapshot s;
    s.key = {{"SEND_SMS"}, {provider}, "US"};
    s.attempted = samples;
    s.completed = static_cast<long long>(completion_rate * static_cast<double>(samples));
    s.completion_rate = completion_rate;
    s.latency_p95_ms = p95;
    s.latency_p99_ms = p95 * 1.2;
    s.mean_cost = mean_cost;
    s.incident_penalty = incident_penalty;
    s.sample_count = samples;
    s.freshness_ts = freshness;
    s.snapshot_id = "000000000001";
    return s;
}

}  // namespace froute::testing
