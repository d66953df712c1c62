// Test-only reference implementations, independent of the library's
// streaming/decision code paths. Everything here recomputes results from
// first principles so the production implementations can be checked
// against them.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "froute/config.hpp"
#include "froute/domain.hpp"
#include "froute/telemetry.hpp"

namespace froute::testing {

struct OracleLink {
    std::string request_id;
    BusinessKind kind;
    Millis ts;
};

struct OracleAggregate {
    long long attempted = 0;
    long long completed = 0;
    std::optional<double> completion_rate;
    std::optional<double> p95;
    std::optional<double> p99;
};

inline std::optional<double> oracle_percentile(std::vector<double> values, double q) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

/// Full rescan over the raw event list for one key and window
/// [from_exclusive+1, to] in event start_time. Completion counts an event
/// if its own business outcome is a workflow success, or a link for its
/// request (attributed to the latest attempt at link time) arrived within
/// the link timeout.
inline OracleAggregate brute_force_aggregate(const std::vector<AttemptEvent>& events,
                                             const std::vector<OracleLink>& links,
                                             const MetricKey& key, Millis window_from_exclusive,
                                             Millis window_to_inclusive,
                                             Millis link_timeout_ms) {
    // Resolve each link to the latest attempt with that request id whose
    // start_time <= link ts (matching ingest order semantics).
    std::map<std::string, std::size_t> latest_attempt;
    std::set<std::size_t> completed_idx;
    std::vector<std::size_t> order(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        latest_attempt[events[i].request_id] = i;
        if (is_workflow_success(events[i].business.kind)) completed_idx.insert(i);
    }
    // Links arrive after all events in these tests; attribute to the
    // latest attempt overall.
    for (const auto& link : links) {
        if (!is_workflow_success(link.kind)) continue;
        auto it = latest_attempt.find(link.request_id);
        if (it == latest_attempt.end()) continue;
        const auto& attempt = events[it->second];
        if (link.ts - attempt.start_time <= link_timeout_ms) completed_idx.insert(it->second);
    }

    OracleAggregate out;
    std::vector<double> latencies;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (e.operation != key.operation || e.provider != key.provider) continue;
        if (key.scope != kGlobalScope && e.region != key.scope) continue;
        if (e.start_time <= window_from_exclusive || e.start_time > window_to_inclusive)
            continue;
        out.attempted += 1;
        if (completed_idx.count(i)) out.completed += 1;
        latencies.push_back(e.latency_ms);
    }
    if (out.attempted > 0)
        out.completion_rate =
            static_cast<double>(out.completed) / static_cast<double>(out.attempted);
    out.p95 = oracle_percentile(latencies, 0.95);
    out.p99 = oracle_percentile(latencies, 0.99);
    return out;
}

// ---------------------------------------------------------------------------
// Exhaustive decision evaluator: candidate set, normalization, weighted
// score, argmax and the hysteresis rule, written as straight loops over
// the same inputs the router sees.
// ---------------------------------------------------------------------------

struct OracleProviderInput {
    ProviderId id;
    bool enabled = true;
    bool region_ok = true;
    bool circuit_open = false;
    long long sample_count = 0;  // 0 = never observed in scope
    std::optional<double> completion_rate;
    std::optional<double> latency_p95;
    std::optional<double> mean_cost;
    double static_cost = 0;
    std::optional<double> incident_penalty;
};

struct OracleDecisionInput {
    std::vector<OracleProviderInput> providers;
    std::vector<ScoreFactorSpec> factors;
    bool gate_enabled_configured = true;
    bool gate_region_configured = true;
    bool gate_circuit_configured = true;
    bool gate_min_samples_configured = false;
    int min_sample_count = 10;
    double hysteresis_delta = 0.05;
    Millis cooldown_ms = 0;
    int sustained_windows_required = 1;
    std::optional<ProviderId> incumbent;
    Millis last_switch_ts = std::numeric_limits<Millis>::min() / 4;
    int challenger_streak = 0;
    Millis now = 0;
};

struct OracleDecision {
    bool fallback = false;
    std::set<std::string> admissible;  // selection must be one of these
    std::set<std::string> gated_out;
};

inline double oracle_normalize(const ScoreFactorSpec& f, std::optional<double> raw) {
    if (!raw) return f.default_value;
    if (f.orientation == Orientation::higher_is_better)
        return std::clamp(*raw, 0.0, 1.0);
    if (!f.lower_bound || !f.upper_bound) return 1.0 - std::clamp(*raw, 0.0, 1.0);
    const double clipped = std::min(std::max(*raw, *f.lower_bound), *f.upper_bound);
    return 1.0 - (clipped - *f.lower_bound) / (*f.upper_bound - *f.lower_bound);
}

inline double oracle_score(const OracleDecisionInput& in, const OracleProviderInput& p) {
    double total = 0;
    for (const auto& f : in.factors) {
        std::optional<double> raw;
        switch (f.kind) {
            case ScoreFactorKind::completion_rate: raw = p.completion_rate; break;
            case ScoreFactorKind::latency_p95: raw = p.latency_p95; break;
            case ScoreFactorKind::latency_p99: raw = p.latency_p95; break;
            case ScoreFactorKind::cost:
                raw = p.mean_cost ? p.mean_cost : std::optional<double>(p.static_cost);
                break;
            case ScoreFactorKind::incident_penalty: raw = p.incident_penalty; break;
        }
        total += f.weight * oracle_normalize(f, raw);
    }
    return total;
}

inline OracleDecision oracle_decide(const OracleDecisionInput& in) {
    OracleDecision out;
    std::vector<const OracleProviderInput*> eligible;
    for (const auto& p : in.providers) {
        bool pass = true;
        if (in.gate_enabled_configured && !p.enabled) pass = false;
        if (in.gate_region_configured && !p.region_ok) pass = false;
        if (in.gate_circuit_configured && p.circuit_open) pass = false;
        if (in.gate_min_samples_configured && p.sample_count > 0 &&
            p.sample_count < in.min_sample_count)
            pass = false;
        if (pass) {
            eligible.push_back(&p);
        } else {
            out.gated_out.insert(p.id.name);
        }
    }
    if (eligible.empty()) {
        out.fallback = true;
        return out;
    }
    std::map<std::string, double> totals;
    double top = -1;
    for (const auto* p : eligible) {
        const double s = oracle_score(in, *p);
        totals[p->id.name] = s;
        top = std::max(top, s);
    }
    auto top_set = [&] {
        std::set<std::string> s;
        for (const auto& [name, total] : totals) {
            if (total >= top - 1e-9) s.insert(name);
        }
        return s;
    };

    const bool incumbent_eligible =
        in.incumbent && totals.count(in.incumbent->name) > 0;
    if (!incumbent_eligible) {
        out.admissible = top_set();
        return out;
    }
    const double inc_total = totals[in.incumbent->name];
    double best_other = -1;
    for (const auto& [name, total] : totals) {
        if (name != in.incumbent->name) best_other = std::max(best_other, total);
    }
    const bool exceeds = best_other > inc_total + in.hysteresis_delta;
    if (exceeds) {
        const bool cooled = in.now - in.last_switch_ts >= in.cooldown_ms;
        const int streak = in.challenger_streak + 1;
        if (cooled && streak >= in.sustained_windows_required) {
            out.admissible = top_set();
            return out;
        }
    }
    out.admissible = {in.incumbent->name};
    return out;
}

}  // namespace froute::testing
