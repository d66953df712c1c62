#include "froute/sim/replay.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "json.hpp"

namespace froute::sim {

using ordered_json = nlohmann::ordered_json;

namespace {

struct SwitchCounter {
    std::map<std::string, std::string> last_provider;                    // per scope
    std::map<std::string, std::pair<std::string, std::string>> last_sw;  // per scope
    long long switches = 0;
    long long flaps = 0;

    void observe(const std::string& scope, const std::string& provider) {
        auto it = last_provider.find(scope);
        if (it != last_provider.end() && it->second != provider) {
            ++switches;
            auto& prev = last_sw[scope];
            if (prev.first == provider && prev.second == it->second) ++flaps;
            prev = {it->second, provider};
        }
        last_provider[scope] = provider;
    }
};

/// Rolling per-provider view of the *recorded* log, for counterfactual
/// outcome substitution.
struct RecordedStats {
    struct Rec {
        Millis ts;
        bool success;
        double latency;
        double cost;
    };
    std::map<ProviderId, std::deque<Rec>> window;
    std::map<ProviderId, std::pair<long long, long long>> lifetime;  // attempted, completed
    Millis window_ms;

    explicit RecordedStats(Millis w) : window_ms(w) {}

    void push(const AttemptEvent& e) {
        const bool success = is_workflow_success(e.business.kind);
        auto& dq = window[e.provider];
        dq.push_back({e.start_time, success, e.latency_ms, e.cost});
        auto& life = lifetime[e.provider];
        life.first += 1;
        if (success) life.second += 1;
    }

    void trim(Millis now) {
        for (auto& [_, dq] : window) {
            while (!dq.empty() && dq.front().ts <= now - window_ms) dq.pop_front();
        }
    }

    /// Success probability for a substituted attempt: in-window completion
    /// rate when observed, else lifetime rate, else optimistic 1.
    double success_prob(const ProviderId& id, Millis now) {
        trim(now);
        auto it = window.find(id);
        if (it != window.end() && !it->second.empty()) {
            long long done = 0;
            for (const auto& rec : it->second) done += rec.success ? 1 : 0;
            return static_cast<double>(done) / static_cast<double>(it->second.size());
        }
        auto lit = lifetime.find(id);
        if (lit != lifetime.end() && lit->second.first > 0) {
            return static_cast<double>(lit->second.second) /
                   static_cast<double>(lit->second.first);
        }
        return 1.0;
    }

    double mean_latency(const ProviderId& id, Millis now, double fallback) {
        trim(now);
        auto it = window.find(id);
        if (it == window.end() || it->second.empty()) return fallback;
        double sum = 0;
        for (const auto& rec : it->second) sum += rec.latency;
        return sum / static_cast<double>(it->second.size());
    }

    double mean_cost(const ProviderId& id, Millis now, double fallback) {
        trim(now);
        auto it = window.find(id);
        if (it == window.end() || it->second.empty()) return fallback;
        double sum = 0;
        for (const auto& rec : it->second) sum += rec.cost;
        return sum / static_cast<double>(it->second.size());
    }
};

}  // namespace

Parsed<ReplayReport> replay(const std::vector<AttemptEvent>& log, const FactorList& candidate,
                            const ReplayOptions& options) {
    Parsed<ReplayReport> result;
    auto violations = validate_factor_list(candidate);
    if (!violations.empty()) {
        result.error = "invalid factor list: " + violations.front();
        return result;
    }
    for (const auto& e : log) {
        if (e.schema_version != 1) {
            result.error = "incompatible_schema_version: event " + e.request_id + " has version " +
                           std::to_string(e.schema_version);
            return result;
        }
    }

    ReplayReport report;
    report.candidate_version = candidate.version;

    ConfigStore store;
    auto put = store.put(candidate);
    if (!put) {
        result.error = "invalid factor list: " + put.error;
        return result;
    }
    TelemetryHub hub(options.telemetry);
    ProtectionRegistry protection([&hub](const IncidentMarker& m) { hub.add_incident(m); });
    SnapshotCache cache;
    StickyStore sticky;
    RouterEngine engine({&store, &cache, &protection, &sticky});

    RecordedStats recorded(options.telemetry.window_ms);
    SwitchCounter recorded_counter;
    SwitchCounter counterfactual_counter;

    const Millis refresh_interval = candidate.control.metric_refresh_interval_ms;
    Millis next_refresh = refresh_interval;

    for (const auto& e : log) {
        while (next_refresh <= e.start_time) {
            cache.refresh(hub, next_refresh);
            next_refresh += refresh_interval;
        }

        // Probe attempts (dispatched through a half-open circuit) do not
        // move the preference; keep both switch counters on the same basis.
        if (e.circuit_state != CircuitState::half_open)
            recorded_counter.observe(e.region, e.provider.name);
        const bool recorded_success = is_workflow_success(e.business.kind);
        if (!recorded_success) report.recorded_failures += 1;

        RequestContext ctx;
        ctx.request_id = e.request_id;
        ctx.operation = e.operation;
        ctx.region = e.region;
        ctx.tenant = e.tenant;
        ctx.traffic_class = TrafficClass::interactive;
        ctx.timestamp = e.start_time;

        auto outcome = engine.route(ctx, e.start_time);
        report.decisions += 1;

        if (outcome.fallback) {
            report.diffs += 1;
            report.counterfactual_failures += 1;
            if (static_cast<int>(report.diff_samples.size()) < options.max_diff_samples) {
                report.diff_samples.push_back({e.request_id, e.retry_count, e.start_time,
                                               e.provider.name,
                                               std::string(to_string(*outcome.fallback)), false});
            }
            recorded.push(e);
            continue;
        }

        const ProviderId sel = *outcome.selected;
        AttemptEvent cf = e;
        cf.factor_list_version = candidate.version;
        cf.trace_id = outcome.trace.trace_id;

        if (sel != e.provider) {
            report.diffs += 1;
            report.substituted_outcomes += 1;
            const double p = recorded.success_prob(sel, e.start_time);
            const std::uint64_t h =
                fnv1a64(e.request_id + "|" + std::to_string(e.retry_count) + "|" + sel.name);
            const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
            const bool success = u < p;
            cf.provider = sel;
            const auto* pc = candidate.find_provider(sel);
            const double fallback_cost = pc ? pc->static_cost : 0.0;
            cf.cost = quantize_cost(recorded.mean_cost(sel, e.start_time, fallback_cost));
            const double lat = recorded.mean_latency(sel, e.start_time, e.latency_ms);
            cf.latency_ms = std::max(1.0, std::round(lat));
            cf.end_time = cf.start_time + static_cast<Millis>(cf.latency_ms);
            cf.timeout = false;
            if (success) {
                cf.transport = {TransportKind::success, 200, std::nullopt};
                cf.business = {BusinessKind::completed};
            } else {
                cf.transport = {TransportKind::server_error, 500, "substituted"};
                cf.business = {BusinessKind::failed};
            }
            if (static_cast<int>(report.diff_samples.size()) < options.max_diff_samples) {
                report.diff_samples.push_back({e.request_id, e.retry_count, e.start_time,
                                               e.provider.name, sel.name, true});
            }
        }

        const auto outcome_class = classify_outcome(cf.transport, cf.business);
        if (outcome_class != OutcomeClass::workflow_success)
            report.counterfactual_failures += 1;

        cf.circuit_state =
            protection.circuit_state(MetricKey{e.operation, sel, e.region});
        protection.circuit_record(MetricKey{e.operation, sel, e.region},
                                  CircuitConfig::from(candidate.control), outcome_class,
                                  cf.end_time, outcome.probe);
        if (cf.transport.kind == TransportKind::rate_limited) {
            protection.set_throttle(sel, e.region,
                                    e.start_time + candidate.control.throttle_ttl_ms);
        }
        if (const auto* pc = candidate.find_provider(sel)) {
            if (auto* q = protection.quota(sel, pc->quota)) q->consume(e.start_time);
        }
        hub.append_event(cf);
        recorded.push(e);

        if (!outcome.probe) {
            const std::string before =
                counterfactual_counter.last_provider.count(e.region)
                    ? counterfactual_counter.last_provider[e.region]
                    : "";
            counterfactual_counter.observe(e.region, sel.name);
            if (!before.empty() && before != sel.name) {
                report.counterfactual_switch_timeline.push_back(
                    {e.start_time, e.region, before, sel.name, outcome.trace.trace_id});
            }
        }
    }

    report.recorded_switches = recorded_counter.switches;
    report.recorded_flaps = recorded_counter.flaps;
    report.counterfactual_switches = counterfactual_counter.switches;
    report.counterfactual_flaps = counterfactual_counter.flaps;
    report.expected_failure_delta = report.counterfactual_failures - report.recorded_failures;

    result.value = std::move(report);
    return result;
}

Parsed<ReplayReport> replay_file(const std::string& log_path, const FactorList& candidate,
                                 const ReplayOptions& options) {
    auto loaded = load_event_log(log_path, /*strict=*/true);
    if (!loaded) {
        Parsed<ReplayReport> result;
        result.error = loaded.fatal;
        return result;
    }
    return replay(loaded.events, candidate, options);
}

std::string replay_report_to_json(const ReplayReport& r) {
    ordered_json j;
    j["candidate_version"] = r.candidate_version;
    j["decisions"] = r.decisions;
    j["diffs"] = r.diffs;
    j["substituted_outcomes"] = r.substituted_outcomes;
    j["recorded_switches"] = r.recorded_switches;
    j["counterfactual_switches"] = r.counterfactual_switches;
    j["switches_delta"] = r.counterfactual_switches - r.recorded_switches;
    j["recorded_flaps"] = r.recorded_flaps;
    j["counterfactual_flaps"] = r.counterfactual_flaps;
    j["flap_delta"] = r.counterfactual_flaps - r.recorded_flaps;
    j["recorded_failures"] = r.recorded_failures;
    j["counterfactual_failures"] = r.counterfactual_failures;
    j["expected_failure_delta"] = r.expected_failure_delta;
    ordered_json diffs = ordered_json::array();
    for (const auto& d : r.diff_samples) {
        diffs.push_back(ordered_json{{"request_id", d.request_id},
                                     {"retry_count", d.retry_count},
                                     {"ts", d.ts},
                                     {"recorded", d.recorded},
                                     {"counterfactual", d.counterfactual},
                                     {"substituted", d.substituted}});
    }
    j["diff_samples"] = std::move(diffs);
    return j.dump(2);
}

}  // namespace froute::sim
