#include "froute/sim/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "froute/sim/analytical.hpp"
#include "json.hpp"

namespace froute::sim {

using ordered_json = nlohmann::ordered_json;

std::uint64_t Rng::next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double Rng::uniform01() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::exponential(double mean) noexcept {
    double u = uniform01();
    if (u >= 1.0) u = std::nextafter(1.0, 0.0);
    return -std::log(1.0 - u) * mean;
}

double Rng::normal() noexcept {
    double u1 = uniform01();
    if (u1 <= 0) u1 = std::nextafter(0.0, 1.0);
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::lognormal(double median, double sigma) noexcept {
    return median * std::exp(sigma * normal());
}

namespace {

std::vector<Millis> generate_arrivals(const Scenario& s, Rng& rng) {
    std::vector<Millis> arrivals;
    const double spacing_ms = 60000.0 / s.arrival_rate_per_min;
    if (s.arrival_process == ArrivalProcess::deterministic_uniform) {
        const auto count = static_cast<long long>(
            std::floor(static_cast<double>(s.duration_ms) / spacing_ms - 1e-9)) + 1;
        arrivals.reserve(static_cast<std::size_t>(count));
        for (long long k = 0; k < count; ++k) {
            const auto t = static_cast<Millis>(std::llround(k * spacing_ms));
            if (t >= s.duration_ms) break;
            arrivals.push_back(t);
        }
    } else {
        double t = 0;
        while (true) {
            t += rng.exponential(spacing_ms);
            const auto ti = static_cast<Millis>(std::llround(t));
            if (ti >= s.duration_ms) break;
            arrivals.push_back(ti);
        }
    }
    return arrivals;
}

Millis draw_latency(const ProviderModel& model, double multiplier, Rng& rng) {
    double ms = 0;
    if (model.latency.kind == LatencyKind::constant) {
        ms = model.latency.value_ms;
    } else {
        ms = rng.lognormal(model.latency.median_ms, model.latency.sigma);
    }
    ms *= multiplier;
    return std::max<Millis>(1, static_cast<Millis>(std::llround(ms)));
}

struct SweepParams {
    double p_f = 0;  // primary success during the fault
    double p_s = 0;  // secondary success
    double duration_min = 0;
};

SweepParams sweep_params(const Scenario& s) {
    SweepParams p;
    p.duration_min = static_cast<double>(s.duration_ms) / 60000.0;
    const auto& primary = s.providers[0];
    p.p_f = primary.base_success_prob;
    if (!primary.fault_timeline.empty())
        p.p_f = primary.fault_timeline.front().degraded_success_prob;
    p.p_s = s.providers[1].base_success_prob;
    return p;
}

void run_forced_sweep(const Scenario& s, SimReport& report) {
    const auto params = sweep_params(s);
    const auto& region = s.regions.front().first;
    for (double switch_min : *s.forced_switch_sweep_min) {
        Rng rng(s.seed ^ fnv1a64("sweep" + std::to_string(switch_min)));
        auto arrivals = generate_arrivals(s, rng);
        const auto switch_at = static_cast<Millis>(std::llround(switch_min * 60000.0));
        double failures = 0;
        double variance = 0;
        for (Millis t : arrivals) {
            const auto& model = t < switch_at ? s.providers[0] : s.providers[1];
            const double p = provider_behavior(model, region, t).success_prob;
            if (s.mode == SimMode::expectation) {
                failures += 1.0 - p;
            } else {
                if (rng.uniform01() >= p) failures += 1;
            }
            variance += p * (1.0 - p);
        }
        SweepRow row;
        row.switch_min = switch_min;
        row.label = "switch_" + std::to_string(switch_min) + "_min";
        row.simulated_failures = failures;
        row.expected_failures = expected_failures(s.arrival_rate_per_min, params.duration_min,
                                                  switch_min, params.p_f, params.p_s);
        row.sigma = std::sqrt(variance);
        report.sweep.push_back(std::move(row));
        report.total_requests += static_cast<long long>(arrivals.size());
        report.failed_requests += failures;
    }
}

struct FirstFault {
    ProviderId provider;
    Millis start_ms = 0;
};

std::optional<FirstFault> first_fault(const Scenario& s) {
    std::optional<FirstFault> best;
    for (const auto& p : s.providers) {
        for (const auto& f : p.fault_timeline) {
            if (!best || f.start_ms < best->start_ms) best = FirstFault{p.id, f.start_ms};
            break;  // timeline is ordered
        }
    }
    return best;
}

}  // namespace

Parsed<SimReport> run_scenario(const Scenario& scenario) {
    return run_scenario(scenario, std::nullopt, std::nullopt);
}

Parsed<SimReport> run_scenario(const Scenario& scenario_in, std::optional<SimMode> mode_override,
                               std::optional<std::uint64_t> seed_override) {
    Parsed<SimReport> result;
    Scenario s = scenario_in;
    if (mode_override) s.mode = *mode_override;
    if (seed_override) s.seed = *seed_override;
    auto violations = validate_scenario(s);
    if (!violations.empty()) {
        result.error = "invalid_scenario: " + violations.front();
        return result;
    }

    SimReport report;
    report.scenario_name = s.name;
    report.mode = s.mode;
    report.seed = s.seed;
    report.duration_ms = s.duration_ms;

    if (s.forced_switch_sweep_min) {
        run_forced_sweep(s, report);
        result.value = std::move(report);
        return result;
    }

    Rng rng(s.seed);

    const Millis store_bound = s.config_impairment && s.config_impairment->store_bound_ms
                                   ? *s.config_impairment->store_bound_ms
                                   : 15 * 60 * 1000;
    ConfigStore store(store_bound);
    auto put = store.put(s.factor_list);
    if (!put) {
        result.error = "invalid_scenario: " + put.error;
        return result;
    }

    TelemetryHub hub(s.telemetry, s.seed);
    ProtectionRegistry protection([&hub, &report](const IncidentMarker& m) {
        hub.add_incident(m);
        report.incidents.push_back(m);
    });
    SnapshotCache cache;
    StickyStore sticky;
    RouterEngine engine({&store, &cache, &protection, &sticky});

    const auto& control = s.factor_list.control;
    const Millis refresh_interval = control.metric_refresh_interval_ms;
    const Millis lag_ms =
        s.telemetry_impairment && s.telemetry_impairment->lag_ms
            ? *s.telemetry_impairment->lag_ms
            : 0;
    const bool has_frozen = s.telemetry_impairment && s.telemetry_impairment->frozen_from_ms;
    const Millis frozen_from = has_frozen ? *s.telemetry_impairment->frozen_from_ms : 0;

    auto arrivals = generate_arrivals(s, rng);

    // Per-scope last observed switch, for flap counting.
    std::map<std::string, std::pair<std::string, std::string>> last_switch;
    bool store_marked = false;

    Millis next_refresh = refresh_interval;
    long long request_seq = 0;

    auto process_refresh_until = [&](Millis t) {
        while (next_refresh <= t) {
            if (!has_frozen || next_refresh < frozen_from) {
                const Millis as_of = next_refresh - lag_ms;
                if (as_of >= 0) cache.refresh(hub, as_of);
            }
            next_refresh += refresh_interval;
        }
    };

    auto apply_config_impairment = [&](Millis t) {
        if (!s.config_impairment) return;
        const auto& ci = *s.config_impairment;
        if (!store_marked && t >= ci.unavailable_from_ms &&
            (!ci.unavailable_until_ms || t < *ci.unavailable_until_ms)) {
            store.mark_unavailable(ci.unavailable_from_ms);
            store_marked = true;
        }
        if (store_marked && ci.unavailable_until_ms && t >= *ci.unavailable_until_ms) {
            store.mark_available();
            store_marked = false;
        }
    };

    auto synthetic_call = [&](const ProviderId& provider, const RequestContext& ctx,
                              Millis /*deadline*/) -> ProviderResult {
        const auto* model = s.find_provider(provider);
        const auto behavior = provider_behavior(*model, ctx.region, ctx.timestamp);
        ProviderResult pr;
        pr.cost = model->cost_per_attempt;
        if (behavior.reject_fraction > 0 && rng.uniform01() < behavior.reject_fraction) {
            pr.latency_ms = std::max<Millis>(1, draw_latency(*model, 1.0, rng) / 4);
            pr.transport = {TransportKind::rate_limited, 429, "throttled"};
            pr.business = {BusinessKind::unknown};
            return pr;
        }
        pr.latency_ms = draw_latency(*model, behavior.latency_multiplier, rng);
        if (rng.uniform01() < behavior.success_prob) {
            pr.transport = {TransportKind::success, 200, std::nullopt};
            pr.business = {BusinessKind::completed};
        } else {
            pr.transport = {TransportKind::server_error, 500, "upstream_error"};
            pr.business = {BusinessKind::failed};
        }
        return pr;
    };

    for (Millis t : arrivals) {
        process_refresh_until(t);
        apply_config_impairment(t);

        RequestContext ctx;
        ctx.request_id = "r" + std::to_string(request_seq++);
        ctx.operation = s.factor_list.operation;
        // Region and user draws come from the run RNG; both deterministic.
        {
            const double u = rng.uniform01();
            double acc = 0;
            ctx.region = s.regions.back().first;
            for (const auto& [region, w] : s.regions) {
                acc += w;
                if (u < acc) {
                    ctx.region = region;
                    break;
                }
            }
        }
        ctx.user_key = "u" + std::to_string(rng.next() % static_cast<std::uint64_t>(s.user_pool));
        ctx.traffic_class = TrafficClass::interactive;
        ctx.timestamp = t;

        report.total_requests += 1;
        bool terminal = false;
        int attempt_no = 1;
        RouteOutcome outcome;
        bool have_selection = false;

        while (!terminal) {
            if (!have_selection) {
                outcome = engine.route(ctx, t);
                report.traces.push_back(outcome.trace);
                report.trace_scopes.push_back(ctx.region);
                report.trace_total += 1;
                std::vector<ProviderId> configured;
                for (const auto& p : outcome.effective.providers) configured.push_back(p.id);
                if (validate_trace(outcome.trace, configured).empty())
                    report.trace_complete += 1;
                if (outcome.fallback) {
                    report.fallback_requests += 1;
                    report.failed_requests += 1;
                    terminal = true;
                    break;
                }
                // Record provider switches (probe selections do not move
                // the preference).
                const auto& trace = outcome.trace;
                if (!outcome.probe && trace.previous_choice &&
                    *trace.previous_choice != *trace.selected) {
                    SwitchEvent sw{t, ctx.region, trace.previous_choice->name,
                                   trace.selected->name, trace.trace_id};
                    auto& prev = last_switch[ctx.region];
                    if (prev.first == sw.to && prev.second == sw.from) report.flap_count += 1;
                    prev = {sw.from, sw.to};
                    report.switch_timeline.push_back(sw);
                    report.switch_count += 1;
                }
            }
            have_selection = false;

            auto invoked =
                invoke_protected(outcome, ctx, attempt_no, synthetic_call, protection, hub, t);
            report.total_attempts += 1;
            auto& stats = report.provider_stats[invoked.event.provider];
            stats.attempts += 1;
            stats.cost += invoked.event.cost;
            report.cost_total += invoked.event.cost;
            if (invoked.shed) report.shed_requests += 1;

            if (invoked.outcome == OutcomeClass::workflow_success) {
                stats.workflow_successes += 1;
                report.completed_requests += 1;
                terminal = true;
                break;
            }
            stats.failures += 1;

            auto& budget = protection.retry_budget(
                s.factor_list.operation, control.retry_budget_per_window,
                control.retry_budget_window_ms);
            const auto verdict =
                retry_decision(budget, attempt_no, control.idempotent, control.retry_policy,
                               control.retry_max_attempts, t);
            if (verdict == RetryVerdict::stop) {
                report.failed_requests += 1;
                terminal = true;
            } else if (verdict == RetryVerdict::retry_same) {
                attempt_no += 1;
                have_selection = true;  // reuse the same selection
            } else {
                attempt_no += 1;  // fresh decision
            }
        }
    }
    // Events and incidents accumulated through the hub.
    report.events = hub.events_copy();
    for (const auto& key : hub.all_keys())
        report.final_snapshots.push_back(hub.aggregate(key, s.duration_ms));

    // Completion-rate series per telemetry bucket.
    {
        std::map<Millis, CompletionBucket> buckets;
        for (const auto& e : report.events) {
            const Millis b = (e.start_time / s.telemetry.bucket_ms) * s.telemetry.bucket_ms;
            auto& bucket = buckets[b];
            bucket.bucket_start = b;
            const bool done = is_workflow_success(e.business.kind);
            auto& per = bucket.per_provider[e.provider.name];
            per.first += 1;
            per.second += done ? 1 : 0;
            auto& all = bucket.per_provider["__all__"];
            all.first += 1;
            all.second += done ? 1 : 0;
        }
        for (auto& [_, bucket] : buckets) report.completion_series.push_back(std::move(bucket));
    }

    // Observed failover delay: first switch away from the first faulted
    // provider after its fault begins.
    if (auto fault = first_fault(s)) {
        for (const auto& sw : report.switch_timeline) {
            if (sw.from == fault->provider.name && sw.ts >= fault->start_ms) {
                report.observed_failover_delay_ms = sw.ts - fault->start_ms;
                break;
            }
        }
        FailoverBoundTerms terms;
        if (s.failover_bound) {
            terms = *s.failover_bound;
        } else {
            terms.t_detect_ms = static_cast<double>(s.telemetry.window_ms);
            terms.t_publish_ms = static_cast<double>(lag_ms);
            terms.t_aggregate_ms = static_cast<double>(s.telemetry.bucket_ms);
            terms.t_refresh_ms = static_cast<double>(refresh_interval);
            terms.t_decision_ms = 0;
        }
        report.failover_bound_ms =
            failover_latency_bound(terms.t_detect_ms, terms.t_publish_ms, terms.t_aggregate_ms,
                                   terms.t_refresh_ms, terms.t_decision_ms);
        if (report.observed_failover_delay_ms) {
            report.bound_respected = static_cast<double>(*report.observed_failover_delay_ms) <=
                                     *report.failover_bound_ms;
            // Closed-form comparison for a two-provider outage.
            if (s.providers.size() == 2) {
                const auto params = sweep_params(s);
                report.model_expected_failures = expected_failures(
                    s.arrival_rate_per_min, params.duration_min,
                    static_cast<double>(*report.observed_failover_delay_ms) / 60000.0,
                    params.p_f, params.p_s);
            }
        }
    }

    result.value = std::move(report);
    return result;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

std::string report_to_json(const SimReport& r) {
    ordered_json j;
    j["scenario"] = r.scenario_name;
    j["mode"] = to_string(r.mode);
    j["seed"] = r.seed;
    j["duration_ms"] = r.duration_ms;
    j["total_requests"] = r.total_requests;
    j["completed_requests"] = r.completed_requests;
    j["failed_requests"] = r.failed_requests;
    j["fallback_requests"] = r.fallback_requests;
    j["shed_requests"] = r.shed_requests;
    j["total_attempts"] = r.total_attempts;
    j["cost_total"] = r.cost_total;
    j["completion_rate"] =
        r.total_requests > 0 ? ordered_json(r.completed_requests / r.total_requests)
                             : ordered_json(nullptr);
    j["cost_per_success"] = r.completed_requests > 0
                                ? ordered_json(r.cost_total / r.completed_requests)
                                : ordered_json(nullptr);
    ordered_json providers;
    for (const auto& [id, st] : r.provider_stats) {
        providers[id.name] = ordered_json{{"attempts", st.attempts},
                                          {"workflow_successes", st.workflow_successes},
                                          {"failures", st.failures},
                                          {"cost", st.cost}};
    }
    j["providers"] = std::move(providers);
    j["switch_count"] = r.switch_count;
    j["flap_count"] = r.flap_count;
    j["observed_failover_delay_ms"] = r.observed_failover_delay_ms
                                          ? ordered_json(*r.observed_failover_delay_ms)
                                          : ordered_json(nullptr);
    j["failover_bound_ms"] =
        r.failover_bound_ms ? ordered_json(*r.failover_bound_ms) : ordered_json(nullptr);
    j["bound_respected"] = r.bound_respected;
    j["model_expected_failures"] = r.model_expected_failures
                                       ? ordered_json(*r.model_expected_failures)
                                       : ordered_json(nullptr);
    j["trace_total"] = r.trace_total;
    j["trace_complete"] = r.trace_complete;
    if (!r.sweep.empty()) {
        ordered_json sweep = ordered_json::array();
        for (const auto& row : r.sweep) {
            sweep.push_back(ordered_json{{"label", row.label},
                                         {"switch_min", row.switch_min},
                                         {"simulated_failures", row.simulated_failures},
                                         {"expected_failures", row.expected_failures},
                                         {"sigma", row.sigma}});
        }
        j["sweep"] = std::move(sweep);
    }
    return j.dump(2);
}

std::string completion_series_csv(const SimReport& r) {
    std::ostringstream out;
    out << "bucket_start_ms,provider,attempted,completed,completion_rate\n";
    for (const auto& bucket : r.completion_series) {
        for (const auto& [provider, counts] : bucket.per_provider) {
            const double rate = counts.first > 0 ? counts.second / counts.first : 0;
            out << bucket.bucket_start << ',' << provider << ',' << counts.first << ','
                << counts.second << ',' << rate << '\n';
        }
    }
    return out.str();
}

std::string switches_to_jsonl(const SimReport& r) {
    std::ostringstream out;
    for (const auto& sw : r.switch_timeline) {
        ordered_json j;
        j["ts"] = sw.ts;
        j["scope"] = sw.scope;
        j["from"] = sw.from;
        j["to"] = sw.to;
        j["trace_id"] = sw.trace_id;
        out << j.dump() << '\n';
    }
    return out.str();
}

}  // namespace froute::sim
