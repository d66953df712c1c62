#include "froute/router.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace froute {

using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// StickyStore
// ---------------------------------------------------------------------------

StickyStore::Entry StickyStore::get(const OperationId& op, const std::string& scope) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find({op, scope});
    return it == entries_.end() ? Entry{} : it->second;
}

void StickyStore::put(const OperationId& op, const std::string& scope, Entry entry) {
    std::lock_guard lock(mu_);
    entries_[{op, scope}] = std::move(entry);
}

std::optional<ProviderId> StickyStore::user_sticky(const OperationId& op,
                                                   const std::string& user_key) const {
    std::lock_guard lock(mu_);
    auto it = user_sticky_.find({op, user_key});
    if (it == user_sticky_.end()) return std::nullopt;
    return it->second;
}

void StickyStore::set_user_sticky(const OperationId& op, const std::string& user_key,
                                  const ProviderId& provider) {
    std::lock_guard lock(mu_);
    user_sticky_[{op, user_key}] = provider;
}

std::optional<Millis> StickyStore::last_selected(const OperationId& op, const std::string& scope,
                                                 const ProviderId& provider) const {
    std::lock_guard lock(mu_);
    auto it = last_selected_.find({op, scope, provider});
    if (it == last_selected_.end()) return std::nullopt;
    return it->second;
}

void StickyStore::mark_selected(const OperationId& op, const std::string& scope,
                                const ProviderId& provider, Millis now) {
    std::lock_guard lock(mu_);
    last_selected_[{op, scope, provider}] = now;
}

// ---------------------------------------------------------------------------
// Normalization and scoring
// ---------------------------------------------------------------------------

Normalized normalize(const ScoreFactorSpec& factor, std::optional<double> raw) {
    if (!raw) return {factor.default_value, true};
    if (factor.orientation == Orientation::higher_is_better) {
        return {std::clamp(*raw, 0.0, 1.0), false};
    }
    if (!factor.lower_bound || !factor.upper_bound) {
        // Bound-free lower-is-better (incident penalty): inverted clamp.
        return {1.0 - std::clamp(*raw, 0.0, 1.0), false};
    }
    const double lo = *factor.lower_bound;
    const double hi = *factor.upper_bound;
    const double clipped = std::min(std::max(*raw, lo), hi);
    return {1.0 - (clipped - lo) / (hi - lo), false};
}

ScoredCandidate score_candidate(const FactorList& effective, const ProviderConfig& provider,
                                const SnapshotCache::GetResult& snap) {
    const MetricSnapshot* ms = nullptr;
    if (snap.view) {
        auto it = snap.view->by_provider.find(provider.id);
        if (it != snap.view->by_provider.end()) ms = &it->second;
    }
    ScoredCandidate c;
    c.provider = provider.id;
    double total = 0;
    for (const auto& factor : effective.scores) {
        std::optional<double> raw;
        switch (factor.kind) {
            case ScoreFactorKind::completion_rate:
                if (ms) raw = ms->completion_rate;
                break;
            case ScoreFactorKind::latency_p95:
                if (ms) raw = ms->latency_p95_ms;
                break;
            case ScoreFactorKind::latency_p99:
                if (ms) raw = ms->latency_p99_ms;
                break;
            case ScoreFactorKind::cost:
                // Static contract cost stands in when no dynamic cost yet.
                raw = (ms && ms->mean_cost) ? *ms->mean_cost : provider.static_cost;
                break;
            case ScoreFactorKind::incident_penalty:
                if (ms) raw = ms->incident_penalty;
                break;
        }
        auto n = normalize(factor, raw);
        total += factor.weight * n.value;
        c.per_factor.push_back({factor.kind, raw, n.value, factor.weight, n.used_default});
    }
    c.total = total;
    return c;
}

// ---------------------------------------------------------------------------
// Gates
// ---------------------------------------------------------------------------

GateEvaluation evaluate_gates(const FactorList& effective, const ProviderConfig& provider,
                              const RequestContext& ctx, const SnapshotCache::GetResult& snap,
                              ProtectionRegistry& protection, Millis now) {
    GateEvaluation eval;
    const MetricKey circuit_key{effective.operation, provider.id, ctx.region};
    const MetricSnapshot* ms = nullptr;
    if (snap.view) {
        auto it = snap.view->by_provider.find(provider.id);
        if (it != snap.view->by_provider.end()) ms = &it->second;
    }
    for (const auto& gate : effective.gates) {
        GateResult r;
        r.provider = provider.id;
        r.gate = gate.kind;
        switch (gate.kind) {
            case GateKind::circuit_closed: {
                auto decision = protection.circuit_allow(
                    circuit_key, CircuitConfig::from(effective.control), now);
                if (decision == CircuitDecision::deny) {
                    r.passed = false;
                    r.reason = "circuit open";
                } else if (decision == CircuitDecision::allow_probe) {
                    eval.probe = true;
                }
                break;
            }
            case GateKind::region_supported:
                if (!provider.has_supported_regions) {
                    r.passed = false;
                    r.reason = "supported_regions not configured";
                } else if (!provider.supports_region(ctx.region)) {
                    r.passed = false;
                    r.reason = "region " + ctx.region + " not supported";
                }
                break;
            case GateKind::quota_available: {
                auto* q = protection.quota(provider.id, provider.quota);
                if (q && !q->check(now)) {
                    r.passed = false;
                    r.reason = "quota exhausted";
                } else if (protection.throttled(provider.id, ctx.region, now)) {
                    r.passed = false;
                    r.reason = "rate limited";
                }
                break;
            }
            case GateKind::provider_enabled:
                if (!provider.enabled) {
                    r.passed = false;
                    r.reason = "disabled";
                }
                break;
            case GateKind::compliance_allowed: {
                const auto& dr = provider.compliance_denied_regions;
                const auto& dt = provider.compliance_denied_tenants;
                if (std::find(dr.begin(), dr.end(), ctx.region) != dr.end()) {
                    r.passed = false;
                    r.reason = "compliance: region " + ctx.region + " denied";
                } else if (ctx.tenant &&
                           std::find(dt.begin(), dt.end(), *ctx.tenant) != dt.end()) {
                    r.passed = false;
                    r.reason = "compliance: tenant denied";
                }
                break;
            }
            case GateKind::maintenance_inactive:
                if (provider.in_maintenance(now)) {
                    r.passed = false;
                    r.reason = "maintenance window active";
                }
                break;
            case GateKind::min_samples_met: {
                // Cold start (no in-window evidence) is exempt: the
                // provider scores via defaults instead of being excluded.
                const long long samples = ms ? ms->sample_count : 0;
                if (samples > 0 && samples < effective.control.min_sample_count) {
                    r.passed = false;
                    r.reason = "insufficient samples (" + std::to_string(samples) + " < " +
                               std::to_string(effective.control.min_sample_count) + ")";
                }
                break;
            }
        }
        if (!r.passed) eval.passed = false;
        eval.results.push_back(std::move(r));
    }
    if (!eval.passed && eval.probe) {
        // Probe grant is moot when another gate excluded the provider.
        protection.circuit_cancel_probe(circuit_key);
        eval.probe = false;
    }
    return eval;
}

// ---------------------------------------------------------------------------
// Tie break
// ---------------------------------------------------------------------------

ProviderId tie_break(const std::vector<const ScoredCandidate*>& tied, const RequestContext& ctx,
                     TieBreakRule rule, const FactorList& effective, const StickyStore& sticky,
                     Millis now) {
    auto lexicographic_min = [&] {
        const ScoredCandidate* best = tied.front();
        for (const auto* c : tied) {
            if (c->provider.name < best->provider.name) best = c;
        }
        return best->provider;
    };
    switch (rule) {
        case TieBreakRule::sticky_then_lexicographic: {
            if (ctx.user_key) {
                auto prev = sticky.user_sticky(effective.operation, *ctx.user_key);
                if (prev) {
                    for (const auto* c : tied) {
                        if (c->provider == *prev) return c->provider;
                    }
                }
            }
            return lexicographic_min();
        }
        case TieBreakRule::weighted_random: {
            // Stable hash of (stickiness key, epoch window): identical draws
            // within one metric refresh window.
            const std::string& key = ctx.user_key ? *ctx.user_key : ctx.request_id;
            const Millis epoch_len = std::max<Millis>(1, effective.control.metric_refresh_interval_ms);
            const auto epoch = static_cast<std::uint64_t>(now / epoch_len);
            const std::uint64_t h = fnv1a64(key + "|" + std::to_string(epoch));
            const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
            double total = 0;
            for (const auto* c : tied) total += std::max(0.0, c->total);
            if (total <= 0) {
                const auto idx = static_cast<std::size_t>(h % tied.size());
                return tied[idx]->provider;
            }
            double acc = 0;
            for (const auto* c : tied) {
                acc += std::max(0.0, c->total) / total;
                if (u < acc) return c->provider;
            }
            return tied.back()->provider;
        }
        case TieBreakRule::priority_order: {
            const ScoredCandidate* best = nullptr;
            int best_priority = 0;
            for (const auto* c : tied) {
                const auto* pc = effective.find_provider(c->provider);
                const int prio = pc ? pc->priority : 0;
                if (!best || prio < best_priority ||
                    (prio == best_priority && c->provider.name < best->provider.name)) {
                    best = c;
                    best_priority = prio;
                }
            }
            return best->provider;
        }
        case TieBreakRule::lru: {
            const ScoredCandidate* best = nullptr;
            std::optional<Millis> best_ts;
            for (const auto* c : tied) {
                auto ts = sticky.last_selected(effective.operation, ctx.region, c->provider);
                const bool better =
                    !best ||
                    (!ts && best_ts) ||  // never selected beats any timestamp
                    (ts && best_ts && *ts < *best_ts) ||
                    (ts == best_ts && c->provider.name < best->provider.name);
                if (better) {
                    best = c;
                    best_ts = ts;
                }
            }
            return best->provider;
        }
    }
    return lexicographic_min();
}

// ---------------------------------------------------------------------------
// RouterEngine
// ---------------------------------------------------------------------------

RouteOutcome RouterEngine::route(const RequestContext& ctx, Millis now) {
    auto got = deps_.config->get(ctx.operation, now);
    if (got.error != StoreError::none) {
        RouteOutcome out;
        out.config_error = got.error;
        out.fallback = FallbackKind::typed_error;
        auto& t = out.trace;
        t.trace_id = "d" + std::to_string(decision_seq_.fetch_add(1));
        t.request_id = ctx.request_id;
        t.snapshot_stale = true;
        t.fallback = out.fallback;
        t.timestamp = now;
        return out;
    }
    FactorList effective = apply_overrides(*got.list, ctx);
    auto snap = deps_.snapshots->get(ctx.operation, ctx.region, now,
                                     effective.control.stale_after_ms);
    return decide(ctx, std::move(effective), snap, now);
}

RouteOutcome RouterEngine::decide(const RequestContext& ctx, FactorList effective,
                                  const SnapshotCache::GetResult& snap, Millis now) {
    RouteOutcome out;
    auto& trace = out.trace;
    trace.trace_id = "d" + std::to_string(decision_seq_.fetch_add(1));
    trace.request_id = ctx.request_id;
    trace.factor_list_version = effective.version;
    trace.timestamp = now;
    trace.snapshot_stale = snap.stale;
    if (snap.view) {
        trace.snapshot_id = snap.view->snapshot_id;
        trace.snapshot_ts = snap.view->freshness_ts;
    }

    const auto& control = effective.control;
    auto& protection = *deps_.protection;
    auto& sticky = *deps_.sticky;

    std::vector<const ProviderConfig*> eligible;
    std::vector<bool> probe_flags;
    for (const auto& provider : effective.providers) {
        auto eval = evaluate_gates(effective, provider, ctx, snap, protection, now);
        trace.gate_results.insert(trace.gate_results.end(), eval.results.begin(),
                                  eval.results.end());
        if (eval.passed) {
            eligible.push_back(&provider);
            probe_flags.push_back(eval.probe);
        }
    }

    auto cancel_probes_except = [&](const std::optional<ProviderId>& keep) {
        for (std::size_t i = 0; i < eligible.size(); ++i) {
            if (!probe_flags[i]) continue;
            if (keep && eligible[i]->id == *keep) continue;
            protection.circuit_cancel_probe(
                MetricKey{effective.operation, eligible[i]->id, ctx.region});
        }
    };

    if (eligible.empty()) {
        out.fallback = control.fallback;
        trace.fallback = control.fallback;
        out.effective = std::move(effective);
        return out;
    }

    trace.candidates.reserve(eligible.size());
    for (std::size_t i = 0; i < eligible.size(); ++i) {
        auto c = score_candidate(effective, *eligible[i], snap);
        c.probe = probe_flags[i];
        trace.candidates.push_back(std::move(c));
    }

    const auto entry = sticky.get(effective.operation, ctx.region);
    trace.previous_choice = entry.last;

    // Half-open probes take this request to test recovery; stickiness is
    // untouched so probing never establishes incumbency.
    const ScoredCandidate* probe_choice = nullptr;
    for (const auto& c : trace.candidates) {
        if (!c.probe) continue;
        if (!probe_choice || c.total > probe_choice->total ||
            (c.total == probe_choice->total && c.provider.name < probe_choice->provider.name)) {
            probe_choice = &c;
        }
    }
    if (probe_choice) {
        cancel_probes_except(probe_choice->provider);
        out.selected = probe_choice->provider;
        out.probe = true;
        trace.selected = out.selected;
        out.effective = std::move(effective);
        return out;
    }

    auto find_candidate = [&](const ProviderId& id) -> const ScoredCandidate* {
        for (const auto& c : trace.candidates) {
            if (c.provider == id) return &c;
        }
        return nullptr;
    };

    double top_total = -1;
    for (const auto& c : trace.candidates) top_total = std::max(top_total, c.total);
    std::vector<const ScoredCandidate*> tied;
    for (const auto& c : trace.candidates) {
        if (c.total >= top_total - kScoreTieEpsilon) tied.push_back(&c);
    }

    auto pick_top = [&]() -> ProviderId {
        if (tied.size() == 1) return tied.front()->provider;
        trace.tie_break_applied = control.tie_break;
        return tie_break(tied, ctx, control.tie_break, effective, sticky, now);
    };

    // Stale metrics with the conservative policy pin the incumbent to the
    // default provider when it is eligible.
    std::optional<ProviderId> incumbent = entry.last;
    if (snap.stale && control.stale_metric_policy == StaleMetricPolicy::prefer_default &&
        find_candidate(control.default_provider)) {
        incumbent = control.default_provider;
    }

    ProviderId selected;
    StickyStore::Entry next = entry;
    const ScoredCandidate* incumbent_candidate =
        incumbent ? find_candidate(*incumbent) : nullptr;

    if (!incumbent_candidate) {
        // First decision, or the incumbent was gated out: take the top
        // immediately, no hysteresis on forced eviction.
        selected = pick_top();
        next.challenger_streak = 0;
    } else {
        const double incumbent_total = incumbent_candidate->total;
        double best_other = -1;
        for (const auto& c : trace.candidates) {
            if (c.provider == *incumbent) continue;
            best_other = std::max(best_other, c.total);
        }
        const bool exceeds_margin = best_other > incumbent_total + control.hysteresis_delta;
        if (exceeds_margin) {
            const int streak = next.challenger_streak + 1;
            const bool cooled = now - next.last_switch_ts >= control.cooldown_ms;
            if (cooled && streak >= control.sustained_windows_required) {
                selected = pick_top();
                next.challenger_streak = 0;
            } else {
                selected = *incumbent;
                next.challenger_streak = streak;
                trace.hysteresis_applied = true;
            }
        } else {
            selected = *incumbent;
            next.challenger_streak = 0;  // incumbent won this decision
            if (best_other > incumbent_total) trace.hysteresis_applied = true;
        }
    }

    cancel_probes_except(std::nullopt);

    if (!entry.last || *entry.last != selected) {
        next.last_switch_ts = now;
    }
    next.last = selected;
    sticky.put(effective.operation, ctx.region, next);
    sticky.mark_selected(effective.operation, ctx.region, selected, now);
    if (ctx.user_key) sticky.set_user_sticky(effective.operation, *ctx.user_key, selected);

    out.selected = selected;
    trace.selected = selected;
    out.effective = std::move(effective);
    return out;
}

// ---------------------------------------------------------------------------
// invoke_protected
// ---------------------------------------------------------------------------

InvokeResult invoke_protected(const RouteOutcome& selection, const RequestContext& ctx,
                              int attempt_no, const ProviderCallFn& call,
                              ProtectionRegistry& protection, TelemetryHub& telemetry,
                              Millis now) {
    InvokeResult result;
    const auto& effective = selection.effective;
    const auto& control = effective.control;
    const ProviderId provider = *selection.selected;
    const auto* pcfg = effective.find_provider(provider);
    const MetricKey key{effective.operation, provider, ctx.region};

    AttemptEvent e;
    e.request_id = ctx.request_id;
    e.operation = effective.operation;
    e.provider = provider;
    e.region = ctx.region;
    e.tenant = ctx.tenant;
    e.start_time = now;
    e.retry_count = attempt_no - 1;
    e.circuit_state = protection.circuit_state(key);
    e.factor_list_version = effective.version;
    e.trace_id = selection.trace.trace_id;

    auto& bulkhead =
        protection.bulkhead(effective.operation, provider, control.bulkhead_capacity);
    if (!bulkhead.try_acquire()) {
        if (selection.probe) protection.circuit_cancel_probe(key);
        e.end_time = now;
        e.latency_ms = 0;
        e.transport = {TransportKind::connection_error, std::nullopt, "bulkhead_shed"};
        e.business = {BusinessKind::unknown};
        telemetry.append_event(e);
        result.event = e;
        result.outcome = OutcomeClass::attempt_failure;
        result.shed = true;
        return result;
    }
    BulkheadPermit permit(&bulkhead);

    auto* limiter = protection.rate_limiter(provider, pcfg ? pcfg->rate_limit : std::nullopt);
    if (limiter && !limiter->try_consume(now)) {
        if (selection.probe) protection.circuit_cancel_probe(key);
        protection.set_throttle(provider, ctx.region, now + control.throttle_ttl_ms);
        e.end_time = now;
        e.latency_ms = 0;
        e.transport = {TransportKind::rate_limited, std::nullopt, "client_rate_limit"};
        e.business = {BusinessKind::unknown};
        telemetry.append_event(e);
        result.event = e;
        result.outcome = OutcomeClass::attempt_failure;
        return result;
    }

    const Millis deadline = control.deadline_for(ctx.traffic_class);
    ProviderResult pr = call(provider, ctx, deadline);
    if (pr.latency_ms > deadline) {
        // Deadline miss: the caller observes a timeout at the deadline,
        // whatever the provider did afterwards.
        e.end_time = now + deadline;
        e.timeout = true;
        e.transport = {TransportKind::timeout, std::nullopt, "deadline"};
        e.business = {BusinessKind::unknown};
    } else {
        e.end_time = now + pr.latency_ms;
        e.transport = pr.transport;
        e.business = pr.business;
    }
    e.latency_ms = static_cast<double>(e.end_time - e.start_time);
    e.cost = quantize_cost(pr.cost);
    permit.reset();

    if (auto* q = protection.quota(provider, pcfg ? pcfg->quota : std::nullopt)) {
        q->consume(now);
    }
    if (e.transport.kind == TransportKind::rate_limited) {
        protection.set_throttle(provider, ctx.region, now + control.throttle_ttl_ms);
    }

    result.outcome = classify_outcome(e.transport, e.business);
    protection.circuit_record(key, CircuitConfig::from(control), result.outcome, e.end_time,
                              selection.probe);
    telemetry.append_event(e);
    result.event = e;
    return result;
}

// ---------------------------------------------------------------------------
// Trace serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json candidate_to_json(const ScoredCandidate& c) {
    ordered_json j;
    j["provider"] = c.provider.name;
    ordered_json factors = ordered_json::array();
    for (const auto& f : c.per_factor) {
        ordered_json fj;
        fj["factor"] = to_string(f.factor);
        fj["raw"] = f.raw ? ordered_json(*f.raw) : ordered_json(nullptr);
        fj["normalized"] = f.normalized;
        fj["weight"] = f.weight;
        fj["used_default"] = f.used_default;
        factors.push_back(std::move(fj));
    }
    j["per_factor"] = std::move(factors);
    j["total"] = c.total;
    j["probe"] = c.probe;
    return j;
}

}  // namespace

std::string trace_to_jsonl(const DecisionTrace& t) {
    ordered_json j;
    j["trace_id"] = t.trace_id;
    j["request_id"] = t.request_id;
    j["factor_list_version"] = t.factor_list_version;
    j["snapshot_id"] = t.snapshot_id;
    j["snapshot_ts"] = t.snapshot_ts;
    j["snapshot_stale"] = t.snapshot_stale;
    ordered_json gates = ordered_json::array();
    for (const auto& g : t.gate_results) {
        ordered_json gj;
        gj["provider"] = g.provider.name;
        gj["gate"] = to_string(g.gate);
        gj["passed"] = g.passed;
        gj["reason"] = g.reason;
        gates.push_back(std::move(gj));
    }
    j["gate_results"] = std::move(gates);
    ordered_json candidates = ordered_json::array();
    for (const auto& c : t.candidates) candidates.push_back(candidate_to_json(c));
    j["candidates"] = std::move(candidates);
    j["previous_choice"] =
        t.previous_choice ? ordered_json(t.previous_choice->name) : ordered_json(nullptr);
    j["hysteresis_applied"] = t.hysteresis_applied;
    j["tie_break_applied"] = t.tie_break_applied ? ordered_json(to_string(*t.tie_break_applied))
                                                 : ordered_json(nullptr);
    j["selected"] = t.selected ? ordered_json(t.selected->name) : ordered_json(nullptr);
    j["fallback"] = t.fallback ? ordered_json(to_string(*t.fallback)) : ordered_json(nullptr);
    j["timestamp"] = t.timestamp;
    return j.dump();
}

std::optional<DecisionTrace> trace_from_jsonl(std::string_view line, std::string& error) {
    error.clear();
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        error = "not a JSON object";
        return std::nullopt;
    }
    DecisionTrace t;
    try {
        t.trace_id = j.at("trace_id").get<std::string>();
        t.request_id = j.at("request_id").get<std::string>();
        t.factor_list_version = j.at("factor_list_version").get<std::string>();
        t.snapshot_id = j.at("snapshot_id").get<std::string>();
        t.snapshot_ts = j.at("snapshot_ts").get<Millis>();
        t.snapshot_stale = j.at("snapshot_stale").get<bool>();
        for (const auto& gj : j.at("gate_results")) {
            GateResult g;
            g.provider.name = gj.at("provider").get<std::string>();
            auto kind = gate_kind_from(gj.at("gate").get<std::string>());
            if (!kind) {
                error = "unknown gate kind";
                return std::nullopt;
            }
            g.gate = *kind;
            g.passed = gj.at("passed").get<bool>();
            g.reason = gj.at("reason").get<std::string>();
            t.gate_results.push_back(std::move(g));
        }
        for (const auto& cj : j.at("candidates")) {
            ScoredCandidate c;
            c.provider.name = cj.at("provider").get<std::string>();
            for (const auto& fj : cj.at("per_factor")) {
                FactorContribution f;
                auto kind = score_factor_kind_from(fj.at("factor").get<std::string>());
                if (!kind) {
                    error = "unknown factor kind";
                    return std::nullopt;
                }
                f.factor = *kind;
                if (!fj.at("raw").is_null()) f.raw = fj.at("raw").get<double>();
                f.normalized = fj.at("normalized").get<double>();
                f.weight = fj.at("weight").get<double>();
                f.used_default = fj.at("used_default").get<bool>();
                c.per_factor.push_back(std::move(f));
            }
            c.total = cj.at("total").get<double>();
            c.probe = cj.at("probe").get<bool>();
            t.candidates.push_back(std::move(c));
        }
        if (!j.at("previous_choice").is_null())
            t.previous_choice = ProviderId{j.at("previous_choice").get<std::string>()};
        t.hysteresis_applied = j.at("hysteresis_applied").get<bool>();
        if (!j.at("tie_break_applied").is_null()) {
            auto rule = tie_break_rule_from(j.at("tie_break_applied").get<std::string>());
            if (!rule) {
                error = "unknown tie break rule";
                return std::nullopt;
            }
            t.tie_break_applied = *rule;
        }
        if (!j.at("selected").is_null())
            t.selected = ProviderId{j.at("selected").get<std::string>()};
        if (!j.at("fallback").is_null()) {
            auto fb = fallback_kind_from(j.at("fallback").get<std::string>());
            if (!fb) {
                error = "unknown fallback kind";
                return std::nullopt;
            }
            t.fallback = *fb;
        }
        t.timestamp = j.at("timestamp").get<Millis>();
    } catch (const ordered_json::exception& ex) {
        error = ex.what();
        return std::nullopt;
    }
    return t;
}

std::vector<std::string> validate_trace(const DecisionTrace& t,
                                        const std::vector<ProviderId>& configured) {
    std::vector<std::string> v;
    if (t.selected.has_value() == t.fallback.has_value())
        v.emplace_back("exactly one of selected/fallback must be set");
    for (const auto& g : t.gate_results) {
        if (!g.passed && g.reason.empty())
            v.emplace_back("failed gate without reason for " + g.provider.name);
    }
    if (!t.factor_list_version.empty()) {
        for (const auto& p : configured) {
            bool found = false;
            for (const auto& g : t.gate_results) {
                if (g.provider == p) {
                    found = true;
                    break;
                }
            }
            // A factor list with no gates produces no gate results at all.
            if (!found && !t.gate_results.empty())
                v.emplace_back("provider " + p.name + " missing from gate_results");
        }
    }
    for (const auto& c : t.candidates) {
        double total = 0;
        for (const auto& f : c.per_factor) {
            if (f.normalized < -1e-12 || f.normalized > 1 + 1e-12)
                v.emplace_back("normalized value out of [0,1] for " + c.provider.name);
            total += f.weight * f.normalized;
        }
        if (std::abs(total - c.total) > 1e-9)
            v.emplace_back("candidate total mismatch for " + c.provider.name);
    }
    return v;
}

}  // namespace froute
