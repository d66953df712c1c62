#pragma once

#include <atomic>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "froute/config.hpp"
#include "froute/domain.hpp"
#include "froute/protection.hpp"
#include "froute/telemetry.hpp"

namespace froute {

struct GateResult {
    ProviderId provider;
    GateKind gate = GateKind::circuit_closed;
    bool passed = true;
    std::string reason;  // non-empty when passed == false
};

struct FactorContribution {
    ScoreFactorKind factor = ScoreFactorKind::completion_rate;
    std::optional<double> raw;
    double normalized = 0;
    double weight = 0;
    bool used_default = false;
};

struct ScoredCandidate {
    ProviderId provider;
    std::vector<FactorContribution> per_factor;
    double total = 0;
    bool probe = false;  // candidacy came through a half-open probe slot
};

/// Per-request audit record. Exactly one of selected/fallback is set and
/// every configured provider appears in gate_results.
struct DecisionTrace {
    std::string trace_id;
    std::string request_id;
    std::string factor_list_version;  // empty when config was unavailable
    std::string snapshot_id;
    Millis snapshot_ts = 0;
    bool snapshot_stale = false;
    std::vector<GateResult> gate_results;
    std::vector<ScoredCandidate> candidates;
    std::optional<ProviderId> previous_choice;
    bool hysteresis_applied = false;  // a better challenger was suppressed
    std::optional<TieBreakRule> tie_break_applied;
    std::optional<ProviderId> selected;
    std::optional<FallbackKind> fallback;
    Millis timestamp = 0;
};

std::string trace_to_jsonl(const DecisionTrace& trace);
std::optional<DecisionTrace> trace_from_jsonl(std::string_view line, std::string& error);

/// Trace invariants; `configured` may be empty when the trace was produced
/// without a resolved factor list (config unavailable).
std::vector<std::string> validate_trace(const DecisionTrace& trace,
                                        const std::vector<ProviderId>& configured);

struct RouteOutcome {
    std::optional<ProviderId> selected;
    std::optional<FallbackKind> fallback;
    bool probe = false;
    StoreError config_error = StoreError::none;
    DecisionTrace trace;
    FactorList effective;  // post-override list the decision used
};

/// Hysteresis / stickiness state per (operation, scope), plus user-level
/// stickiness and selection recency for tie-breaking. Updates are atomic
/// per key.
class StickyStore {
public:
    static constexpr Millis kNeverSwitched = std::numeric_limits<Millis>::min() / 4;

    struct Entry {
        std::optional<ProviderId> last;
        Millis last_switch_ts = kNeverSwitched;
        int challenger_streak = 0;
    };

    [[nodiscard]] Entry get(const OperationId& op, const std::string& scope) const;
    void put(const OperationId& op, const std::string& scope, Entry entry);

    [[nodiscard]] std::optional<ProviderId> user_sticky(const OperationId& op,
                                                        const std::string& user_key) const;
    void set_user_sticky(const OperationId& op, const std::string& user_key,
                         const ProviderId& provider);

    [[nodiscard]] std::optional<Millis> last_selected(const OperationId& op,
                                                      const std::string& scope,
                                                      const ProviderId& provider) const;
    void mark_selected(const OperationId& op, const std::string& scope,
                       const ProviderId& provider, Millis now);

private:
    mutable std::mutex mu_;
    std::map<std::pair<OperationId, std::string>, Entry> entries_;
    std::map<std::pair<OperationId, std::string>, ProviderId> user_sticky_;
    std::map<std::tuple<OperationId, std::string, ProviderId>, Millis> last_selected_;
};

/// Normalization of one raw metric into [0,1]; absent raw values take the
/// factor's default.
struct Normalized {
    double value = 0;
    bool used_default = false;
};
Normalized normalize(const ScoreFactorSpec& factor, std::optional<double> raw);

/// Evaluate every configured gate for one provider (no short-circuit).
struct GateEvaluation {
    std::vector<GateResult> results;
    bool passed = true;
    bool probe = false;  // circuit gate passed via allow_probe
};
GateEvaluation evaluate_gates(const FactorList& effective, const ProviderConfig& provider,
                              const RequestContext& ctx,
                              const SnapshotCache::GetResult& snap,
                              ProtectionRegistry& protection, Millis now);

/// Weighted score per the configured factors, reading raw metrics from the
/// provider's snapshot.
ScoredCandidate score_candidate(const FactorList& effective, const ProviderConfig& provider,
                                const SnapshotCache::GetResult& snap);

/// Deterministic tie-break among candidates whose totals are within epsilon
/// of the top score.
ProviderId tie_break(const std::vector<const ScoredCandidate*>& tied, const RequestContext& ctx,
                     TieBreakRule rule, const FactorList& effective, const StickyStore& sticky,
                     Millis now);

inline constexpr double kScoreTieEpsilon = 1e-9;

/// The decision layer. route() implements: load effective config, read the
/// snapshot (recording staleness), gates, scores, argmax, hysteresis,
/// tie-break, fallback; the trace is always complete.
class RouterEngine {
public:
    struct Deps {
        ConfigStore* config = nullptr;
        SnapshotCache* snapshots = nullptr;
        ProtectionRegistry* protection = nullptr;
        StickyStore* sticky = nullptr;
    };

    explicit RouterEngine(Deps deps) : deps_(deps) {}

    RouteOutcome route(const RequestContext& ctx, Millis now);

    /// Decision core with resolved inputs; route() delegates here.
    RouteOutcome decide(const RequestContext& ctx, FactorList effective,
                        const SnapshotCache::GetResult& snap, Millis now);

    [[nodiscard]] const Deps& deps() const { return deps_; }

private:
    Deps deps_;
    std::atomic<long long> decision_seq_{0};
};

/// Synthetic or real provider call: returns transport/business outcomes,
/// latency and cost for one attempt.
struct ProviderResult {
    Millis latency_ms = 0;
    TransportOutcome transport;
    BusinessOutcome business;
    double cost = 0;
};
using ProviderCallFn =
    std::function<ProviderResult(const ProviderId&, const RequestContext&, Millis deadline_ms)>;

struct InvokeResult {
    AttemptEvent event;
    OutcomeClass outcome = OutcomeClass::attempt_failure;
    bool shed = false;  // bulkhead rejected before any provider call
};

/// Invoke the selected provider through the protection layer: bulkhead,
/// client rate limit, deadline, circuit/quota/throttle accounting. Exactly
/// one AttemptEvent is emitted per attempt, failure or not.
InvokeResult invoke_protected(const RouteOutcome& selection, const RequestContext& ctx,
                              int attempt_no, const ProviderCallFn& call,
                              ProtectionRegistry& protection, TelemetryHub& telemetry,
                              Millis now);

}  // namespace froute
