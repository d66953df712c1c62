#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "froute/domain.hpp"

namespace froute {

/// Parse/load result carrier: either a value or an error with an optional
/// source location.
template <typename T>
struct Parsed {
    std::optional<T> value;
    std::string error;
    int line = -1;
    int column = -1;

    explicit operator bool() const { return value.has_value(); }
};

enum class GateKind : std::uint8_t {
    circuit_closed,
    region_supported,
    quota_available,
    provider_enabled,
    compliance_allowed,
    maintenance_inactive,
    min_samples_met,
};

struct GateSpec {
    GateKind kind = GateKind::circuit_closed;
    std::map<std::string, std::string> params;  // kind-specific, may be empty

    bool operator==(const GateSpec&) const = default;
};

enum class ScoreFactorKind : std::uint8_t {
    completion_rate,
    latency_p95,
    latency_p99,
    cost,
    incident_penalty,
};

enum class Orientation : std::uint8_t { higher_is_better, lower_is_better };

struct ScoreFactorSpec {
    ScoreFactorKind kind = ScoreFactorKind::completion_rate;
    double weight = 0;
    Orientation orientation = Orientation::higher_is_better;
    std::optional<double> lower_bound;
    std::optional<double> upper_bound;
    double default_value = 0.5;  // normalized substitute when the metric is absent

    bool operator==(const ScoreFactorSpec&) const = default;
};

/// Orientation implied by the factor kind when the document does not say.
Orientation default_orientation(ScoreFactorKind kind) noexcept;

enum class TieBreakRule : std::uint8_t {
    sticky_then_lexicographic,
    weighted_random,
    priority_order,
    lru,
};

enum class FallbackKind : std::uint8_t { typed_error, enqueue_retry, alternate_channel, shed };

enum class StaleMetricPolicy : std::uint8_t { prefer_default, hold_last_ranking };

enum class RetryPolicy : std::uint8_t { none, same_provider, alternate_provider, hedged };

struct ControlParams {
    Millis metric_refresh_interval_ms = 5000;
    int min_sample_count = 10;
    Millis cooldown_ms = 60000;
    double hysteresis_delta = 0.05;
    int sustained_windows_required = 2;
    double circuit_failure_threshold = 0.5;
    int circuit_min_samples = 20;
    Millis circuit_open_ms = 30000;
    int half_open_probe_budget = 3;
    TieBreakRule tie_break = TieBreakRule::sticky_then_lexicographic;
    ProviderId default_provider;
    FallbackKind fallback = FallbackKind::typed_error;
    StaleMetricPolicy stale_metric_policy = StaleMetricPolicy::prefer_default;
    Millis stale_after_ms = 30000;
    // Protection / retry knobs resolved per operation.
    int circuit_window_size = 50;
    int probe_successes_to_close = 3;
    RetryPolicy retry_policy = RetryPolicy::none;
    int retry_max_attempts = 2;
    int retry_budget_per_window = 100;
    Millis retry_budget_window_ms = 60000;
    bool idempotent = false;
    Millis timeout_interactive_ms = 2000;
    Millis timeout_background_ms = 10000;
    Millis throttle_ttl_ms = 10000;
    int bulkhead_capacity = 64;

    bool operator==(const ControlParams&) const = default;

    [[nodiscard]] Millis deadline_for(TrafficClass tc) const noexcept {
        return tc == TrafficClass::background ? timeout_background_ms : timeout_interactive_ms;
    }
};

struct MaintenanceWindow {
    Millis start_ms = 0;
    Millis end_ms = 0;

    bool operator==(const MaintenanceWindow&) const = default;
};

struct QuotaConfig {
    long long limit = 0;
    Millis window_ms = 86400000;

    bool operator==(const QuotaConfig&) const = default;
};

struct RateLimitConfig {
    double rate_per_s = 0;
    double burst = 0;

    bool operator==(const RateLimitConfig&) const = default;
};

/// Static per-provider attributes carried in the factor list.
struct ProviderConfig {
    ProviderId id;
    std::vector<std::string> supported_regions;
    bool has_supported_regions = false;
    bool enabled = true;
    double static_cost = 0;
    int priority = 0;
    std::vector<MaintenanceWindow> maintenance;
    std::vector<std::string> compliance_denied_regions;
    std::vector<std::string> compliance_denied_tenants;
    std::optional<QuotaConfig> quota;
    std::optional<RateLimitConfig> rate_limit;

    bool operator==(const ProviderConfig&) const = default;

    [[nodiscard]] bool supports_region(const std::string& region) const;
    [[nodiscard]] bool in_maintenance(Millis now) const;
};

/// Conjunctive predicate over request context attributes.
struct OverrideScope {
    std::optional<std::string> region;
    std::optional<std::string> tenant;
    std::optional<TrafficClass> traffic_class;

    bool operator==(const OverrideScope&) const = default;

    [[nodiscard]] bool empty() const {
        return !region && !tenant && !traffic_class;
    }
    [[nodiscard]] bool matches(const RequestContext& ctx) const;
};

/// Partial control-parameter replacement carried by an override.
struct ControlPatch {
    std::optional<double> hysteresis_delta;
    std::optional<Millis> cooldown_ms;
    std::optional<int> sustained_windows_required;
    std::optional<int> min_sample_count;
    std::optional<ProviderId> default_provider;
    std::optional<FallbackKind> fallback;
    std::optional<TieBreakRule> tie_break;
    std::optional<StaleMetricPolicy> stale_metric_policy;
    std::optional<Millis> stale_after_ms;
    std::optional<RetryPolicy> retry_policy;

    bool operator==(const ControlPatch&) const = default;
    [[nodiscard]] bool empty() const;
    void apply(ControlParams& c) const;
};

struct OverridePatch {
    std::vector<std::pair<ProviderId, bool>> provider_enabled;
    // Full weight-vector replacement; partial patches would break the sum.
    std::optional<std::vector<std::pair<ScoreFactorKind, double>>> weights;
    ControlPatch control;

    bool operator==(const OverridePatch&) const = default;
};

struct OverrideSpec {
    OverrideScope scope;
    OverridePatch patch;
    std::optional<double> ramp_fraction;  // [0,1]; keyed by user_key or request_id hash
    bool emergency = false;

    bool operator==(const OverrideSpec&) const = default;
};

/// Versioned declarative routing policy for one operation.
struct FactorList {
    OperationId operation;
    std::string version;           // content hash, first 16 hex chars of SHA-256
    std::string declared_version;  // optional operator label from the document
    std::vector<ProviderConfig> providers;
    std::vector<GateSpec> gates;
    std::vector<ScoreFactorSpec> scores;
    ControlParams control;
    std::vector<OverrideSpec> overrides;

    bool operator==(const FactorList&) const = default;

    [[nodiscard]] const ProviderConfig* find_provider(const ProviderId& id) const;
    [[nodiscard]] const ScoreFactorSpec* find_score(ScoreFactorKind kind) const;
    [[nodiscard]] bool has_emergency_override() const;
};

std::string_view to_string(GateKind v) noexcept;
std::string_view to_string(ScoreFactorKind v) noexcept;
std::string_view to_string(Orientation v) noexcept;
std::string_view to_string(TieBreakRule v) noexcept;
std::string_view to_string(FallbackKind v) noexcept;
std::string_view to_string(StaleMetricPolicy v) noexcept;
std::string_view to_string(RetryPolicy v) noexcept;
std::optional<GateKind> gate_kind_from(std::string_view s) noexcept;
std::optional<ScoreFactorKind> score_factor_kind_from(std::string_view s) noexcept;
std::optional<TieBreakRule> tie_break_rule_from(std::string_view s) noexcept;
std::optional<FallbackKind> fallback_kind_from(std::string_view s) noexcept;
std::optional<StaleMetricPolicy> stale_metric_policy_from(std::string_view s) noexcept;
std::optional<RetryPolicy> retry_policy_from(std::string_view s) noexcept;

/// Parse a factor-list document. Strict: unknown keys are rejected with a
/// location. On success the content-hash version id is already computed.
Parsed<FactorList> parse_factor_list(const std::string& text);

Parsed<FactorList> load_factor_list_file(const std::string& path);

/// Every violated invariant plus cross-checks; empty means ok.
std::vector<std::string> validate_factor_list(const FactorList& fl);

/// Serialize back to the on-disk document shape. parse(serialize(fl))
/// reproduces fl field-exact.
std::string serialize_factor_list(const FactorList& fl);

/// Canonical serialization used for version hashing (stable key order).
std::string canonical_serialization(const FactorList& fl);

/// First 16 hex chars of SHA-256 over the canonical serialization.
std::string compute_version_id(const FactorList& fl);

/// True iff the ramp admits this stickiness key at the given fraction.
bool ramp_admits(const std::string& key, double fraction) noexcept;

/// Apply every matching override in list order. The result satisfies all
/// FactorList invariants (guaranteed at validation time).
FactorList apply_overrides(const FactorList& fl, const RequestContext& ctx);

enum class StoreError : std::uint8_t { none, config_stale, unknown_operation };

/// In-memory versioned store with last-known-good fallback while the
/// backing source is unavailable. Many concurrent readers, single writer;
/// readers always observe a complete validated version.
class ConfigStore {
public:
    explicit ConfigStore(Millis unavailable_bound_ms = 15 * 60 * 1000)
        : unavailable_bound_ms_(unavailable_bound_ms) {}

    /// Validates and installs as active + last-known-good. Returns the
    /// version id, or the first validation violation.
    Parsed<std::string> put(FactorList fl);

    struct GetResult {
        std::shared_ptr<const FactorList> list;
        StoreError error = StoreError::none;
        bool from_last_known_good = false;
    };
    [[nodiscard]] GetResult get(const OperationId& op, Millis now) const;

    void mark_unavailable(Millis since);
    void mark_available();
    [[nodiscard]] Millis unavailable_bound_ms() const { return unavailable_bound_ms_; }

private:
    mutable std::shared_mutex mu_;
    std::map<OperationId, std::shared_ptr<const FactorList>> active_;
    std::map<OperationId, std::shared_ptr<const FactorList>> last_known_good_;
    std::optional<Millis> unavailable_since_;
    Millis unavailable_bound_ms_;
};

}  // namespace froute
