#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "froute/domain.hpp"

namespace froute {

/// Aggregation key. Scope is a region code or "global".
struct MetricKey {
    OperationId operation;
    ProviderId provider;
    std::string scope;

    auto operator<=>(const MetricKey&) const = default;
};

inline constexpr const char* kGlobalScope = "global";

struct WindowConfig {
    Millis window_ms = 60000;
    Millis bucket_ms = 5000;
    Millis completion_link_timeout_ms = 120000;
    /// Retain every in-window latency sample instead of per-bucket
    /// reservoirs. Percentiles are then exact for any (window, now).
    bool exact_mode = false;
    int reservoir_capacity = 256;
    Millis incident_decay_tau_ms = 300000;

    [[nodiscard]] std::vector<std::string> violations() const;
};

/// Immutable per-key window statistics. Absent metrics are distinguishable
/// from zero.
struct MetricSnapshot {
    MetricKey key;
    long long attempted = 0;
    long long completed = 0;
    std::optional<double> completion_rate;
    std::optional<double> latency_p95_ms;
    std::optional<double> latency_p99_ms;
    std::optional<double> mean_cost;
    double incident_penalty = 0;
    long long sample_count = 0;
    Millis freshness_ts = 0;
    std::string snapshot_id;
};

std::string snapshot_to_jsonl(const MetricSnapshot& s);

/// Nearest-rank percentile: value at index ceil(q*n) - 1 of the sorted
/// sample. Empty input yields nullopt.
std::optional<double> percentile(std::span<const double> samples, double q);

/// Circuit transitions and operator-declared incidents feed the
/// incident-penalty score factor.
struct IncidentMarker {
    Millis ts = 0;
    OperationId operation;
    ProviderId provider;
    std::string region;
    std::string transition;  // e.g. "closed->open", "operator"
};

std::string incident_to_jsonl(const IncidentMarker& m);

struct CompletionLink {
    std::string request_id;
    BusinessKind business_kind = BusinessKind::unknown;
    Millis ts = 0;
};

std::string link_to_jsonl(const CompletionLink& link);
std::optional<CompletionLink> link_from_jsonl(std::string_view line, std::string& error);

enum class LinkResult : std::uint8_t { ok, unmatched };

/// Append-only event log plus the sliding-window stores feeding snapshots.
/// Thread-safe for concurrent ingest; aggregation publishes immutable
/// snapshots.
class TelemetryHub {
public:
    explicit TelemetryHub(WindowConfig wc = {}, std::uint64_t seed = 0x5eedf00dULL);

    struct AppendOutcome {
        std::optional<long long> seq;
        std::string error;
    };
    /// Validates and appends; rejects duplicate (request_id, retry_count).
    AppendOutcome append_event(const AttemptEvent& event);

    /// Associates a later workflow outcome with the most recent attempt for
    /// the request. Completions past the link timeout are recorded but not
    /// counted toward the window.
    LinkResult link_completion(const std::string& request_id, BusinessOutcome business,
                               Millis ts);

    void add_incident(const IncidentMarker& marker);

    [[nodiscard]] MetricSnapshot aggregate(const MetricKey& key, Millis now) const;

    /// min(1, sum of exp(-(now - t_i)/tau)) over markers for the key.
    [[nodiscard]] double incident_penalty(const MetricKey& key, Millis now) const;

    [[nodiscard]] std::vector<MetricKey> known_keys(const OperationId& op) const;
    [[nodiscard]] std::vector<MetricKey> all_keys() const;
    [[nodiscard]] std::vector<AttemptEvent> events_copy() const;
    [[nodiscard]] std::vector<IncidentMarker> incidents_copy() const;
    [[nodiscard]] std::vector<CompletionLink> links_copy() const;
    [[nodiscard]] const WindowConfig& window_config() const { return wc_; }

    bool save_events_jsonl(const std::string& path) const;

private:
    struct Bucket {
        long long attempted = 0;
        long long completed = 0;
        double cost_sum = 0;
        long long seen_latencies = 0;  // arrivals, for reservoir accounting
        std::vector<double> latencies;
    };

    struct Window {
        // bucketed mode: absolute bucket index -> bucket
        std::map<std::int64_t, Bucket> buckets;
        // exact mode: raw in-window records
        struct Rec {
            Millis start_time;
            double latency;
            double cost;
            bool completed;
        };
        std::deque<Rec> recs;
    };

    struct AttemptRef {
        MetricKey region_key;
        Millis start_time = 0;
        bool counted = false;  // workflow success already credited
    };

    void record_attempt_locked(const MetricKey& key, const AttemptEvent& e, bool completed);
    void credit_completion_locked(const MetricKey& key, Millis start_time);
    [[nodiscard]] std::uint64_t reservoir_draw(const MetricKey& key, std::int64_t bucket,
                                               long long n) const;

    WindowConfig wc_;
    std::uint64_t seed_;
    mutable std::mutex mu_;
    std::vector<AttemptEvent> events_;
    std::vector<CompletionLink> links_;
    std::map<std::string, AttemptRef> attempts_;  // request_id -> latest attempt
    std::map<std::pair<std::string, int>, bool> seen_attempt_ids_;
    std::map<MetricKey, Window> windows_;
    std::vector<IncidentMarker> incidents_;
};

/// Loads a JSONL event log. In lenient mode malformed lines become
/// warnings; in strict mode the first malformed line is fatal.
struct EventLogLoad {
    std::vector<AttemptEvent> events;
    std::vector<std::string> warnings;  // "line N: reason"
    std::string fatal;                  // non-empty -> failed

    explicit operator bool() const { return fatal.empty(); }
};
EventLogLoad load_event_log(const std::string& path, bool strict);

/// Periodically materialized snapshots the router reads. A view is
/// immutable once published; readers never block the refresher.
class SnapshotCache {
public:
    struct View {
        std::map<ProviderId, MetricSnapshot> by_provider;
        Millis freshness_ts = 0;
        std::string snapshot_id;
    };

    /// Materializes snapshots for every key known to the hub, stamped with
    /// `as_of` (the logical time of the underlying data).
    void refresh(const TelemetryHub& hub, Millis as_of);

    struct GetResult {
        std::shared_ptr<const View> view;  // may be null if never refreshed
        bool stale = true;
    };
    [[nodiscard]] GetResult get(const OperationId& op, const std::string& scope, Millis now,
                                Millis stale_after_ms) const;

    /// Test seam: publish a handcrafted view.
    void publish(const OperationId& op, const std::string& scope, View view);

    [[nodiscard]] long long refresh_count() const { return refresh_seq_; }

private:
    mutable std::mutex mu_;
    std::map<std::pair<OperationId, std::string>, std::shared_ptr<const View>> views_;
    long long refresh_seq_ = 0;
};

}  // namespace froute
