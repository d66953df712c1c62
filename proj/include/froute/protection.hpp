#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include "froute/config.hpp"
#include "froute/domain.hpp"
#include "froute/telemetry.hpp"

namespace froute {

enum class CircuitDecision : std::uint8_t { allow_normal, allow_probe, deny };

struct CircuitConfig {
    double failure_threshold = 0.5;
    int min_samples = 20;
    int window_size = 50;  // rolling count-based evaluation window
    Millis open_ms = 30000;
    int probe_budget = 3;
    int probe_successes_to_close = 3;

    static CircuitConfig from(const ControlParams& c) {
        return CircuitConfig{c.circuit_failure_threshold, c.circuit_min_samples,
                             c.circuit_window_size,       c.circuit_open_ms,
                             c.half_open_probe_budget,    c.probe_successes_to_close};
    }
};

struct CircuitTransition {
    CircuitState from = CircuitState::closed;
    CircuitState to = CircuitState::closed;
    Millis at = 0;
};

/// Per-key circuit breaker over a rolling count-based outcome window.
///
/// Legal transitions: closed->open, open->half_open, half_open->closed,
/// half_open->open. allow() may transition open->half_open and consumes a
/// probe slot when granting allow_probe; a grant that is not dispatched
/// must be returned via cancel_probe().
class CircuitBreaker {
public:
    explicit CircuitBreaker(CircuitConfig cfg) : cfg_(cfg) {}

    struct AllowResult {
        CircuitDecision decision = CircuitDecision::allow_normal;
        std::optional<CircuitTransition> transition;
    };
    AllowResult allow(Millis now);

    void cancel_probe();

    struct RecordResult {
        std::optional<CircuitTransition> transition;
    };
    RecordResult record(OutcomeClass outcome, Millis now, bool was_probe);

    [[nodiscard]] CircuitState state() const;
    [[nodiscard]] int probes_in_flight() const;
    [[nodiscard]] std::optional<Millis> opened_at() const;
    [[nodiscard]] const CircuitConfig& config() const { return cfg_; }

private:
    void transition_locked(CircuitState to, Millis now, std::optional<CircuitTransition>& out);
    void push_outcome_locked(bool failure);

    CircuitConfig cfg_;
    mutable std::mutex mu_;
    CircuitState state_ = CircuitState::closed;
    std::deque<bool> window_;  // true = failure
    int failure_count_ = 0;
    std::optional<Millis> opened_at_;
    int probes_in_flight_ = 0;
    int probe_successes_ = 0;
};

/// Fixed-capacity concurrency cap. Never blocks: acquisition either
/// succeeds immediately or is rejected.
class Bulkhead {
public:
    explicit Bulkhead(int capacity) : capacity_(capacity) {}

    bool try_acquire();
    void release();

    [[nodiscard]] int in_use() const;
    [[nodiscard]] int capacity() const { return capacity_; }

private:
    mutable std::mutex mu_;
    int capacity_;
    int in_use_ = 0;
};

/// RAII permit for Bulkhead.
class BulkheadPermit {
public:
    BulkheadPermit() = default;
    explicit BulkheadPermit(Bulkhead* b) : bulkhead_(b) {}
    BulkheadPermit(BulkheadPermit&& other) noexcept : bulkhead_(other.bulkhead_) {
        other.bulkhead_ = nullptr;
    }
    BulkheadPermit& operator=(BulkheadPermit&& other) noexcept {
        if (this != &other) {
            reset();
            bulkhead_ = other.bulkhead_;
            other.bulkhead_ = nullptr;
        }
        return *this;
    }
    BulkheadPermit(const BulkheadPermit&) = delete;
    BulkheadPermit& operator=(const BulkheadPermit&) = delete;
    ~BulkheadPermit() { reset(); }

    [[nodiscard]] bool holds() const { return bulkhead_ != nullptr; }
    void reset() {
        if (bulkhead_) {
            bulkhead_->release();
            bulkhead_ = nullptr;
        }
    }

private:
    Bulkhead* bulkhead_ = nullptr;
};

/// Tumbling-window retry budget per operation.
class RetryBudget {
public:
    RetryBudget(int budget_per_window, Millis window_ms)
        : budget_(budget_per_window), window_ms_(window_ms) {}

    bool try_consume(Millis now);
    [[nodiscard]] int consumed(Millis now) const;

private:
    void roll_locked(Millis now) const;

    int budget_;
    Millis window_ms_;
    mutable std::mutex mu_;
    mutable Millis window_start_ = 0;
    mutable int consumed_ = 0;
};

enum class RetryVerdict : std::uint8_t { retry_same, retry_alternate, stop };

/// Decide whether attempt `attempt_no` (1-based, just failed) may be
/// retried. Total attempts per request never exceed 1 + max_attempts.
RetryVerdict retry_decision(RetryBudget& budget, int attempt_no, bool idempotent,
                            RetryPolicy policy, int max_attempts, Millis now);

/// Windowed quota counter; used resets to 0 at each window boundary.
class QuotaTracker {
public:
    QuotaTracker(long long limit, Millis window_ms) : limit_(limit), window_ms_(window_ms) {}

    [[nodiscard]] bool check(Millis now, long long n = 1) const;
    /// No partial consumption: either all n units fit or nothing is taken.
    bool consume(Millis now, long long n = 1);
    [[nodiscard]] long long used(Millis now) const;

private:
    void roll_locked(Millis now) const;

    long long limit_;
    Millis window_ms_;
    mutable std::mutex mu_;
    mutable Millis reset_ts_ = 0;
    mutable long long used_ = 0;
};

/// Token bucket, refilled continuously at rate_per_s up to burst.
class TokenBucket {
public:
    TokenBucket(double rate_per_s, double burst)
        : rate_(rate_per_s), burst_(burst), tokens_(burst) {}

    bool try_consume(Millis now, double n = 1.0);
    [[nodiscard]] double available(Millis now) const;

private:
    void refill_locked(Millis now) const;

    double rate_;
    double burst_;
    mutable std::mutex mu_;
    mutable double tokens_;
    mutable Millis last_ms_ = 0;
};

/// Owns every protection primitive, keyed per operation/provider/region.
/// Circuit transitions are forwarded to the incident sink (telemetry).
class ProtectionRegistry {
public:
    using IncidentSink = std::function<void(const IncidentMarker&)>;

    explicit ProtectionRegistry(IncidentSink sink = {}) : sink_(std::move(sink)) {}

    CircuitDecision circuit_allow(const MetricKey& key, const CircuitConfig& cfg, Millis now);
    void circuit_cancel_probe(const MetricKey& key);
    void circuit_record(const MetricKey& key, const CircuitConfig& cfg, OutcomeClass outcome,
                        Millis now, bool was_probe);
    [[nodiscard]] CircuitState circuit_state(const MetricKey& key) const;

    Bulkhead& bulkhead(const OperationId& op, const ProviderId& provider, int capacity);
    RetryBudget& retry_budget(const OperationId& op, int budget, Millis window_ms);

    /// Null when the provider has no quota configured (gate passes).
    QuotaTracker* quota(const ProviderId& provider, const std::optional<QuotaConfig>& cfg);
    TokenBucket* rate_limiter(const ProviderId& provider,
                              const std::optional<RateLimitConfig>& cfg);

    void set_throttle(const ProviderId& provider, const std::string& region, Millis until);
    [[nodiscard]] bool throttled(const ProviderId& provider, const std::string& region,
                                 Millis now) const;

private:
    CircuitBreaker& circuit_locked(const MetricKey& key, const CircuitConfig& cfg);
    void emit(const MetricKey& key, const CircuitTransition& t);

    IncidentSink sink_;
    mutable std::mutex mu_;
    std::map<MetricKey, std::unique_ptr<CircuitBreaker>> circuits_;
    std::map<std::pair<OperationId, ProviderId>, std::unique_ptr<Bulkhead>> bulkheads_;
    std::map<OperationId, std::unique_ptr<RetryBudget>> budgets_;
    std::map<ProviderId, std::unique_ptr<QuotaTracker>> quotas_;
    std::map<ProviderId, std::unique_ptr<TokenBucket>> buckets_;
    std::map<std::pair<ProviderId, std::string>, Millis> throttle_until_;
};

std::string_view to_string(CircuitDecision v) noexcept;

}  // namespace froute
