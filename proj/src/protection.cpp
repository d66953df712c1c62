#include "froute/protection.hpp"

#include <algorithm>

namespace froute {

std::string_view to_string(CircuitDecision v) noexcept {
    switch (v) {
        case CircuitDecision::allow_normal: return "allow_normal";
        case CircuitDecision::allow_probe: return "allow_probe";
        case CircuitDecision::deny: return "deny";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// CircuitBreaker
// ---------------------------------------------------------------------------

void CircuitBreaker::transition_locked(CircuitState to, Millis now,
                                       std::optional<CircuitTransition>& out) {
    out = CircuitTransition{state_, to, now};
    state_ = to;
    if (to == CircuitState::open) {
        opened_at_ = now;
        probes_in_flight_ = 0;
        probe_successes_ = 0;
        window_.clear();
        failure_count_ = 0;
    } else if (to == CircuitState::closed) {
        opened_at_.reset();
        probes_in_flight_ = 0;
        probe_successes_ = 0;
        window_.clear();
        failure_count_ = 0;
    } else {  // half_open
        probes_in_flight_ = 0;
        probe_successes_ = 0;
    }
}

void CircuitBreaker::push_outcome_locked(bool failure) {
    window_.push_back(failure);
    if (failure) ++failure_count_;
    while (static_cast<int>(window_.size()) > cfg_.window_size) {
        if (window_.front()) --failure_count_;
        window_.pop_front();
    }
}

CircuitBreaker::AllowResult CircuitBreaker::allow(Millis now) {
    std::lock_guard lock(mu_);
    AllowResult r;
    switch (state_) {
        case CircuitState::closed:
            r.decision = CircuitDecision::allow_normal;
            return r;
        case CircuitState::open:
            if (opened_at_ && now - *opened_at_ >= cfg_.open_ms) {
                transition_locked(CircuitState::half_open, now, r.transition);
                probes_in_flight_ = 1;
                r.decision = CircuitDecision::allow_probe;
            } else {
                r.decision = CircuitDecision::deny;
            }
            return r;
        case CircuitState::half_open:
            if (probes_in_flight_ < cfg_.probe_budget) {
                ++probes_in_flight_;
                r.decision = CircuitDecision::allow_probe;
            } else {
                r.decision = CircuitDecision::deny;
            }
            return r;
    }
    r.decision = CircuitDecision::deny;
    return r;
}

void CircuitBreaker::cancel_probe() {
    std::lock_guard lock(mu_);
    if (state_ == CircuitState::half_open && probes_in_flight_ > 0) --probes_in_flight_;
}

CircuitBreaker::RecordResult CircuitBreaker::record(OutcomeClass outcome, Millis now,
                                                    bool was_probe) {
    std::lock_guard lock(mu_);
    RecordResult r;
    const bool failure = outcome == OutcomeClass::attempt_failure;
    switch (state_) {
        case CircuitState::closed: {
            push_outcome_locked(failure);
            const auto samples = static_cast<int>(window_.size());
            if (samples >= cfg_.min_samples &&
                static_cast<double>(failure_count_) / static_cast<double>(samples) >=
                    cfg_.failure_threshold) {
                transition_locked(CircuitState::open, now, r.transition);
            }
            return r;
        }
        case CircuitState::half_open: {
            if (was_probe && probes_in_flight_ > 0) --probes_in_flight_;
            if (failure) {
                transition_locked(CircuitState::open, now, r.transition);
            } else if (was_probe) {
                ++probe_successes_;
                if (probe_successes_ >= cfg_.probe_successes_to_close) {
                    transition_locked(CircuitState::closed, now, r.transition);
                }
            }
            return r;
        }
        case CircuitState::open:
            // Late completion of an attempt allowed before the circuit
            // opened; nothing to update.
            return r;
    }
    return r;
}

CircuitState CircuitBreaker::state() const {
    std::lock_guard lock(mu_);
    return state_;
}

int CircuitBreaker::probes_in_flight() const {
    std::lock_guard lock(mu_);
    return probes_in_flight_;
}

std::optional<Millis> CircuitBreaker::opened_at() const {
    std::lock_guard lock(mu_);
    return opened_at_;
}

// ---------------------------------------------------------------------------
// Bulkhead / RetryBudget / Quota / TokenBucket
// ---------------------------------------------------------------------------

bool Bulkhead::try_acquire() {
    std::lock_guard lock(mu_);
    if (in_use_ >= capacity_) return false;
    ++in_use_;
    return true;
}

void Bulkhead::release() {
    std::lock_guard lock(mu_);
    if (in_use_ > 0) --in_use_;
}

int Bulkhead::in_use() const {
    std::lock_guard lock(mu_);
    return in_use_;
}

void RetryBudget::roll_locked(Millis now) const {
    if (window_ms_ <= 0) return;
    if (now - window_start_ >= window_ms_) {
        window_start_ = (now / window_ms_) * window_ms_;
        consumed_ = 0;
    }
}

bool RetryBudget::try_consume(Millis now) {
    std::lock_guard lock(mu_);
    roll_locked(now);
    if (consumed_ >= budget_) return false;
    ++consumed_;
    return true;
}

int RetryBudget::consumed(Millis now) const {
    std::lock_guard lock(mu_);
    roll_locked(now);
    return consumed_;
}

RetryVerdict retry_decision(RetryBudget& budget, int attempt_no, bool idempotent,
                            RetryPolicy policy, int max_attempts, Millis now) {
    if (!idempotent) return RetryVerdict::stop;
    if (policy == RetryPolicy::none || policy == RetryPolicy::hedged) return RetryVerdict::stop;
    if (attempt_no > max_attempts) return RetryVerdict::stop;
    if (!budget.try_consume(now)) return RetryVerdict::stop;
    return policy == RetryPolicy::same_provider ? RetryVerdict::retry_same
                                                : RetryVerdict::retry_alternate;
}

void QuotaTracker::roll_locked(Millis now) const {
    if (now >= reset_ts_) {
        used_ = 0;
        reset_ts_ = (now / window_ms_ + 1) * window_ms_;
    }
}

bool QuotaTracker::check(Millis now, long long n) const {
    std::lock_guard lock(mu_);
    roll_locked(now);
    return used_ + n <= limit_;
}

bool QuotaTracker::consume(Millis now, long long n) {
    std::lock_guard lock(mu_);
    roll_locked(now);
    if (used_ + n > limit_) return false;
    used_ += n;
    return true;
}

long long QuotaTracker::used(Millis now) const {
    std::lock_guard lock(mu_);
    roll_locked(now);
    return used_;
}

void TokenBucket::refill_locked(Millis now) const {
    if (now <= last_ms_) return;
    tokens_ = std::min(burst_, tokens_ + static_cast<double>(now - last_ms_) / 1000.0 * rate_);
    last_ms_ = now;
}

bool TokenBucket::try_consume(Millis now, double n) {
    std::lock_guard lock(mu_);
    refill_locked(now);
    if (tokens_ < n) return false;
    tokens_ -= n;
    return true;
}

double TokenBucket::available(Millis now) const {
    std::lock_guard lock(mu_);
    refill_locked(now);
    return tokens_;
}

// ---------------------------------------------------------------------------
// ProtectionRegistry
// ---------------------------------------------------------------------------

CircuitBreaker& ProtectionRegistry::circuit_locked(const MetricKey& key,
                                                   const CircuitConfig& cfg) {
    auto it = circuits_.find(key);
    if (it == circuits_.end()) {
        it = circuits_.emplace(key, std::make_unique<CircuitBreaker>(cfg)).first;
    }
    return *it->second;
}

void ProtectionRegistry::emit(const MetricKey& key, const CircuitTransition& t) {
    if (!sink_) return;
    IncidentMarker m;
    m.ts = t.at;
    m.operation = key.operation;
    m.provider = key.provider;
    m.region = key.scope;
    m.transition = std::string(to_string(t.from)) + "->" + std::string(to_string(t.to));
    sink_(m);
}

CircuitDecision ProtectionRegistry::circuit_allow(const MetricKey& key, const CircuitConfig& cfg,
                                                  Millis now) {
    CircuitBreaker* cb;
    {
        std::lock_guard lock(mu_);
        cb = &circuit_locked(key, cfg);
    }
    auto result = cb->allow(now);
    if (result.transition) emit(key, *result.transition);
    return result.decision;
}

void ProtectionRegistry::circuit_cancel_probe(const MetricKey& key) {
    std::lock_guard lock(mu_);
    auto it = circuits_.find(key);
    if (it != circuits_.end()) it->second->cancel_probe();
}

void ProtectionRegistry::circuit_record(const MetricKey& key, const CircuitConfig& cfg,
                                        OutcomeClass outcome, Millis now, bool was_probe) {
    CircuitBreaker* cb;
    {
        std::lock_guard lock(mu_);
        cb = &circuit_locked(key, cfg);
    }
    auto result = cb->record(outcome, now, was_probe);
    if (result.transition) emit(key, *result.transition);
}

CircuitState ProtectionRegistry::circuit_state(const MetricKey& key) const {
    std::lock_guard lock(mu_);
    auto it = circuits_.find(key);
    return it == circuits_.end() ? CircuitState::closed : it->second->state();
}

Bulkhead& ProtectionRegistry::bulkhead(const OperationId& op, const ProviderId& provider,
                                       int capacity) {
    std::lock_guard lock(mu_);
    auto key = std::make_pair(op, provider);
    auto it = bulkheads_.find(key);
    if (it == bulkheads_.end()) {
        it = bulkheads_.emplace(key, std::make_unique<Bulkhead>(capacity)).first;
    }
    return *it->second;
}

RetryBudget& ProtectionRegistry::retry_budget(const OperationId& op, int budget,
                                              Millis window_ms) {
    std::lock_guard lock(mu_);
    auto it = budgets_.find(op);
    if (it == budgets_.end()) {
        it = budgets_.emplace(op, std::make_unique<RetryBudget>(budget, window_ms)).first;
    }
    return *it->second;
}

QuotaTracker* ProtectionRegistry::quota(const ProviderId& provider,
                                        const std::optional<QuotaConfig>& cfg) {
    std::lock_guard lock(mu_);
    auto it = quotas_.find(provider);
    if (it != quotas_.end()) return it->second.get();
    if (!cfg) return nullptr;
    it = quotas_.emplace(provider, std::make_unique<QuotaTracker>(cfg->limit, cfg->window_ms))
             .first;
    return it->second.get();
}

TokenBucket* ProtectionRegistry::rate_limiter(const ProviderId& provider,
                                              const std::optional<RateLimitConfig>& cfg) {
    std::lock_guard lock(mu_);
    auto it = buckets_.find(provider);
    if (it != buckets_.end()) return it->second.get();
    if (!cfg) return nullptr;
    it = buckets_.emplace(provider, std::make_unique<TokenBucket>(cfg->rate_per_s, cfg->burst))
             .first;
    return it->second.get();
}

void ProtectionRegistry::set_throttle(const ProviderId& provider, const std::string& region,
                                      Millis until) {
    std::lock_guard lock(mu_);
    auto& slot = throttle_until_[{provider, region}];
    slot = std::max(slot, until);
}

bool ProtectionRegistry::throttled(const ProviderId& provider, const std::string& region,
                                   Millis now) const {
    std::lock_guard lock(mu_);
    auto it = throttle_until_.find({provider, region});
    return it != throttle_until_.end() && now < it->second;
}

}  // namespace froute
