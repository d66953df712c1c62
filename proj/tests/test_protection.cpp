#include "doctest.h"

#include <random>
#include <set>
#include <thread>

#include "froute/protection.hpp"

using namespace froute;

namespace {

CircuitConfig small_circuit() {
    CircuitConfig cfg;
    cfg.failure_threshold = 0.5;
    cfg.min_samples = 20;
    cfg.window_size = 50;
    cfg.open_ms = 30000;
    cfg.probe_budget = 3;
    cfg.probe_successes_to_close = 3;
    return cfg;
}

bool legal_transition(CircuitState from, CircuitState to) {
    if (from == CircuitState::closed) return to == CircuitState::open;
    if (from == CircuitState::open) return to == CircuitState::half_open;
    return to == CircuitState::closed || to == CircuitState::open;  // from half_open
}

}  // namespace

TEST_SUITE("protection") {

TEST_CASE("circuit allows normally while closed") {
    CircuitBreaker cb(small_circuit());
    CHECK(cb.allow(0).decision == CircuitDecision::allow_normal);
    CHECK(cb.state() == CircuitState::closed);
}

TEST_CASE("circuit opens at the failure threshold once min samples are met") {
    CircuitBreaker cb(small_circuit());
    // 9 failures in 19 samples: below min samples, stays closed.
    for (int i = 0; i < 10; ++i) cb.record(OutcomeClass::workflow_success, i, false);
    for (int i = 0; i < 9; ++i) cb.record(OutcomeClass::attempt_failure, 10 + i, false);
    CHECK(cb.state() == CircuitState::closed);
    // The 20th sample brings failures to exactly half the window: open.
    auto r = cb.record(OutcomeClass::attempt_failure, 20, false);
    CHECK(cb.state() == CircuitState::open);
    REQUIRE(r.transition);
    CHECK(r.transition->from == CircuitState::closed);
    CHECK(r.transition->to == CircuitState::open);
    CHECK(cb.opened_at() == 20);
}

TEST_CASE("open denies until open_ms, then grants one probe") {
    CircuitBreaker cb(small_circuit());
    for (int i = 0; i < 20; ++i) cb.record(OutcomeClass::attempt_failure, 0, false);
    REQUIRE(cb.state() == CircuitState::open);

    CHECK(cb.allow(29999).decision == CircuitDecision::deny);
    auto probe = cb.allow(30000);
    CHECK(probe.decision == CircuitDecision::allow_probe);
    CHECK(cb.state() == CircuitState::half_open);
    REQUIRE(probe.transition);
    CHECK(probe.transition->from == CircuitState::open);
    CHECK(cb.probes_in_flight() == 1);
}

TEST_CASE("half-open: probe failures reopen, enough successes close") {
    CircuitBreaker cb(small_circuit());
    for (int i = 0; i < 20; ++i) cb.record(OutcomeClass::attempt_failure, 0, false);
    REQUIRE(cb.allow(30000).decision == CircuitDecision::allow_probe);

    SUBCASE("one probe failure reopens") {
        auto r = cb.record(OutcomeClass::attempt_failure, 30100, true);
        CHECK(cb.state() == CircuitState::open);
        CHECK(cb.opened_at() == 30100);
        REQUIRE(r.transition);
        CHECK(r.transition->from == CircuitState::half_open);
    }
    SUBCASE("successes up to the threshold close the circuit") {
        cb.record(OutcomeClass::workflow_success, 30100, true);
        CHECK(cb.state() == CircuitState::half_open);
        REQUIRE(cb.allow(30200).decision == CircuitDecision::allow_probe);
        cb.record(OutcomeClass::attempt_success, 30300, true);
        REQUIRE(cb.allow(30400).decision == CircuitDecision::allow_probe);
        auto r = cb.record(OutcomeClass::workflow_success, 30500, true);
        CHECK(cb.state() == CircuitState::closed);
        REQUIRE(r.transition);
        CHECK(r.transition->to == CircuitState::closed);
    }
    SUBCASE("probe grants never exceed the budget") {
        // One grant consumed by the transition; budget 3.
        CHECK(cb.allow(30001).decision == CircuitDecision::allow_probe);
        CHECK(cb.allow(30002).decision == CircuitDecision::allow_probe);
        CHECK(cb.probes_in_flight() == 3);
        CHECK(cb.allow(30003).decision == CircuitDecision::deny);
        cb.cancel_probe();
        CHECK(cb.allow(30004).decision == CircuitDecision::allow_probe);
    }
}

TEST_CASE("circuit property: only legal transitions under random outcomes") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 400; ++trial) {
        CircuitConfig cfg;
        cfg.failure_threshold = 0.3 + 0.5 * (static_cast<double>(rng() % 100) / 100.0);
        cfg.min_samples = 2 + static_cast<int>(rng() % 10);
        cfg.window_size = cfg.min_samples + static_cast<int>(rng() % 20);
        cfg.open_ms = 100 + static_cast<Millis>(rng() % 5000);
        cfg.probe_budget = 1 + static_cast<int>(rng() % 3);
        cfg.probe_successes_to_close = 1 + static_cast<int>(rng() % 3);
        CircuitBreaker cb(cfg);
        Millis now = 0;
        Millis opened_at = -1;  // <0 means not currently open
        for (int step = 0; step < 60; ++step) {
            now += static_cast<Millis>(rng() % (cfg.open_ms / 2 + 1));
            const auto before = cb.state();
            auto allowed = cb.allow(now);
            if (allowed.transition) {
                CHECK(legal_transition(allowed.transition->from, allowed.transition->to));
            }
            // Deny soundness: while open and inside open_ms nothing passes.
            if (before == CircuitState::open && opened_at >= 0 &&
                now - opened_at < cfg.open_ms) {
                CHECK(allowed.decision == CircuitDecision::deny);
            }
            CHECK(cb.probes_in_flight() <= cfg.probe_budget);
            if (allowed.decision == CircuitDecision::deny) continue;
            const bool fail = rng() % 3 == 0;
            auto rec = cb.record(
                fail ? OutcomeClass::attempt_failure : OutcomeClass::workflow_success, now,
                allowed.decision == CircuitDecision::allow_probe);
            if (rec.transition) {
                CHECK(legal_transition(rec.transition->from, rec.transition->to));
                if (rec.transition->to == CircuitState::open) opened_at = now;
            }
            if (allowed.transition && allowed.transition->to == CircuitState::half_open)
                opened_at = -1;
        }
    }
}

TEST_CASE("bulkhead caps concurrent use") {
    Bulkhead b(2);
    CHECK(b.try_acquire());
    CHECK(b.try_acquire());
    CHECK(!b.try_acquire());
    b.release();
    CHECK(b.try_acquire());
    CHECK(b.in_use() == 2);
}

TEST_CASE("bulkhead conservation under concurrent acquire/release") {
    Bulkhead b(8);
    std::atomic<long long> acquired{0};
    std::atomic<long long> released{0};
    std::atomic<bool> violated{false};
    std::vector<std::thread> threads;
    threads.reserve(4);
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            std::mt19937_64 rng(std::hash<std::thread::id>{}(std::this_thread::get_id()));
            for (int i = 0; i < 5000; ++i) {
                if (b.try_acquire()) {
                    acquired.fetch_add(1);
                    if (b.in_use() > b.capacity()) violated.store(true);
                    if (rng() % 2) std::this_thread::yield();
                    b.release();
                    released.fetch_add(1);
                }
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(!violated.load());
    CHECK(acquired.load() == released.load());
    CHECK(b.in_use() == 0);
}

TEST_CASE("bulkhead permit releases on scope exit") {
    Bulkhead b(1);
    {
        REQUIRE(b.try_acquire());
        BulkheadPermit permit(&b);
        CHECK(b.in_use() == 1);
    }
    CHECK(b.in_use() == 0);
}

TEST_CASE("retry decisions") {
    RetryBudget budget(2, 60000);
    SUBCASE("non-idempotent operations never retry") {
        CHECK(retry_decision(budget, 1, false, RetryPolicy::alternate_provider, 2, 0) ==
              RetryVerdict::stop);
    }
    SUBCASE("policy none stops") {
        CHECK(retry_decision(budget, 1, true, RetryPolicy::none, 2, 0) == RetryVerdict::stop);
    }
    SUBCASE("alternate-provider policy with budget") {
        CHECK(retry_decision(budget, 1, true, RetryPolicy::alternate_provider, 2, 0) ==
              RetryVerdict::retry_alternate);
        CHECK(retry_decision(budget, 1, true, RetryPolicy::same_provider, 2, 0) ==
              RetryVerdict::retry_same);
        // Budget of 2 is now exhausted.
        CHECK(retry_decision(budget, 1, true, RetryPolicy::alternate_provider, 2, 0) ==
              RetryVerdict::stop);
    }
    SUBCASE("attempt cap bounds amplification") {
        RetryBudget big(1000, 60000);
        int attempts = 1;
        while (attempts < 50) {
            auto v = retry_decision(big, attempts, true, RetryPolicy::same_provider, 2, 0);
            if (v == RetryVerdict::stop) break;
            ++attempts;
        }
        CHECK(attempts == 3);  // 1 + max_attempts
    }
    SUBCASE("budget window rolls over") {
        RetryBudget one(1, 1000);
        CHECK(retry_decision(one, 1, true, RetryPolicy::same_provider, 5, 0) ==
              RetryVerdict::retry_same);
        CHECK(retry_decision(one, 1, true, RetryPolicy::same_provider, 5, 500) ==
              RetryVerdict::stop);
        CHECK(retry_decision(one, 1, true, RetryPolicy::same_provider, 5, 1500) ==
              RetryVerdict::retry_same);
    }
}

TEST_CASE("quota tracker") {
    QuotaTracker q(100, 86400000);
    SUBCASE("available up to the limit") {
        CHECK(q.consume(0, 99));
        CHECK(q.check(0, 1));
        CHECK(q.consume(0, 1));
        CHECK(!q.check(0, 1));
        CHECK(!q.consume(0, 1));  // no partial consumption
        CHECK(q.used(0) == 100);
    }
    SUBCASE("resets at the window boundary") {
        CHECK(q.consume(0, 100));
        CHECK(!q.check(86399999, 1));
        CHECK(q.check(86400000, 1));
        CHECK(q.used(86400000) == 0);
    }
}

TEST_CASE("token bucket refills at the configured rate") {
    TokenBucket tb(10.0, 5.0);  // 10/s, burst 5
    for (int i = 0; i < 5; ++i) CHECK(tb.try_consume(0));
    CHECK(!tb.try_consume(0));
    CHECK(!tb.try_consume(50));   // 0.5 tokens accrued
    CHECK(tb.try_consume(100));   // 1 token accrued
    CHECK(tb.available(100) < 1.0);
    CHECK(tb.available(10000) == doctest::Approx(5.0));  // capped at burst
}

TEST_CASE("registry wires circuits to incident markers and throttles") {
    std::vector<IncidentMarker> markers;
    ProtectionRegistry reg([&](const IncidentMarker& m) { markers.push_back(m); });
    MetricKey key{{"SEND_SMS"}, {"alpha"}, "US"};
    auto cfg = small_circuit();
    cfg.min_samples = 2;
    cfg.window_size = 4;

    CHECK(reg.circuit_allow(key, cfg, 0) == CircuitDecision::allow_normal);
    reg.circuit_record(key, cfg, OutcomeClass::attempt_failure, 1, false);
    reg.circuit_record(key, cfg, OutcomeClass::attempt_failure, 2, false);
    CHECK(reg.circuit_state(key) == CircuitState::open);
    REQUIRE(markers.size() == 1);
    CHECK(markers[0].transition == "closed->open");
    CHECK(markers[0].region == "US");

    CHECK(!reg.throttled({"alpha"}, "US", 0));
    reg.set_throttle({"alpha"}, "US", 5000);
    CHECK(reg.throttled({"alpha"}, "US", 4999));
    CHECK(!reg.throttled({"alpha"}, "US", 5000));
    CHECK(!reg.throttled({"alpha"}, "BR", 0));

    CHECK(reg.quota({"alpha"}, std::nullopt) == nullptr);
    auto* q = reg.quota({"alpha"}, QuotaConfig{10, 1000});
    REQUIRE(q);
    CHECK(q->check(0, 10));
}

}  // TEST_SUITE
