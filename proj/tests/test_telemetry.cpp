#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "froute/telemetry.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace froute;
using froute::testing::make_event;

TEST_SUITE("telemetry") {

TEST_CASE("append assigns strictly increasing sequence numbers") {
    TelemetryHub hub;
    auto first = hub.append_event(make_event("r0", "alpha", 100, 10, true));
    auto second = hub.append_event(make_event("r1", "alpha", 200, 10, true));
    REQUIRE(first.seq);
    REQUIRE(second.seq);
    CHECK(*first.seq == 0);
    CHECK(*second.seq == 1);
}

TEST_CASE("append rejects invalid events and duplicates") {
    TelemetryHub hub;
    auto bad = make_event("r0", "alpha", 100, 10, true);
    bad.end_time = bad.start_time - 5;
    auto rejected = hub.append_event(bad);
    CHECK(!rejected.seq);
    CHECK(rejected.error.find("invalid_event") != std::string::npos);
    CHECK(hub.events_copy().empty());

    CHECK(hub.append_event(make_event("r1", "alpha", 100, 10, true)).seq);
    auto dup = hub.append_event(make_event("r1", "alpha", 300, 10, true));
    CHECK(!dup.seq);
    // A retry of the same request is a distinct attempt, not a duplicate.
    CHECK(hub.append_event(make_event("r1", "alpha", 300, 10, true, "US", 1)).seq);
}

TEST_CASE("completion linking honors the link timeout") {
    WindowConfig wc;
    wc.window_ms = 600000;
    wc.bucket_ms = 50000;
    wc.completion_link_timeout_ms = 120000;
    TelemetryHub hub(wc);
    MetricKey key{{"SEND_SMS"}, {"alpha"}, "US"};

    auto pending = make_event("r0", "alpha", 0, 50, false);
    pending.transport = {TransportKind::success, 200, std::nullopt};
    pending.business = {BusinessKind::unknown};
    REQUIRE(hub.append_event(pending).seq);

    SUBCASE("inside the timeout counts toward the window") {
        CHECK(hub.link_completion("r0", {BusinessKind::completed}, 30000) == LinkResult::ok);
        auto s = hub.aggregate(key, 60000);
        CHECK(s.attempted == 1);
        CHECK(s.completed == 1);
    }
    SUBCASE("outside the timeout is recorded but not counted") {
        CHECK(hub.link_completion("r0", {BusinessKind::completed}, 130000) == LinkResult::ok);
        auto s = hub.aggregate(key, 60000);
        CHECK(s.attempted == 1);
        CHECK(s.completed == 0);
        CHECK(hub.links_copy().size() == 1);
    }
    SUBCASE("unknown request ids are unmatched") {
        CHECK(hub.link_completion("nope", {BusinessKind::completed}, 1000) ==
              LinkResult::unmatched);
    }
    SUBCASE("a completion is only credited once") {
        CHECK(hub.link_completion("r0", {BusinessKind::completed}, 1000) == LinkResult::ok);
        CHECK(hub.link_completion("r0", {BusinessKind::completed}, 2000) == LinkResult::ok);
        auto s = hub.aggregate(key, 60000);
        CHECK(s.completed == 1);
    }
}

TEST_CASE("window aggregation reports raw counts and rates") {
    WindowConfig wc;
    wc.exact_mode = true;
    TelemetryHub hub(wc);
    MetricKey key{{"SEND_SMS"}, {"alpha"}, "US"};

    SUBCASE("high-volume window") {
        for (int i = 0; i < 10000; ++i) {
            hub.append_event(make_event("r" + std::to_string(i), "alpha", 59000, 100, i < 9900));
        }
        auto s = hub.aggregate(key, 60000);
        CHECK(s.attempted == 10000);
        CHECK(s.completed == 9900);
        CHECK(*s.completion_rate == doctest::Approx(0.99));
        CHECK(s.sample_count == 10000);
    }
    SUBCASE("a two-sample window reports rate 1.0 with its tiny count") {
        hub.append_event(make_event("a", "alpha", 59000, 100, true));
        hub.append_event(make_event("b", "alpha", 59500, 100, true));
        auto s = hub.aggregate(key, 60000);
        CHECK(s.attempted == 2);
        CHECK(*s.completion_rate == doctest::Approx(1.0));
        CHECK(s.sample_count == 2);
    }
    SUBCASE("empty window leaves metrics absent") {
        auto s = hub.aggregate(key, 60000);
        CHECK(s.attempted == 0);
        CHECK(!s.completion_rate);
        CHECK(!s.latency_p95_ms);
        CHECK(!s.mean_cost);
    }
}

TEST_CASE("nearest-rank percentile") {
    SUBCASE("constant sample") {
        std::vector<double> same(100, 100.0);
        CHECK(*percentile(same, 0.95) == 100.0);
    }
    SUBCASE("enumerated 1..100") {
        std::vector<double> values;
        for (int i = 1; i <= 100; ++i) values.push_back(i);
        // Frozen expectations computed by the enumeration oracle.
        CHECK(*testing::oracle_percentile(values, 0.95) == 95.0);
        CHECK(*testing::oracle_percentile(values, 0.99) == 99.0);
        CHECK(*percentile(values, 0.95) == 95.0);
        CHECK(*percentile(values, 0.99) == 99.0);
    }
    SUBCASE("empty sample is an error") { CHECK(!percentile({}, 0.95)); }
    SUBCASE("singleton") {
        std::vector<double> one{42.0};
        CHECK(*percentile(one, 0.95) == 42.0);
        CHECK(*percentile(one, 0.99) == 42.0);
    }
}

TEST_CASE("incident penalty decays exponentially and saturates") {
    WindowConfig wc;
    wc.incident_decay_tau_ms = 300000;
    TelemetryHub hub(wc);
    MetricKey key{{"SEND_SMS"}, {"alpha"}, "US"};
    CHECK(hub.incident_penalty(key, 1000) == 0.0);

    hub.add_incident({500000, {"SEND_SMS"}, {"alpha"}, "US", "closed->open"});
    CHECK(hub.incident_penalty(key, 500000) == doctest::Approx(1.0));
    CHECK(hub.incident_penalty(key, 800000) == doctest::Approx(std::exp(-1.0)));

    SUBCASE("saturation at 1") {
        hub.add_incident({500000, {"SEND_SMS"}, {"alpha"}, "US", "operator"});
        CHECK(hub.incident_penalty(key, 500000) == 1.0);
    }
    SUBCASE("close transitions do not count, other keys do not leak") {
        hub.add_incident({500000, {"SEND_SMS"}, {"alpha"}, "US", "half_open->closed"});
        CHECK(hub.incident_penalty(key, 500000) == doctest::Approx(1.0));
        MetricKey other{{"SEND_SMS"}, {"beta"}, "US"};
        CHECK(hub.incident_penalty(other, 500000) == 0.0);
    }
    SUBCASE("global scope sees regional markers") {
        MetricKey global{{"SEND_SMS"}, {"alpha"}, kGlobalScope};
        CHECK(hub.incident_penalty(global, 800000) == doctest::Approx(std::exp(-1.0)));
    }
}

TEST_CASE("snapshot cache staleness") {
    TelemetryHub hub;
    SnapshotCache cache;
    hub.append_event(make_event("r0", "alpha", 1000, 100, true));
    cache.refresh(hub, 2000);

    SUBCASE("fresh within the threshold") {
        auto got = cache.get({"SEND_SMS"}, "US", 4000, 30000);
        REQUIRE(got.view);
        CHECK(!got.stale);
        CHECK(got.view->by_provider.count({"alpha"}) == 1);
    }
    SUBCASE("stale beyond the threshold") {
        auto got = cache.get({"SEND_SMS"}, "US", 33001, 30000);
        REQUIRE(got.view);
        CHECK(got.stale);
    }
    SUBCASE("unseen providers are simply absent") {
        auto got = cache.get({"SEND_SMS"}, "US", 4000, 30000);
        REQUIRE(got.view);
        CHECK(got.view->by_provider.count({"beta"}) == 0);
    }
    SUBCASE("never-refreshed scope is stale with no view") {
        auto got = cache.get({"SEND_SMS"}, "DE", 4000, 30000);
        CHECK(!got.view);
        CHECK(got.stale);
    }
}

TEST_CASE("snapshot ids and freshness are monotone across refreshes") {
    TelemetryHub hub;
    SnapshotCache cache;
    hub.append_event(make_event("r0", "alpha", 1000, 100, true));
    std::string last_id;
    Millis last_ts = -1;
    for (int i = 1; i <= 5; ++i) {
        cache.refresh(hub, 1000 * i + 1000);
        auto got = cache.get({"SEND_SMS"}, "US", 1000 * i + 1000, 30000);
        REQUIRE(got.view);
        CHECK(got.view->snapshot_id > last_id);
        CHECK(got.view->freshness_ts > last_ts);
        last_id = got.view->snapshot_id;
        last_ts = got.view->freshness_ts;
    }
}

TEST_CASE("completion links and snapshots round trip through jsonl") {
    CompletionLink link{"r42", BusinessKind::completed, 123456};
    std::string error;
    auto back = link_from_jsonl(link_to_jsonl(link), error);
    REQUIRE_MESSAGE(back, error);
    CHECK(back->request_id == link.request_id);
    CHECK(back->business_kind == link.business_kind);
    CHECK(back->ts == link.ts);
    CHECK(!link_from_jsonl("nope", error));

    auto snapshot = testing::make_snapshot("alpha", 0.97, 210, 0.004, 0.1, 500, 60000);
    auto line = snapshot_to_jsonl(snapshot);
    CHECK(line.find("\"operation\":\"SEND_SMS\"") != std::string::npos);
    CHECK(line.find("\"sample_count\":500") != std::string::npos);
}

TEST_CASE("event log files load with strict and lenient modes") {
    const std::string path = "test_event_log.jsonl";
    {
        std::ofstream out(path, std::ios::trunc);
        out << event_to_jsonl(make_event("r0", "alpha", 0, 10, true)) << "\n";
        out << event_to_jsonl(make_event("r1", "alpha", 10, 10, true)) << "\n";
        out << "{ this is not json }\n";
        out << event_to_jsonl(make_event("r2", "beta", 20, 10, false)) << "\n";
    }
    SUBCASE("lenient keeps good lines and reports the bad one") {
        auto loaded = load_event_log(path, false);
        REQUIRE(loaded);
        CHECK(loaded.events.size() == 3);
        REQUIRE(loaded.warnings.size() == 1);
        CHECK(loaded.warnings[0].find("line 3") != std::string::npos);
    }
    SUBCASE("strict fails at the malformed line") {
        auto loaded = load_event_log(path, true);
        CHECK(!loaded);
        CHECK(loaded.fatal.find("line 3") != std::string::npos);
    }
    SUBCASE("missing files are io errors") {
        auto loaded = load_event_log("does_not_exist.jsonl", false);
        CHECK(!loaded);
        CHECK(loaded.fatal.find("io_error") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("adding events outside the window does not change the snapshot") {
    WindowConfig wc;
    wc.exact_mode = true;
    TelemetryHub hub(wc);
    MetricKey key{{"SEND_SMS"}, {"alpha"}, "US"};
    hub.append_event(make_event("in0", "alpha", 100000, 50, true));
    hub.append_event(make_event("in1", "alpha", 110000, 70, false));
    auto before = hub.aggregate(key, 120000);
    hub.append_event(make_event("old", "alpha", 30000, 10, true));  // 90s before now
    auto after = hub.aggregate(key, 120000);
    CHECK(before.attempted == after.attempted);
    CHECK(before.completed == after.completed);
    CHECK(*before.latency_p95_ms == *after.latency_p95_ms);
}

TEST_CASE("streaming aggregation matches a brute-force rescan") {
    std::mt19937_64 rng(2024);
    auto uniform = [&](double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
    };
    const std::vector<std::string> providers{"alpha", "beta"};
    const std::vector<std::string> regions{"US", "BR"};

    for (int trial = 0; trial < 20; ++trial) {
        WindowConfig wc;
        wc.window_ms = 60000;
        wc.bucket_ms = 5000;
        wc.exact_mode = (trial % 2 == 0);
        TelemetryHub hub(wc, rng());
        std::vector<AttemptEvent> all;
        const int n = 400 + static_cast<int>(rng() % 2000);
        const Millis span = 400000;
        Millis t = 0;
        for (int i = 0; i < n; ++i) {
            t += static_cast<Millis>(uniform(0, 2.0 * span / n));
            all.push_back(make_event("r" + std::to_string(trial) + "_" + std::to_string(i),
                                     providers[rng() % 2], t,
                                     static_cast<Millis>(uniform(10, 900)), rng() % 4 != 0,
                                     regions[rng() % 2]));
        }
        // Queries happen at the ingest frontier, as they would live.
        std::vector<Millis> query_times;
        for (int q = 0; q < 6; ++q)
            query_times.push_back(static_cast<Millis>(uniform(10000, t + 60000)));
        std::sort(query_times.begin(), query_times.end());

        std::size_t ingested = 0;
        for (const Millis now : query_times) {
            while (ingested < all.size() && all[ingested].start_time <= now) {
                REQUIRE(hub.append_event(all[ingested]).seq);
                ++ingested;
            }
            MetricKey key{{"SEND_SMS"},
                          {providers[rng() % 2]},
                          (rng() % 3 == 0) ? std::string(kGlobalScope) : regions[rng() % 2]};
            auto got = hub.aggregate(key, now);
            Millis from_exclusive;
            if (wc.exact_mode) {
                from_exclusive = now - wc.window_ms;
            } else {
                const Millis nb = wc.window_ms / wc.bucket_ms;
                from_exclusive = (now / wc.bucket_ms - nb + 1) * wc.bucket_ms - 1;
            }
            auto want = testing::brute_force_aggregate(all, {}, key, from_exclusive, now,
                                                       wc.completion_link_timeout_ms);
            CHECK(got.attempted == want.attempted);
            CHECK(got.completed == want.completed);
            if (want.completion_rate) {
                CHECK(*got.completion_rate == doctest::Approx(*want.completion_rate));
            } else {
                CHECK(!got.completion_rate);
            }
            if (want.p95) {
                REQUIRE(got.latency_p95_ms);
                CHECK(*got.latency_p95_ms == doctest::Approx(*want.p95));
                CHECK(*got.latency_p99_ms == doctest::Approx(*want.p99));
                CHECK(*got.latency_p95_ms <= *got.latency_p99_ms);
            }
        }
    }
}

}  // TEST_SUITE
