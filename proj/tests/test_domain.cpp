#include "doctest.h"

#include <random>

#include "froute/domain.hpp"
#include "support/fixtures.hpp"

using namespace froute;

TEST_SUITE("domain") {

TEST_CASE("outcome classification distinguishes attempt and workflow success") {
    TransportOutcome ok{TransportKind::success, 200, std::nullopt};
    TransportOutcome timed_out{TransportKind::timeout, std::nullopt, std::nullopt};

    CHECK(classify_outcome(ok, {BusinessKind::completed}) == OutcomeClass::workflow_success);
    CHECK(classify_outcome(ok, {BusinessKind::authorized}) == OutcomeClass::workflow_success);
    CHECK(classify_outcome(ok, {BusinessKind::delivered}) == OutcomeClass::workflow_success);
    // HTTP 200 without a downstream signal is only attempt-level success.
    CHECK(classify_outcome(ok, {BusinessKind::unknown}) == OutcomeClass::attempt_success);
    CHECK(classify_outcome(ok, {BusinessKind::accepted}) == OutcomeClass::attempt_success);
    CHECK(classify_outcome(timed_out, {BusinessKind::unknown}) ==
          OutcomeClass::attempt_failure);
    CHECK(classify_outcome({TransportKind::server_error, 500, std::nullopt},
                           {BusinessKind::failed}) == OutcomeClass::attempt_failure);
    // Late completion flips the class even across transport failure.
    CHECK(classify_outcome(timed_out, {BusinessKind::completed}) ==
          OutcomeClass::workflow_success);
}

TEST_CASE("event validation reports each violated invariant") {
    auto good = testing::make_event("r1", "alpha", 1000, 120, true);
    CHECK(validate_event(good).empty());

    SUBCASE("time order") {
        auto e = good;
        e.end_time = e.start_time - 1;
        e.latency_ms = -1;
        auto v = validate_event(e);
        bool found = false;
        for (const auto& msg : v) found |= msg.find("time order") != std::string::npos;
        CHECK(found);
    }
    SUBCASE("timeout consistency") {
        auto e = good;
        e.timeout = true;  // transport still says success
        auto v = validate_event(e);
        bool found = false;
        for (const auto& msg : v) found |= msg.find("timeout consistency") != std::string::npos;
        CHECK(found);
    }
    SUBCASE("latency must equal end minus start") {
        auto e = good;
        e.latency_ms += 1;
        CHECK(!validate_event(e).empty());
    }
    SUBCASE("timeout carries no status code") {
        auto e = good;
        e.timeout = true;
        e.transport = {TransportKind::timeout, 200, std::nullopt};
        CHECK(!validate_event(e).empty());
    }
}

TEST_CASE("operation id token rules") {
    CHECK(OperationId{"SEND_SMS"}.valid());
    CHECK(OperationId{"PAYMENT_AUTH2"}.valid());
    CHECK(!OperationId{""}.valid());
    CHECK(!OperationId{"send_sms"}.valid());
    CHECK(!OperationId{"2FA"}.valid());
}

TEST_CASE("jsonl round trip is field-exact") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        AttemptEvent e;
        e.schema_version = 1;
        e.request_id = "r" + std::to_string(i);
        e.operation = {"VERIFY_PHONE"};
        e.provider = {i % 2 ? "alpha" : "gamma"};
        e.region = i % 3 ? "US" : "BR";
        if (i % 4 == 0) e.tenant = "tenant-" + std::to_string(i % 5);
        e.start_time = static_cast<Millis>(rng() % 1000000);
        e.end_time = e.start_time + static_cast<Millis>(rng() % 5000);
        e.latency_ms = static_cast<double>(e.end_time - e.start_time);
        e.retry_count = static_cast<int>(rng() % 3);
        e.circuit_state = static_cast<CircuitState>(rng() % 3);
        e.timeout = (i % 7 == 0);
        if (e.timeout) {
            e.transport = {TransportKind::timeout, std::nullopt, "deadline"};
        } else {
            e.transport = {TransportKind::success, 200, std::nullopt};
            e.business = {BusinessKind::completed};
        }
        e.cost = quantize_cost(unit(rng) * 0.05);
        e.factor_list_version = "abcd1234abcd1234";
        e.trace_id = "d" + std::to_string(i);

        std::string error;
        auto back = event_from_jsonl(event_to_jsonl(e), error);
        REQUIRE_MESSAGE(back.has_value(), error);
        CHECK(*back == e);
    }
}

TEST_CASE("jsonl parse failures carry a reason") {
    std::string error;
    CHECK(!event_from_jsonl("not json", error));
    CHECK(!error.empty());
    CHECK(!event_from_jsonl("{\"request_id\": \"r1\"}", error));
    CHECK(!error.empty());
    CHECK(!event_from_jsonl(R"({"schema_version":1,"request_id":"r","operation":"OP",
        "provider":"p","region":"US","start_time":0,"end_time":1,"latency_ms":1,
        "timeout":false,"retry_count":0,"circuit_state":"bogus","transport":{"kind":"success"},
        "business":{"kind":"completed"},"cost":0,"factor_list_version":"v","trace_id":"t"})",
                            error));
}

TEST_CASE("cost quantization keeps six fractional digits") {
    CHECK(quantize_cost(0.1234567) == doctest::Approx(0.123457).epsilon(1e-12));
    CHECK(quantize_cost(-1.0) == 0.0);
    CHECK(quantize_cost(0.0000004) == 0.0);
}

TEST_CASE("fnv1a64 is the stated stable hash") {
    // Reference values for the 64-bit FNV-1a offset basis and prime.
    CHECK(fnv1a64("") == 14695981039346656037ULL);
    CHECK(fnv1a64("a") == 12638187200555641996ULL);
}

}  // TEST_SUITE
