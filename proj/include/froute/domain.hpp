#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace froute {

/// Milliseconds since Unix epoch. Simulations use a virtual clock with the
/// same unit, starting at 0.
using Millis = std::int64_t;

/// Stable 64-bit FNV-1a. Used wherever reproducibility across runs matters
/// (ramp membership, tie-break draws).
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// Quantize an abstract cost value to 6 fractional digits.
double quantize_cost(double raw);

/// Operation identifier, e.g. "SEND_SMS". Uppercase-with-underscore token.
struct OperationId {
    std::string name;

    auto operator<=>(const OperationId&) const = default;
    [[nodiscard]] bool valid() const noexcept;
};

/// Provider identifier. Lexicographic order is the deterministic tie-break
/// order.
struct ProviderId {
    std::string name;

    auto operator<=>(const ProviderId&) const = default;
    [[nodiscard]] bool valid() const noexcept { return !name.empty(); }
};

enum class TrafficClass : std::uint8_t { interactive, background, recovery };

/// Per-request attributes the router may consult.
struct RequestContext {
    std::string request_id;
    OperationId operation;
    std::string region;
    std::optional<std::string> tenant;
    TrafficClass traffic_class = TrafficClass::interactive;
    std::optional<std::string> user_key;  // stickiness key
    int priority = 0;
    Millis timestamp = 0;
};

enum class TransportKind : std::uint8_t {
    success,
    timeout,
    rate_limited,
    server_error,
    client_error,
    connection_error,
};

struct TransportOutcome {
    TransportKind kind = TransportKind::success;
    std::optional<int> status_code;
    std::optional<std::string> error_category;

    bool operator==(const TransportOutcome&) const = default;
};

enum class BusinessKind : std::uint8_t {
    accepted,
    delivered,
    completed,
    authorized,
    declined,
    failed,
    unknown,
};

struct BusinessOutcome {
    BusinessKind kind = BusinessKind::unknown;

    bool operator==(const BusinessOutcome&) const = default;
};

enum class CircuitState : std::uint8_t { closed, open, half_open };

/// Three-level outcome taxonomy. Workflow success is the user-visible
/// success state; attempt success is transport-level only.
enum class OutcomeClass : std::uint8_t {
    attempt_success,
    workflow_success,
    attempt_failure,
};

/// One structured record per provider attempt.
struct AttemptEvent {
    int schema_version = 1;
    std::string request_id;
    OperationId operation;
    ProviderId provider;
    std::string region;
    std::optional<std::string> tenant;
    Millis start_time = 0;
    Millis end_time = 0;
    double latency_ms = 0;
    bool timeout = false;
    int retry_count = 0;
    CircuitState circuit_state = CircuitState::closed;
    TransportOutcome transport;
    BusinessOutcome business;
    double cost = 0;  // abstract units, 6 fractional digits
    std::string factor_list_version;
    std::string trace_id;

    bool operator==(const AttemptEvent&) const = default;
};

[[nodiscard]] bool is_workflow_success(BusinessKind kind) noexcept;

/// Total, deterministic outcome classification.
OutcomeClass classify_outcome(const TransportOutcome& transport,
                              const BusinessOutcome& business) noexcept;

/// Returns every violated AttemptEvent invariant; empty means ok.
std::vector<std::string> validate_event(const AttemptEvent& event);

// Enum <-> token conversions used by the JSONL formats.
std::string_view to_string(TrafficClass v) noexcept;
std::string_view to_string(TransportKind v) noexcept;
std::string_view to_string(BusinessKind v) noexcept;
std::string_view to_string(CircuitState v) noexcept;
std::string_view to_string(OutcomeClass v) noexcept;
std::optional<TrafficClass> traffic_class_from(std::string_view s) noexcept;
std::optional<TransportKind> transport_kind_from(std::string_view s) noexcept;
std::optional<BusinessKind> business_kind_from(std::string_view s) noexcept;
std::optional<CircuitState> circuit_state_from(std::string_view s) noexcept;

/// Canonical JSONL serialization of one event (no trailing newline).
std::string event_to_jsonl(const AttemptEvent& event);

/// Parse one JSONL line. On failure returns nullopt and sets `error`.
std::optional<AttemptEvent> event_from_jsonl(std::string_view line,
                                             std::string& error);

}  // namespace froute

template <>
struct std::hash<froute::OperationId> {
    std::size_t operator()(const froute::OperationId& id) const noexcept {
        return std::hash<std::string>{}(id.name);
    }
};

template <>
struct std::hash<froute::ProviderId> {
    std::size_t operator()(const froute::ProviderId& id) const noexcept {
        return std::hash<std::string>{}(id.name);
    }
};
