#include "froute/domain.hpp"

#include <array>
#include <cctype>
#include <cmath>

#include "json.hpp"

namespace froute {

using ordered_json = nlohmann::ordered_json;

double quantize_cost(double raw) {
    if (!(raw >= 0)) return 0;
    return std::round(raw * 1e6) / 1e6;
}

bool OperationId::valid() const noexcept {
    if (name.empty()) return false;
    if (!std::isupper(static_cast<unsigned char>(name.front()))) return false;
    for (unsigned char c : name) {
        if (!(std::isupper(c) || std::isdigit(c) || c == '_')) return false;
    }
    return true;
}

bool is_workflow_success(BusinessKind kind) noexcept {
    return kind == BusinessKind::completed || kind == BusinessKind::authorized ||
           kind == BusinessKind::delivered;
}

OutcomeClass classify_outcome(const TransportOutcome& transport,
                              const BusinessOutcome& business) noexcept {
    if (is_workflow_success(business.kind)) return OutcomeClass::workflow_success;
    if (transport.kind == TransportKind::success) return OutcomeClass::attempt_success;
    return OutcomeClass::attempt_failure;
}

std::vector<std::string> validate_event(const AttemptEvent& e) {
    std::vector<std::string> violations;
    if (e.schema_version < 1) violations.emplace_back("schema_version must be >= 1");
    if (e.request_id.empty()) violations.emplace_back("request_id empty");
    if (!e.operation.valid()) violations.emplace_back("operation not a valid token");
    if (!e.provider.valid()) violations.emplace_back("provider empty");
    if (e.region.empty()) violations.emplace_back("region empty");
    if (e.end_time < e.start_time) violations.emplace_back("time order: end_time < start_time");
    if (e.latency_ms != static_cast<double>(e.end_time - e.start_time))
        violations.emplace_back("latency_ms != end_time - start_time");
    if (e.latency_ms < 0) violations.emplace_back("latency_ms negative");
    if (e.retry_count < 0) violations.emplace_back("retry_count negative");
    if (e.timeout && e.transport.kind != TransportKind::timeout)
        violations.emplace_back("timeout consistency: timeout=true requires transport timeout");
    if (e.transport.kind == TransportKind::timeout && e.transport.status_code.has_value())
        violations.emplace_back("timeout implies no status_code");
    if (e.cost < 0) violations.emplace_back("cost negative");
    return violations;
}

namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names,
                           std::string_view s) noexcept {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

constexpr std::array<std::string_view, 3> kTrafficClassNames{"interactive", "background",
                                                             "recovery"};
constexpr std::array<std::string_view, 6> kTransportNames{
    "success", "timeout", "rate_limited", "server_error", "client_error", "connection_error"};
constexpr std::array<std::string_view, 7> kBusinessNames{
    "accepted", "delivered", "completed", "authorized", "declined", "failed", "unknown"};
constexpr std::array<std::string_view, 3> kCircuitNames{"closed", "open", "half_open"};
constexpr std::array<std::string_view, 3> kOutcomeNames{"attempt_success", "workflow_success",
                                                        "attempt_failure"};

}  // namespace

std::string_view to_string(TrafficClass v) noexcept {
    return kTrafficClassNames[static_cast<std::size_t>(v)];
}
std::string_view to_string(TransportKind v) noexcept {
    return kTransportNames[static_cast<std::size_t>(v)];
}
std::string_view to_string(BusinessKind v) noexcept {
    return kBusinessNames[static_cast<std::size_t>(v)];
}
std::string_view to_string(CircuitState v) noexcept {
    return kCircuitNames[static_cast<std::size_t>(v)];
}
std::string_view to_string(OutcomeClass v) noexcept {
    return kOutcomeNames[static_cast<std::size_t>(v)];
}

std::optional<TrafficClass> traffic_class_from(std::string_view s) noexcept {
    return lookup<TrafficClass>(kTrafficClassNames, s);
}
std::optional<TransportKind> transport_kind_from(std::string_view s) noexcept {
    return lookup<TransportKind>(kTransportNames, s);
}
std::optional<BusinessKind> business_kind_from(std::string_view s) noexcept {
    return lookup<BusinessKind>(kBusinessNames, s);
}
std::optional<CircuitState> circuit_state_from(std::string_view s) noexcept {
    return lookup<CircuitState>(kCircuitNames, s);
}

std::string event_to_jsonl(const AttemptEvent& e) {
    ordered_json j;
    j["schema_version"] = e.schema_version;
    j["request_id"] = e.request_id;
    j["operation"] = e.operation.name;
    j["provider"] = e.provider.name;
    j["region"] = e.region;
    if (e.tenant) j["tenant"] = *e.tenant;
    j["start_time"] = e.start_time;
    j["end_time"] = e.end_time;
    j["latency_ms"] = e.latency_ms;
    j["timeout"] = e.timeout;
    j["retry_count"] = e.retry_count;
    j["circuit_state"] = to_string(e.circuit_state);
    ordered_json transport;
    transport["kind"] = to_string(e.transport.kind);
    if (e.transport.status_code) transport["status_code"] = *e.transport.status_code;
    if (e.transport.error_category) transport["error_category"] = *e.transport.error_category;
    j["transport"] = std::move(transport);
    j["business"] = ordered_json{{"kind", to_string(e.business.kind)}};
    j["cost"] = e.cost;
    j["factor_list_version"] = e.factor_list_version;
    j["trace_id"] = e.trace_id;
    return j.dump();
}

std::optional<AttemptEvent> event_from_jsonl(std::string_view line, std::string& error) {
    error.clear();
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        error = "not a JSON object";
        return std::nullopt;
    }
    AttemptEvent e;
    try {
        e.schema_version = j.at("schema_version").get<int>();
        e.request_id = j.at("request_id").get<std::string>();
        e.operation.name = j.at("operation").get<std::string>();
        e.provider.name = j.at("provider").get<std::string>();
        e.region = j.at("region").get<std::string>();
        if (j.contains("tenant") && !j["tenant"].is_null())
            e.tenant = j["tenant"].get<std::string>();
        e.start_time = j.at("start_time").get<Millis>();
        e.end_time = j.at("end_time").get<Millis>();
        e.latency_ms = j.at("latency_ms").get<double>();
        e.timeout = j.at("timeout").get<bool>();
        e.retry_count = j.at("retry_count").get<int>();
        auto circuit = circuit_state_from(j.at("circuit_state").get<std::string>());
        if (!circuit) {
            error = "unknown circuit_state";
            return std::nullopt;
        }
        e.circuit_state = *circuit;
        const auto& t = j.at("transport");
        auto tk = transport_kind_from(t.at("kind").get<std::string>());
        if (!tk) {
            error = "unknown transport kind";
            return std::nullopt;
        }
        e.transport.kind = *tk;
        if (t.contains("status_code") && !t["status_code"].is_null())
            e.transport.status_code = t["status_code"].get<int>();
        if (t.contains("error_category") && !t["error_category"].is_null())
            e.transport.error_category = t["error_category"].get<std::string>();
        auto bk = business_kind_from(j.at("business").at("kind").get<std::string>());
        if (!bk) {
            error = "unknown business kind";
            return std::nullopt;
        }
        e.business.kind = *bk;
        e.cost = j.at("cost").get<double>();
        e.factor_list_version = j.at("factor_list_version").get<std::string>();
        e.trace_id = j.at("trace_id").get<std::string>();
    } catch (const ordered_json::exception& ex) {
        error = ex.what();
        return std::nullopt;
    }
    return e;
}

}  // namespace froute
