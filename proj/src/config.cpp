#include "froute/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include "json.hpp"

namespace froute {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr double kWeightSumTolerance = 1e-9;

constexpr std::array<std::string_view, 7> kGateNames{
    "circuit_closed",     "region_supported",    "quota_available", "provider_enabled",
    "compliance_allowed", "maintenance_inactive", "min_samples_met"};
constexpr std::array<std::string_view, 5> kFactorNames{
    "completion_rate", "latency_p95", "latency_p99", "cost", "incident_penalty"};
constexpr std::array<std::string_view, 2> kOrientationNames{"higher_is_better",
                                                            "lower_is_better"};
constexpr std::array<std::string_view, 4> kTieBreakNames{
    "sticky_then_lexicographic", "weighted_random", "priority_order", "lru"};
constexpr std::array<std::string_view, 4> kFallbackNames{"typed_error", "enqueue_retry",
                                                         "alternate_channel", "shed"};
constexpr std::array<std::string_view, 2> kStalePolicyNames{"prefer_default",
                                                            "hold_last_ranking"};
constexpr std::array<std::string_view, 4> kRetryPolicyNames{"none", "same_provider",
                                                            "alternate_provider", "hedged"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names,
                           std::string_view s) noexcept {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

}  // namespace

std::string_view to_string(GateKind v) noexcept { return kGateNames[static_cast<size_t>(v)]; }
std::string_view to_string(ScoreFactorKind v) noexcept {
    return kFactorNames[static_cast<size_t>(v)];
}
std::string_view to_string(Orientation v) noexcept {
    return kOrientationNames[static_cast<size_t>(v)];
}
std::string_view to_string(TieBreakRule v) noexcept {
    return kTieBreakNames[static_cast<size_t>(v)];
}
std::string_view to_string(FallbackKind v) noexcept {
    return kFallbackNames[static_cast<size_t>(v)];
}
std::string_view to_string(StaleMetricPolicy v) noexcept {
    return kStalePolicyNames[static_cast<size_t>(v)];
}
std::string_view to_string(RetryPolicy v) noexcept {
    return kRetryPolicyNames[static_cast<size_t>(v)];
}

std::optional<GateKind> gate_kind_from(std::string_view s) noexcept {
    return lookup<GateKind>(kGateNames, s);
}
std::optional<ScoreFactorKind> score_factor_kind_from(std::string_view s) noexcept {
    return lookup<ScoreFactorKind>(kFactorNames, s);
}
std::optional<TieBreakRule> tie_break_rule_from(std::string_view s) noexcept {
    return lookup<TieBreakRule>(kTieBreakNames, s);
}
std::optional<FallbackKind> fallback_kind_from(std::string_view s) noexcept {
    return lookup<FallbackKind>(kFallbackNames, s);
}
std::optional<StaleMetricPolicy> stale_metric_policy_from(std::string_view s) noexcept {
    return lookup<StaleMetricPolicy>(kStalePolicyNames, s);
}
std::optional<RetryPolicy> retry_policy_from(std::string_view s) noexcept {
    return lookup<RetryPolicy>(kRetryPolicyNames, s);
}

Orientation default_orientation(ScoreFactorKind kind) noexcept {
    return kind == ScoreFactorKind::completion_rate ? Orientation::higher_is_better
                                                    : Orientation::lower_is_better;
}

bool ProviderConfig::supports_region(const std::string& region) const {
    if (!has_supported_regions) return true;  // gate validation requires the list when gated
    return std::find(supported_regions.begin(), supported_regions.end(), region) !=
           supported_regions.end();
}

bool ProviderConfig::in_maintenance(Millis now) const {
    for (const auto& w : maintenance) {
        if (now >= w.start_ms && now < w.end_ms) return true;
    }
    return false;
}

bool OverrideScope::matches(const RequestContext& ctx) const {
    if (region && *region != ctx.region) return false;
    if (tenant && (!ctx.tenant || *tenant != *ctx.tenant)) return false;
    if (traffic_class && *traffic_class != ctx.traffic_class) return false;
    return true;
}

bool ControlPatch::empty() const {
    return !hysteresis_delta && !cooldown_ms && !sustained_windows_required &&
           !min_sample_count && !default_provider && !fallback && !tie_break &&
           !stale_metric_policy && !stale_after_ms && !retry_policy;
}

void ControlPatch::apply(ControlParams& c) const {
    if (hysteresis_delta) c.hysteresis_delta = *hysteresis_delta;
    if (cooldown_ms) c.cooldown_ms = *cooldown_ms;
    if (sustained_windows_required) c.sustained_windows_required = *sustained_windows_required;
    if (min_sample_count) c.min_sample_count = *min_sample_count;
    if (default_provider) c.default_provider = *default_provider;
    if (fallback) c.fallback = *fallback;
    if (tie_break) c.tie_break = *tie_break;
    if (stale_metric_policy) c.stale_metric_policy = *stale_metric_policy;
    if (stale_after_ms) c.stale_after_ms = *stale_after_ms;
    if (retry_policy) c.retry_policy = *retry_policy;
}

const ProviderConfig* FactorList::find_provider(const ProviderId& id) const {
    for (const auto& p : providers) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

const ScoreFactorSpec* FactorList::find_score(ScoreFactorKind kind) const {
    for (const auto& s : scores) {
        if (s.kind == kind) return &s;
    }
    return nullptr;
}

bool FactorList::has_emergency_override() const {
    return std::any_of(overrides.begin(), overrides.end(),
                       [](const OverrideSpec& o) { return o.emergency; });
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

struct ParseFailure {
    std::string message;
    int line = -1;
    int column = -1;
};

[[noreturn]] void fail(const YAML::Node& node, std::string message) {
    ParseFailure f;
    f.message = std::move(message);
    if (node.Mark().line >= 0) {
        f.line = node.Mark().line + 1;
        f.column = node.Mark().column + 1;
    }
    throw f;
}

void require_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                  const char* where) {
    if (!node.IsMap()) fail(node, std::string(where) + " must be a map");
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            fail(kv.first, "unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
T scalar(const YAML::Node& node, const char* what) {
    if (!node.IsScalar()) fail(node, std::string(what) + " must be a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail(node, std::string("cannot parse ") + what);
    }
}

std::vector<std::string> string_list(const YAML::Node& node, const char* what) {
    if (!node.IsSequence()) fail(node, std::string(what) + " must be a list");
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(scalar<std::string>(item, what));
    return out;
}

ProviderConfig parse_provider(const YAML::Node& node) {
    require_keys(node,
                 {"id", "supported_regions", "enabled", "static_cost", "priority", "maintenance",
                  "compliance_denied_regions", "compliance_denied_tenants", "quota", "rate_limit"},
                 "provider");
    ProviderConfig p;
    if (!node["id"]) fail(node, "provider missing 'id'");
    p.id.name = scalar<std::string>(node["id"], "provider id");
    if (node["supported_regions"]) {
        p.supported_regions = string_list(node["supported_regions"], "supported_regions");
        p.has_supported_regions = true;
    }
    if (node["enabled"]) p.enabled = scalar<bool>(node["enabled"], "enabled");
    if (node["static_cost"]) p.static_cost = scalar<double>(node["static_cost"], "static_cost");
    if (node["priority"]) p.priority = scalar<int>(node["priority"], "priority");
    if (node["maintenance"]) {
        for (const auto& w : node["maintenance"]) {
            require_keys(w, {"start_ms", "end_ms"}, "maintenance window");
            MaintenanceWindow mw;
            mw.start_ms = scalar<Millis>(w["start_ms"], "start_ms");
            mw.end_ms = scalar<Millis>(w["end_ms"], "end_ms");
            p.maintenance.push_back(mw);
        }
    }
    if (node["compliance_denied_regions"])
        p.compliance_denied_regions =
            string_list(node["compliance_denied_regions"], "compliance_denied_regions");
    if (node["compliance_denied_tenants"])
        p.compliance_denied_tenants =
            string_list(node["compliance_denied_tenants"], "compliance_denied_tenants");
    if (node["quota"]) {
        require_keys(node["quota"], {"limit", "window_ms"}, "quota");
        QuotaConfig q;
        q.limit = scalar<long long>(node["quota"]["limit"], "quota limit");
        if (node["quota"]["window_ms"])
            q.window_ms = scalar<Millis>(node["quota"]["window_ms"], "quota window_ms");
        p.quota = q;
    }
    if (node["rate_limit"]) {
        require_keys(node["rate_limit"], {"rate_per_s", "burst"}, "rate_limit");
        RateLimitConfig r;
        r.rate_per_s = scalar<double>(node["rate_limit"]["rate_per_s"], "rate_per_s");
        r.burst = scalar<double>(node["rate_limit"]["burst"], "burst");
        p.rate_limit = r;
    }
    return p;
}

GateSpec parse_gate(const YAML::Node& node) {
    GateSpec g;
    if (node.IsScalar()) {
        auto name = node.as<std::string>();
        auto kind = gate_kind_from(name);
        if (!kind) fail(node, "unknown gate '" + name + "'");
        g.kind = *kind;
        return g;
    }
    require_keys(node, {"name", "params"}, "gate");
    if (!node["name"]) fail(node, "gate missing 'name'");
    auto name = scalar<std::string>(node["name"], "gate name");
    auto kind = gate_kind_from(name);
    if (!kind) fail(node, "unknown gate '" + name + "'");
    g.kind = *kind;
    if (node["params"]) {
        if (!node["params"].IsMap()) fail(node["params"], "gate params must be a map");
        for (const auto& kv : node["params"]) {
            g.params[kv.first.as<std::string>()] = kv.second.as<std::string>();
        }
    }
    return g;
}

ScoreFactorSpec parse_score(const YAML::Node& node) {
    require_keys(node,
                 {"factor", "weight", "orientation", "lower_bound", "upper_bound",
                  "default_value"},
                 "score factor");
    ScoreFactorSpec s;
    if (!node["factor"]) fail(node, "score factor missing 'factor'");
    auto name = scalar<std::string>(node["factor"], "factor name");
    auto kind = score_factor_kind_from(name);
    if (!kind) fail(node["factor"], "unknown score factor '" + name + "'");
    s.kind = *kind;
    if (!node["weight"]) fail(node, "score factor missing 'weight'");
    s.weight = scalar<double>(node["weight"], "weight");
    s.orientation = default_orientation(s.kind);
    if (node["orientation"]) {
        auto o = scalar<std::string>(node["orientation"], "orientation");
        auto parsed = lookup<Orientation>(kOrientationNames, o);
        if (!parsed) fail(node["orientation"], "unknown orientation '" + o + "'");
        s.orientation = *parsed;
    }
    if (node["lower_bound"]) s.lower_bound = scalar<double>(node["lower_bound"], "lower_bound");
    if (node["upper_bound"]) s.upper_bound = scalar<double>(node["upper_bound"], "upper_bound");
    if (node["default_value"])
        s.default_value = scalar<double>(node["default_value"], "default_value");
    return s;
}

ControlParams parse_control(const YAML::Node& node, const char* where) {
    require_keys(node,
                 {"metric_refresh_interval_ms", "min_sample_count", "cooldown_ms",
                  "hysteresis_delta", "sustained_windows_required", "circuit_failure_threshold",
                  "circuit_min_samples", "circuit_open_ms", "half_open_probe_budget", "tie_break",
                  "default_provider", "fallback", "stale_metric_policy", "stale_after_ms",
                  "circuit_window_size", "probe_successes_to_close", "retry_policy",
                  "retry_max_attempts", "retry_budget_per_window", "retry_budget_window_ms",
                  "idempotent", "timeout_interactive_ms", "timeout_background_ms",
                  "throttle_ttl_ms", "bulkhead_capacity"},
                 where);
    ControlParams c;
    auto get_enum = [&](const char* key, auto parser, auto& out) {
        if (!node[key]) return;
        auto s = scalar<std::string>(node[key], key);
        auto v = parser(s);
        if (!v) fail(node[key], std::string("unknown value '") + s + "' for " + key);
        out = *v;
    };
    if (node["metric_refresh_interval_ms"])
        c.metric_refresh_interval_ms =
            scalar<Millis>(node["metric_refresh_interval_ms"], "metric_refresh_interval_ms");
    if (node["min_sample_count"])
        c.min_sample_count = scalar<int>(node["min_sample_count"], "min_sample_count");
    if (node["cooldown_ms"]) c.cooldown_ms = scalar<Millis>(node["cooldown_ms"], "cooldown_ms");
    if (node["hysteresis_delta"])
        c.hysteresis_delta = scalar<double>(node["hysteresis_delta"], "hysteresis_delta");
    if (node["sustained_windows_required"])
        c.sustained_windows_required =
            scalar<int>(node["sustained_windows_required"], "sustained_windows_required");
    if (node["circuit_failure_threshold"])
        c.circuit_failure_threshold =
            scalar<double>(node["circuit_failure_threshold"], "circuit_failure_threshold");
    if (node["circuit_min_samples"])
        c.circuit_min_samples = scalar<int>(node["circuit_min_samples"], "circuit_min_samples");
    if (node["circuit_open_ms"])
        c.circuit_open_ms = scalar<Millis>(node["circuit_open_ms"], "circuit_open_ms");
    if (node["half_open_probe_budget"])
        c.half_open_probe_budget =
            scalar<int>(node["half_open_probe_budget"], "half_open_probe_budget");
    get_enum("tie_break", tie_break_rule_from, c.tie_break);
    if (node["default_provider"])
        c.default_provider.name = scalar<std::string>(node["default_provider"], "default_provider");
    get_enum("fallback", fallback_kind_from, c.fallback);
    get_enum("stale_metric_policy", stale_metric_policy_from, c.stale_metric_policy);
    if (node["stale_after_ms"])
        c.stale_after_ms = scalar<Millis>(node["stale_after_ms"], "stale_after_ms");
    if (node["circuit_window_size"])
        c.circuit_window_size = scalar<int>(node["circuit_window_size"], "circuit_window_size");
    if (node["probe_successes_to_close"])
        c.probe_successes_to_close =
            scalar<int>(node["probe_successes_to_close"], "probe_successes_to_close");
    get_enum("retry_policy", retry_policy_from, c.retry_policy);
    if (node["retry_max_attempts"])
        c.retry_max_attempts = scalar<int>(node["retry_max_attempts"], "retry_max_attempts");
    if (node["retry_budget_per_window"])
        c.retry_budget_per_window =
            scalar<int>(node["retry_budget_per_window"], "retry_budget_per_window");
    if (node["retry_budget_window_ms"])
        c.retry_budget_window_ms =
            scalar<Millis>(node["retry_budget_window_ms"], "retry_budget_window_ms");
    if (node["idempotent"]) c.idempotent = scalar<bool>(node["idempotent"], "idempotent");
    if (node["timeout_interactive_ms"])
        c.timeout_interactive_ms =
            scalar<Millis>(node["timeout_interactive_ms"], "timeout_interactive_ms");
    if (node["timeout_background_ms"])
        c.timeout_background_ms =
            scalar<Millis>(node["timeout_background_ms"], "timeout_background_ms");
    if (node["throttle_ttl_ms"])
        c.throttle_ttl_ms = scalar<Millis>(node["throttle_ttl_ms"], "throttle_ttl_ms");
    if (node["bulkhead_capacity"])
        c.bulkhead_capacity = scalar<int>(node["bulkhead_capacity"], "bulkhead_capacity");
    return c;
}

OverrideSpec parse_override(const YAML::Node& node) {
    require_keys(node, {"scope", "patch", "ramp_fraction", "emergency"}, "override");
    OverrideSpec o;
    if (!node["scope"]) fail(node, "override missing 'scope'");
    require_keys(node["scope"], {"region", "tenant", "traffic_class"}, "override scope");
    const auto& scope = node["scope"];
    if (scope["region"]) o.scope.region = scalar<std::string>(scope["region"], "scope region");
    if (scope["tenant"]) o.scope.tenant = scalar<std::string>(scope["tenant"], "scope tenant");
    if (scope["traffic_class"]) {
        auto s = scalar<std::string>(scope["traffic_class"], "scope traffic_class");
        auto tc = traffic_class_from(s);
        if (!tc) fail(scope["traffic_class"], "unknown traffic_class '" + s + "'");
        o.scope.traffic_class = *tc;
    }
    if (node["ramp_fraction"])
        o.ramp_fraction = scalar<double>(node["ramp_fraction"], "ramp_fraction");
    if (node["emergency"]) o.emergency = scalar<bool>(node["emergency"], "emergency");
    if (!node["patch"]) fail(node, "override missing 'patch'");
    require_keys(node["patch"], {"providers", "weights", "control"}, "override patch");
    const auto& patch = node["patch"];
    if (patch["providers"]) {
        if (!patch["providers"].IsMap()) fail(patch["providers"], "patch providers must be a map");
        for (const auto& kv : patch["providers"]) {
            require_keys(kv.second, {"enabled"}, "provider patch");
            if (!kv.second["enabled"]) fail(kv.second, "provider patch requires 'enabled'");
            o.patch.provider_enabled.emplace_back(
                ProviderId{kv.first.as<std::string>()},
                scalar<bool>(kv.second["enabled"], "enabled"));
        }
    }
    if (patch["weights"]) {
        if (!patch["weights"].IsMap()) fail(patch["weights"], "patch weights must be a map");
        std::vector<std::pair<ScoreFactorKind, double>> w;
        for (const auto& kv : patch["weights"]) {
            auto name = kv.first.as<std::string>();
            auto kind = score_factor_kind_from(name);
            if (!kind) fail(kv.first, "unknown score factor '" + name + "' in weights patch");
            w.emplace_back(*kind, scalar<double>(kv.second, "weight"));
        }
        o.patch.weights = std::move(w);
    }
    if (patch["control"]) {
        require_keys(patch["control"],
                     {"hysteresis_delta", "cooldown_ms", "sustained_windows_required",
                      "min_sample_count", "default_provider", "fallback", "tie_break",
                      "stale_metric_policy", "stale_after_ms", "retry_policy"},
                     "control patch");
        const auto& cp = patch["control"];
        auto& out = o.patch.control;
        if (cp["hysteresis_delta"])
            out.hysteresis_delta = scalar<double>(cp["hysteresis_delta"], "hysteresis_delta");
        if (cp["cooldown_ms"]) out.cooldown_ms = scalar<Millis>(cp["cooldown_ms"], "cooldown_ms");
        if (cp["sustained_windows_required"])
            out.sustained_windows_required =
                scalar<int>(cp["sustained_windows_required"], "sustained_windows_required");
        if (cp["min_sample_count"])
            out.min_sample_count = scalar<int>(cp["min_sample_count"], "min_sample_count");
        if (cp["default_provider"])
            out.default_provider =
                ProviderId{scalar<std::string>(cp["default_provider"], "default_provider")};
        if (cp["fallback"]) {
            auto s = scalar<std::string>(cp["fallback"], "fallback");
            auto v = fallback_kind_from(s);
            if (!v) fail(cp["fallback"], "unknown fallback '" + s + "'");
            out.fallback = *v;
        }
        if (cp["tie_break"]) {
            auto s = scalar<std::string>(cp["tie_break"], "tie_break");
            auto v = tie_break_rule_from(s);
            if (!v) fail(cp["tie_break"], "unknown tie_break '" + s + "'");
            out.tie_break = *v;
        }
        if (cp["stale_metric_policy"]) {
            auto s = scalar<std::string>(cp["stale_metric_policy"], "stale_metric_policy");
            auto v = stale_metric_policy_from(s);
            if (!v) fail(cp["stale_metric_policy"], "unknown stale_metric_policy '" + s + "'");
            out.stale_metric_policy = *v;
        }
        if (cp["stale_after_ms"])
            out.stale_after_ms = scalar<Millis>(cp["stale_after_ms"], "stale_after_ms");
        if (cp["retry_policy"]) {
            auto s = scalar<std::string>(cp["retry_policy"], "retry_policy");
            auto v = retry_policy_from(s);
            if (!v) fail(cp["retry_policy"], "unknown retry_policy '" + s + "'");
            out.retry_policy = *v;
        }
    }
    return o;
}

FactorList parse_root(const YAML::Node& root) {
    if (!root.IsMap()) fail(root, "document must be a map");
    require_keys(root, {"operation", "version", "providers", "gates", "scores", "control",
                        "overrides"},
                 "factor list");
    FactorList fl;
    if (!root["operation"]) fail(root, "missing 'operation'");
    fl.operation.name = scalar<std::string>(root["operation"], "operation");
    if (root["version"]) fl.declared_version = scalar<std::string>(root["version"], "version");
    if (!root["providers"]) fail(root, "missing 'providers'");
    if (!root["providers"].IsSequence()) fail(root["providers"], "providers must be a list");
    for (const auto& p : root["providers"]) fl.providers.push_back(parse_provider(p));
    if (root["gates"]) {
        if (!root["gates"].IsSequence()) fail(root["gates"], "gates must be a list");
        for (const auto& g : root["gates"]) fl.gates.push_back(parse_gate(g));
    }
    if (!root["scores"]) fail(root, "missing 'scores'");
    if (!root["scores"].IsSequence()) fail(root["scores"], "scores must be a list");
    for (const auto& s : root["scores"]) fl.scores.push_back(parse_score(s));
    if (root["control"]) {
        fl.control = parse_control(root["control"], "control");
    }
    if (fl.control.default_provider.name.empty() && !fl.providers.empty()) {
        fl.control.default_provider = fl.providers.front().id;
    }
    if (root["overrides"]) {
        if (!root["overrides"].IsSequence()) fail(root["overrides"], "overrides must be a list");
        for (const auto& o : root["overrides"]) fl.overrides.push_back(parse_override(o));
    }
    fl.version = compute_version_id(fl);
    return fl;
}

}  // namespace

Parsed<FactorList> parse_factor_list(const std::string& text) {
    Parsed<FactorList> result;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& ex) {
        result.error = std::string("syntax error: ") + ex.msg;
        result.line = ex.mark.line + 1;
        result.column = ex.mark.column + 1;
        return result;
    }
    if (root.IsNull() || !root.IsDefined()) {
        result.error = "empty document";
        return result;
    }
    try {
        result.value = parse_root(root);
    } catch (const ParseFailure& f) {
        result.error = f.message;
        result.line = f.line;
        result.column = f.column;
    } catch (const YAML::Exception& ex) {
        result.error = ex.msg;
        result.line = ex.mark.line + 1;
        result.column = ex.mark.column + 1;
    }
    return result;
}

Parsed<FactorList> load_factor_list_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        Parsed<FactorList> result;
        result.error = "cannot open file: " + path;
        return result;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_factor_list(buf.str());
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<std::string> validate_factor_list(const FactorList& fl) {
    std::vector<std::string> v;
    auto add = [&](std::string msg) { v.push_back(std::move(msg)); };

    if (!fl.operation.valid())
        add("operation must be a non-empty uppercase token");
    if (fl.providers.empty()) add("providers must be non-empty");
    std::set<ProviderId> seen;
    for (const auto& p : fl.providers) {
        if (!p.id.valid()) add("provider id empty");
        if (!seen.insert(p.id).second) add("duplicate provider '" + p.id.name + "'");
        if (p.static_cost < 0) add("provider '" + p.id.name + "' static_cost negative");
        if (p.priority < 0) add("provider '" + p.id.name + "' priority negative");
        for (const auto& w : p.maintenance) {
            if (w.start_ms >= w.end_ms)
                add("provider '" + p.id.name + "' maintenance window start >= end");
        }
        if (p.quota && (p.quota->limit < 1 || p.quota->window_ms <= 0))
            add("provider '" + p.id.name + "' quota requires limit >= 1 and window_ms > 0");
        if (p.rate_limit && (p.rate_limit->rate_per_s <= 0 || p.rate_limit->burst < 1))
            add("provider '" + p.id.name + "' rate_limit requires rate > 0 and burst >= 1");
    }

    if (fl.scores.empty()) add("scores must be non-empty");
    double weight_sum = 0;
    std::set<ScoreFactorKind> factor_seen;
    for (const auto& s : fl.scores) {
        if (!factor_seen.insert(s.kind).second)
            add(std::string("duplicate score factor '") + std::string(to_string(s.kind)) + "'");
        if (s.weight < 0 || s.weight > 1)
            add(std::string("weight for '") + std::string(to_string(s.kind)) +
                "' must be in [0,1]");
        weight_sum += s.weight;
        if (s.lower_bound && s.upper_bound && !(*s.lower_bound < *s.upper_bound))
            add(std::string("bounds for '") + std::string(to_string(s.kind)) +
                "' require lower < upper");
        if (s.orientation == Orientation::lower_is_better &&
            s.kind != ScoreFactorKind::incident_penalty &&
            (!s.lower_bound || !s.upper_bound))
            add(std::string("lower_is_better factor '") + std::string(to_string(s.kind)) +
                "' requires lower_bound and upper_bound");
        if (s.default_value < 0 || s.default_value > 1)
            add(std::string("default_value for '") + std::string(to_string(s.kind)) +
                "' must be in [0,1]");
    }
    if (!fl.scores.empty() && std::abs(weight_sum - 1.0) > kWeightSumTolerance)
        add("weights must sum to 1");

    const auto& c = fl.control;
    if (c.metric_refresh_interval_ms <= 0) add("metric_refresh_interval_ms must be > 0");
    if (c.min_sample_count < 1) add("min_sample_count must be >= 1");
    if (c.cooldown_ms < 0) add("cooldown_ms must be >= 0");
    if (c.hysteresis_delta < 0 || c.hysteresis_delta > 1)
        add("hysteresis_delta must be in [0,1]");
    if (c.sustained_windows_required < 1) add("sustained_windows_required must be >= 1");
    if (!(c.circuit_failure_threshold > 0) || c.circuit_failure_threshold > 1)
        add("circuit_failure_threshold must be in (0,1]");
    if (c.circuit_min_samples < 1) add("circuit_min_samples must be >= 1");
    if (c.circuit_open_ms <= 0) add("circuit_open_ms must be > 0");
    if (c.half_open_probe_budget < 1) add("half_open_probe_budget must be >= 1");
    if (c.stale_after_ms <= 0) add("stale_after_ms must be > 0");
    if (c.circuit_window_size < c.circuit_min_samples)
        add("circuit_window_size must be >= circuit_min_samples");
    if (c.probe_successes_to_close < 1) add("probe_successes_to_close must be >= 1");
    if (c.retry_policy == RetryPolicy::hedged)
        add("retry_policy 'hedged' is not implemented");
    if (c.retry_max_attempts < 0) add("retry_max_attempts must be >= 0");
    if (c.retry_budget_per_window < 0) add("retry_budget_per_window must be >= 0");
    if (c.retry_budget_window_ms <= 0) add("retry_budget_window_ms must be > 0");
    if (c.timeout_interactive_ms <= 0 || c.timeout_background_ms <= 0)
        add("timeouts must be > 0");
    if (c.throttle_ttl_ms < 0) add("throttle_ttl_ms must be >= 0");
    if (c.bulkhead_capacity < 1) add("bulkhead_capacity must be >= 1");
    if (!fl.find_provider(c.default_provider))
        add("default_provider '" + c.default_provider.name + "' not in providers");

    for (const auto& g : fl.gates) {
        if (g.kind == GateKind::region_supported) {
            for (const auto& p : fl.providers) {
                if (!p.has_supported_regions)
                    add("gate region_supported requires supported_regions on provider '" +
                        p.id.name + "'");
            }
        }
    }

    for (std::size_t i = 0; i < fl.overrides.size(); ++i) {
        const auto& o = fl.overrides[i];
        auto where = "override #" + std::to_string(i + 1);
        if (o.scope.empty()) add(where + ": scope must name at least one attribute");
        if (o.ramp_fraction && (*o.ramp_fraction < 0 || *o.ramp_fraction > 1))
            add(where + ": ramp_fraction must be in [0,1]");
        for (const auto& [id, _] : o.patch.provider_enabled) {
            if (!fl.find_provider(id))
                add(where + ": patched provider '" + id.name + "' not in providers");
        }
        if (o.patch.weights) {
            double sum = 0;
            std::set<ScoreFactorKind> patched;
            for (const auto& [kind, w] : *o.patch.weights) {
                sum += w;
                patched.insert(kind);
                if (!fl.find_score(kind))
                    add(where + ": weights patch names unconfigured factor '" +
                        std::string(to_string(kind)) + "'");
                if (w < 0 || w > 1) add(where + ": patched weight must be in [0,1]");
            }
            if (patched.size() != fl.scores.size())
                add(where + ": weights patch must name every configured factor");
            if (std::abs(sum - 1.0) > kWeightSumTolerance)
                add(where + ": patched weights must sum to 1");
        }
        const auto& cp = o.patch.control;
        if (cp.hysteresis_delta && (*cp.hysteresis_delta < 0 || *cp.hysteresis_delta > 1))
            add(where + ": patched hysteresis_delta must be in [0,1]");
        if (cp.cooldown_ms && *cp.cooldown_ms < 0)
            add(where + ": patched cooldown_ms must be >= 0");
        if (cp.sustained_windows_required && *cp.sustained_windows_required < 1)
            add(where + ": patched sustained_windows_required must be >= 1");
        if (cp.min_sample_count && *cp.min_sample_count < 1)
            add(where + ": patched min_sample_count must be >= 1");
        if (cp.stale_after_ms && *cp.stale_after_ms <= 0)
            add(where + ": patched stale_after_ms must be > 0");
        if (cp.default_provider && !fl.find_provider(*cp.default_provider))
            add(where + ": patched default_provider not in providers");
        if (cp.retry_policy && *cp.retry_policy == RetryPolicy::hedged)
            add(where + ": retry_policy 'hedged' is not implemented");
        if (o.patch.provider_enabled.empty() && !o.patch.weights && cp.empty())
            add(where + ": patch is empty");
    }
    return v;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

YAML::Emitter& operator<<(YAML::Emitter& out, const ProviderConfig& p) {
    out << YAML::BeginMap;
    out << YAML::Key << "id" << YAML::Value << p.id.name;
    if (p.has_supported_regions) {
        out << YAML::Key << "supported_regions" << YAML::Value << YAML::Flow
            << p.supported_regions;
    }
    out << YAML::Key << "enabled" << YAML::Value << p.enabled;
    out << YAML::Key << "static_cost" << YAML::Value << p.static_cost;
    out << YAML::Key << "priority" << YAML::Value << p.priority;
    if (!p.maintenance.empty()) {
        out << YAML::Key << "maintenance" << YAML::Value << YAML::BeginSeq;
        for (const auto& w : p.maintenance) {
            out << YAML::Flow << YAML::BeginMap;
            out << YAML::Key << "start_ms" << YAML::Value << w.start_ms;
            out << YAML::Key << "end_ms" << YAML::Value << w.end_ms;
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    if (!p.compliance_denied_regions.empty())
        out << YAML::Key << "compliance_denied_regions" << YAML::Value << YAML::Flow
            << p.compliance_denied_regions;
    if (!p.compliance_denied_tenants.empty())
        out << YAML::Key << "compliance_denied_tenants" << YAML::Value << YAML::Flow
            << p.compliance_denied_tenants;
    if (p.quota) {
        out << YAML::Key << "quota" << YAML::Value << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "limit" << YAML::Value << p.quota->limit;
        out << YAML::Key << "window_ms" << YAML::Value << p.quota->window_ms;
        out << YAML::EndMap;
    }
    if (p.rate_limit) {
        out << YAML::Key << "rate_limit" << YAML::Value << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "rate_per_s" << YAML::Value << p.rate_limit->rate_per_s;
        out << YAML::Key << "burst" << YAML::Value << p.rate_limit->burst;
        out << YAML::EndMap;
    }
    out << YAML::EndMap;
    return out;
}

void emit_control(YAML::Emitter& out, const ControlParams& c) {
    out << YAML::BeginMap;
    out << YAML::Key << "metric_refresh_interval_ms" << YAML::Value
        << c.metric_refresh_interval_ms;
    out << YAML::Key << "min_sample_count" << YAML::Value << c.min_sample_count;
    out << YAML::Key << "cooldown_ms" << YAML::Value << c.cooldown_ms;
    out << YAML::Key << "hysteresis_delta" << YAML::Value << c.hysteresis_delta;
    out << YAML::Key << "sustained_windows_required" << YAML::Value
        << c.sustained_windows_required;
    out << YAML::Key << "circuit_failure_threshold" << YAML::Value
        << c.circuit_failure_threshold;
    out << YAML::Key << "circuit_min_samples" << YAML::Value << c.circuit_min_samples;
    out << YAML::Key << "circuit_open_ms" << YAML::Value << c.circuit_open_ms;
    out << YAML::Key << "half_open_probe_budget" << YAML::Value << c.half_open_probe_budget;
    out << YAML::Key << "tie_break" << YAML::Value << std::string(to_string(c.tie_break));
    out << YAML::Key << "default_provider" << YAML::Value << c.default_provider.name;
    out << YAML::Key << "fallback" << YAML::Value << std::string(to_string(c.fallback));
    out << YAML::Key << "stale_metric_policy" << YAML::Value
        << std::string(to_string(c.stale_metric_policy));
    out << YAML::Key << "stale_after_ms" << YAML::Value << c.stale_after_ms;
    out << YAML::Key << "circuit_window_size" << YAML::Value << c.circuit_window_size;
    out << YAML::Key << "probe_successes_to_close" << YAML::Value << c.probe_successes_to_close;
    out << YAML::Key << "retry_policy" << YAML::Value << std::string(to_string(c.retry_policy));
    out << YAML::Key << "retry_max_attempts" << YAML::Value << c.retry_max_attempts;
    out << YAML::Key << "retry_budget_per_window" << YAML::Value << c.retry_budget_per_window;
    out << YAML::Key << "retry_budget_window_ms" << YAML::Value << c.retry_budget_window_ms;
    out << YAML::Key << "idempotent" << YAML::Value << c.idempotent;
    out << YAML::Key << "timeout_interactive_ms" << YAML::Value << c.timeout_interactive_ms;
    out << YAML::Key << "timeout_background_ms" << YAML::Value << c.timeout_background_ms;
    out << YAML::Key << "throttle_ttl_ms" << YAML::Value << c.throttle_ttl_ms;
    out << YAML::Key << "bulkhead_capacity" << YAML::Value << c.bulkhead_capacity;
    out << YAML::EndMap;
}

}  // namespace

std::string serialize_factor_list(const FactorList& fl) {
    YAML::Emitter out;
    out.SetDoublePrecision(std::numeric_limits<double>::max_digits10);
    out.SetFloatPrecision(std::numeric_limits<float>::max_digits10);
    out << YAML::BeginMap;
    out << YAML::Key << "operation" << YAML::Value << fl.operation.name;
    if (!fl.declared_version.empty())
        out << YAML::Key << "version" << YAML::Value << fl.declared_version;
    out << YAML::Key << "providers" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : fl.providers) out << p;
    out << YAML::EndSeq;
    out << YAML::Key << "gates" << YAML::Value << YAML::BeginSeq;
    for (const auto& g : fl.gates) {
        if (g.params.empty()) {
            out << std::string(to_string(g.kind));
        } else {
            out << YAML::BeginMap;
            out << YAML::Key << "name" << YAML::Value << std::string(to_string(g.kind));
            out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
            for (const auto& [k, val] : g.params) out << YAML::Key << k << YAML::Value << val;
            out << YAML::EndMap << YAML::EndMap;
        }
    }
    out << YAML::EndSeq;
    out << YAML::Key << "scores" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : fl.scores) {
        out << YAML::BeginMap;
        out << YAML::Key << "factor" << YAML::Value << std::string(to_string(s.kind));
        out << YAML::Key << "weight" << YAML::Value << s.weight;
        out << YAML::Key << "orientation" << YAML::Value << std::string(to_string(s.orientation));
        if (s.lower_bound) out << YAML::Key << "lower_bound" << YAML::Value << *s.lower_bound;
        if (s.upper_bound) out << YAML::Key << "upper_bound" << YAML::Value << *s.upper_bound;
        out << YAML::Key << "default_value" << YAML::Value << s.default_value;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "control" << YAML::Value;
    emit_control(out, fl.control);
    if (!fl.overrides.empty()) {
        out << YAML::Key << "overrides" << YAML::Value << YAML::BeginSeq;
        for (const auto& o : fl.overrides) {
            out << YAML::BeginMap;
            out << YAML::Key << "scope" << YAML::Value << YAML::BeginMap;
            if (o.scope.region) out << YAML::Key << "region" << YAML::Value << *o.scope.region;
            if (o.scope.tenant) out << YAML::Key << "tenant" << YAML::Value << *o.scope.tenant;
            if (o.scope.traffic_class)
                out << YAML::Key << "traffic_class" << YAML::Value
                    << std::string(to_string(*o.scope.traffic_class));
            out << YAML::EndMap;
            if (o.ramp_fraction)
                out << YAML::Key << "ramp_fraction" << YAML::Value << *o.ramp_fraction;
            if (o.emergency) out << YAML::Key << "emergency" << YAML::Value << true;
            out << YAML::Key << "patch" << YAML::Value << YAML::BeginMap;
            if (!o.patch.provider_enabled.empty()) {
                out << YAML::Key << "providers" << YAML::Value << YAML::BeginMap;
                for (const auto& [id, enabled] : o.patch.provider_enabled) {
                    out << YAML::Key << id.name << YAML::Value << YAML::Flow << YAML::BeginMap;
                    out << YAML::Key << "enabled" << YAML::Value << enabled;
                    out << YAML::EndMap;
                }
                out << YAML::EndMap;
            }
            if (o.patch.weights) {
                out << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
                for (const auto& [kind, w] : *o.patch.weights)
                    out << YAML::Key << std::string(to_string(kind)) << YAML::Value << w;
                out << YAML::EndMap;
            }
            const auto& cp = o.patch.control;
            if (!cp.empty()) {
                out << YAML::Key << "control" << YAML::Value << YAML::BeginMap;
                if (cp.hysteresis_delta)
                    out << YAML::Key << "hysteresis_delta" << YAML::Value << *cp.hysteresis_delta;
                if (cp.cooldown_ms)
                    out << YAML::Key << "cooldown_ms" << YAML::Value << *cp.cooldown_ms;
                if (cp.sustained_windows_required)
                    out << YAML::Key << "sustained_windows_required" << YAML::Value
                        << *cp.sustained_windows_required;
                if (cp.min_sample_count)
                    out << YAML::Key << "min_sample_count" << YAML::Value << *cp.min_sample_count;
                if (cp.default_provider)
                    out << YAML::Key << "default_provider" << YAML::Value
                        << cp.default_provider->name;
                if (cp.fallback)
                    out << YAML::Key << "fallback" << YAML::Value
                        << std::string(to_string(*cp.fallback));
                if (cp.tie_break)
                    out << YAML::Key << "tie_break" << YAML::Value
                        << std::string(to_string(*cp.tie_break));
                if (cp.stale_metric_policy)
                    out << YAML::Key << "stale_metric_policy" << YAML::Value
                        << std::string(to_string(*cp.stale_metric_policy));
                if (cp.stale_after_ms)
                    out << YAML::Key << "stale_after_ms" << YAML::Value << *cp.stale_after_ms;
                if (cp.retry_policy)
                    out << YAML::Key << "retry_policy" << YAML::Value
                        << std::string(to_string(*cp.retry_policy));
                out << YAML::EndMap;
            }
            out << YAML::EndMap;  // patch
            out << YAML::EndMap;  // override
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string canonical_serialization(const FactorList& fl) {
    ordered_json j;
    j["operation"] = fl.operation.name;
    j["declared_version"] = fl.declared_version;
    ordered_json providers = ordered_json::array();
    for (const auto& p : fl.providers) {
        ordered_json pj;
        pj["id"] = p.id.name;
        pj["has_supported_regions"] = p.has_supported_regions;
        pj["supported_regions"] = p.supported_regions;
        pj["enabled"] = p.enabled;
        pj["static_cost"] = p.static_cost;
        pj["priority"] = p.priority;
        ordered_json mw = ordered_json::array();
        for (const auto& w : p.maintenance) mw.push_back({{"s", w.start_ms}, {"e", w.end_ms}});
        pj["maintenance"] = std::move(mw);
        pj["compliance_denied_regions"] = p.compliance_denied_regions;
        pj["compliance_denied_tenants"] = p.compliance_denied_tenants;
        if (p.quota)
            pj["quota"] = {{"limit", p.quota->limit}, {"window_ms", p.quota->window_ms}};
        if (p.rate_limit)
            pj["rate_limit"] = {{"rate_per_s", p.rate_limit->rate_per_s},
                                {"burst", p.rate_limit->burst}};
        providers.push_back(std::move(pj));
    }
    j["providers"] = std::move(providers);
    ordered_json gates = ordered_json::array();
    for (const auto& g : fl.gates) {
        ordered_json gj;
        gj["name"] = to_string(g.kind);
        gj["params"] = g.params;
        gates.push_back(std::move(gj));
    }
    j["gates"] = std::move(gates);
    ordered_json scores = ordered_json::array();
    for (const auto& s : fl.scores) {
        ordered_json sj;
        sj["factor"] = to_string(s.kind);
        sj["weight"] = s.weight;
        sj["orientation"] = to_string(s.orientation);
        if (s.lower_bound) sj["lower_bound"] = *s.lower_bound;
        if (s.upper_bound) sj["upper_bound"] = *s.upper_bound;
        sj["default_value"] = s.default_value;
        scores.push_back(std::move(sj));
    }
    j["scores"] = std::move(scores);
    ordered_json c;
    const auto& ctl = fl.control;
    c["metric_refresh_interval_ms"] = ctl.metric_refresh_interval_ms;
    c["min_sample_count"] = ctl.min_sample_count;
    c["cooldown_ms"] = ctl.cooldown_ms;
    c["hysteresis_delta"] = ctl.hysteresis_delta;
    c["sustained_windows_required"] = ctl.sustained_windows_required;
    c["circuit_failure_threshold"] = ctl.circuit_failure_threshold;
    c["circuit_min_samples"] = ctl.circuit_min_samples;
    c["circuit_open_ms"] = ctl.circuit_open_ms;
    c["half_open_probe_budget"] = ctl.half_open_probe_budget;
    c["tie_break"] = to_string(ctl.tie_break);
    c["default_provider"] = ctl.default_provider.name;
    c["fallback"] = to_string(ctl.fallback);
    c["stale_metric_policy"] = to_string(ctl.stale_metric_policy);
    c["stale_after_ms"] = ctl.stale_after_ms;
    c["circuit_window_size"] = ctl.circuit_window_size;
    c["probe_successes_to_close"] = ctl.probe_successes_to_close;
    c["retry_policy"] = to_string(ctl.retry_policy);
    c["retry_max_attempts"] = ctl.retry_max_attempts;
    c["retry_budget_per_window"] = ctl.retry_budget_per_window;
    c["retry_budget_window_ms"] = ctl.retry_budget_window_ms;
    c["idempotent"] = ctl.idempotent;
    c["timeout_interactive_ms"] = ctl.timeout_interactive_ms;
    c["timeout_background_ms"] = ctl.timeout_background_ms;
    c["throttle_ttl_ms"] = ctl.throttle_ttl_ms;
    c["bulkhead_capacity"] = ctl.bulkhead_capacity;
    j["control"] = std::move(c);
    ordered_json overrides = ordered_json::array();
    for (const auto& o : fl.overrides) {
        ordered_json oj;
        ordered_json scope;
        if (o.scope.region) scope["region"] = *o.scope.region;
        if (o.scope.tenant) scope["tenant"] = *o.scope.tenant;
        if (o.scope.traffic_class) scope["traffic_class"] = to_string(*o.scope.traffic_class);
        oj["scope"] = std::move(scope);
        if (o.ramp_fraction) oj["ramp_fraction"] = *o.ramp_fraction;
        oj["emergency"] = o.emergency;
        ordered_json patch;
        ordered_json pe = ordered_json::array();
        for (const auto& [id, enabled] : o.patch.provider_enabled)
            pe.push_back({{"id", id.name}, {"enabled", enabled}});
        patch["provider_enabled"] = std::move(pe);
        if (o.patch.weights) {
            ordered_json w = ordered_json::array();
            for (const auto& [kind, weight] : *o.patch.weights)
                w.push_back({{"factor", to_string(kind)}, {"weight", weight}});
            patch["weights"] = std::move(w);
        }
        const auto& cp = o.patch.control;
        ordered_json cpj;
        if (cp.hysteresis_delta) cpj["hysteresis_delta"] = *cp.hysteresis_delta;
        if (cp.cooldown_ms) cpj["cooldown_ms"] = *cp.cooldown_ms;
        if (cp.sustained_windows_required)
            cpj["sustained_windows_required"] = *cp.sustained_windows_required;
        if (cp.min_sample_count) cpj["min_sample_count"] = *cp.min_sample_count;
        if (cp.default_provider) cpj["default_provider"] = cp.default_provider->name;
        if (cp.fallback) cpj["fallback"] = to_string(*cp.fallback);
        if (cp.tie_break) cpj["tie_break"] = to_string(*cp.tie_break);
        if (cp.stale_metric_policy) cpj["stale_metric_policy"] = to_string(*cp.stale_metric_policy);
        if (cp.stale_after_ms) cpj["stale_after_ms"] = *cp.stale_after_ms;
        if (cp.retry_policy) cpj["retry_policy"] = to_string(*cp.retry_policy);
        patch["control"] = std::move(cpj);
        oj["patch"] = std::move(patch);
        overrides.push_back(std::move(oj));
    }
    j["overrides"] = std::move(overrides);
    return j.dump();
}

std::string compute_version_id(const FactorList& fl) {
    const std::string canonical = canonical_serialization(fl);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int digest_len = 0;
    EVP_Digest(canonical.data(), canonical.size(), digest, &digest_len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(16);
    for (unsigned i = 0; i < 8 && i < digest_len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

bool ramp_admits(const std::string& key, double fraction) noexcept {
    const auto bucket = static_cast<double>(fnv1a64(key) % 1000000ULL);
    return bucket < fraction * 1e6;
}

FactorList apply_overrides(const FactorList& fl, const RequestContext& ctx) {
    FactorList effective = fl;
    for (const auto& o : fl.overrides) {
        if (!o.scope.matches(ctx)) continue;
        if (o.ramp_fraction) {
            const std::string& key = ctx.user_key ? *ctx.user_key : ctx.request_id;
            if (!ramp_admits(key, *o.ramp_fraction)) continue;
        }
        for (const auto& [id, enabled] : o.patch.provider_enabled) {
            for (auto& p : effective.providers) {
                if (p.id == id) p.enabled = enabled;
            }
        }
        if (o.patch.weights) {
            for (const auto& [kind, w] : *o.patch.weights) {
                for (auto& s : effective.scores) {
                    if (s.kind == kind) s.weight = w;
                }
            }
        }
        o.patch.control.apply(effective.control);
    }
    return effective;
}

// ---------------------------------------------------------------------------
// ConfigStore
// ---------------------------------------------------------------------------

Parsed<std::string> ConfigStore::put(FactorList fl) {
    Parsed<std::string> result;
    auto violations = validate_factor_list(fl);
    if (!violations.empty()) {
        result.error = violations.front();
        return result;
    }
    fl.version = compute_version_id(fl);
    auto shared = std::make_shared<const FactorList>(std::move(fl));
    std::unique_lock lock(mu_);
    active_[shared->operation] = shared;
    last_known_good_[shared->operation] = shared;
    result.value = shared->version;
    return result;
}

ConfigStore::GetResult ConfigStore::get(const OperationId& op, Millis now) const {
    std::shared_lock lock(mu_);
    GetResult r;
    if (unavailable_since_) {
        if (now - *unavailable_since_ > unavailable_bound_ms_) {
            r.error = StoreError::config_stale;
            return r;
        }
        auto it = last_known_good_.find(op);
        if (it == last_known_good_.end()) {
            r.error = StoreError::unknown_operation;
            return r;
        }
        r.list = it->second;
        r.from_last_known_good = true;
        return r;
    }
    auto it = active_.find(op);
    if (it == active_.end()) {
        r.error = StoreError::unknown_operation;
        return r;
    }
    r.list = it->second;
    return r;
}

void ConfigStore::mark_unavailable(Millis since) {
    std::unique_lock lock(mu_);
    if (!unavailable_since_) unavailable_since_ = since;
}

void ConfigStore::mark_available() {
    std::unique_lock lock(mu_);
    unavailable_since_.reset();
}

}  // namespace froute
