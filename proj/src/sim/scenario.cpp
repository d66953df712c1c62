#include "froute/sim/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace froute::sim {

namespace {

constexpr std::array<std::string_view, 5> kFaultNames{
    "full_outage", "partial_regional", "rate_limit", "latency_only", "recovery_ramp"};
constexpr std::array<std::string_view, 2> kArrivalNames{"deterministic_uniform", "poisson"};
constexpr std::array<std::string_view, 2> kModeNames{"sampled", "expectation"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& names,
                           std::string_view s) noexcept {
    for (std::size_t i = 0; i < N; ++i) {
        if (names[i] == s) return static_cast<Enum>(i);
    }
    return std::nullopt;
}

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
        if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
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

LatencyDist parse_latency(const YAML::Node& node) {
    require_keys(node, {"kind", "value_ms", "median_ms", "sigma"}, "latency");
    LatencyDist d;
    auto kind = scalar<std::string>(node["kind"], "latency kind");
    if (kind == "constant") {
        d.kind = LatencyKind::constant;
        if (node["value_ms"]) d.value_ms = scalar<double>(node["value_ms"], "value_ms");
    } else if (kind == "lognormal") {
        d.kind = LatencyKind::lognormal;
        if (node["median_ms"]) d.median_ms = scalar<double>(node["median_ms"], "median_ms");
        if (node["sigma"]) d.sigma = scalar<double>(node["sigma"], "sigma");
    } else {
        fail(node["kind"], "unknown latency kind '" + kind + "'");
    }
    return d;
}

FaultPhase parse_fault(const YAML::Node& node) {
    require_keys(node,
                 {"start_ms", "end_ms", "kind", "degraded_success_prob", "affected_regions",
                  "latency_multiplier", "reject_fraction", "ramp_duration_ms"},
                 "fault phase");
    FaultPhase f;
    if (!node["start_ms"] || !node["end_ms"] || !node["kind"])
        fail(node, "fault phase requires start_ms, end_ms, kind");
    f.start_ms = scalar<Millis>(node["start_ms"], "start_ms");
    f.end_ms = scalar<Millis>(node["end_ms"], "end_ms");
    auto kind = lookup<FaultKind>(kFaultNames, scalar<std::string>(node["kind"], "fault kind"));
    if (!kind) fail(node["kind"], "unknown fault kind");
    f.kind = *kind;
    if (node["degraded_success_prob"])
        f.degraded_success_prob =
            scalar<double>(node["degraded_success_prob"], "degraded_success_prob");
    if (node["affected_regions"]) {
        for (const auto& r : node["affected_regions"])
            f.affected_regions.push_back(scalar<std::string>(r, "affected region"));
    }
    if (node["latency_multiplier"])
        f.latency_multiplier = scalar<double>(node["latency_multiplier"], "latency_multiplier");
    if (node["reject_fraction"])
        f.reject_fraction = scalar<double>(node["reject_fraction"], "reject_fraction");
    if (node["ramp_duration_ms"])
        f.ramp_duration_ms = scalar<Millis>(node["ramp_duration_ms"], "ramp_duration_ms");
    return f;
}

ProviderModel parse_provider_model(const YAML::Node& node) {
    require_keys(node,
                 {"id", "base_success_prob", "latency", "cost_per_attempt", "per_region",
                  "fault_timeline"},
                 "provider model");
    ProviderModel m;
    if (!node["id"]) fail(node, "provider model missing 'id'");
    m.id.name = scalar<std::string>(node["id"], "provider id");
    if (node["base_success_prob"])
        m.base_success_prob = scalar<double>(node["base_success_prob"], "base_success_prob");
    if (node["latency"]) m.latency = parse_latency(node["latency"]);
    if (node["cost_per_attempt"])
        m.cost_per_attempt = scalar<double>(node["cost_per_attempt"], "cost_per_attempt");
    if (node["per_region"]) {
        if (!node["per_region"].IsMap()) fail(node["per_region"], "per_region must be a map");
        for (const auto& kv : node["per_region"]) {
            require_keys(kv.second, {"success_prob", "latency_multiplier"}, "region behavior");
            RegionBehavior rb;
            if (kv.second["success_prob"])
                rb.success_prob = scalar<double>(kv.second["success_prob"], "success_prob");
            if (kv.second["latency_multiplier"])
                rb.latency_multiplier =
                    scalar<double>(kv.second["latency_multiplier"], "latency_multiplier");
            m.per_region[kv.first.as<std::string>()] = rb;
        }
    }
    if (node["fault_timeline"]) {
        for (const auto& f : node["fault_timeline"]) m.fault_timeline.push_back(parse_fault(f));
    }
    return m;
}

Scenario parse_root(const YAML::Node& root) {
    require_keys(root,
                 {"name", "duration_ms", "arrival_rate_per_min", "arrival_process", "mode",
                  "seed", "regions", "user_pool", "providers", "factor_list", "factor_list_path",
                  "telemetry_impairment", "config_impairment", "telemetry",
                  "forced_switch_sweep_min", "failover_bound", "check_conformance"},
                 "scenario");
    Scenario s;
    if (root["name"]) s.name = scalar<std::string>(root["name"], "name");
    if (root["duration_ms"]) s.duration_ms = scalar<Millis>(root["duration_ms"], "duration_ms");
    if (root["arrival_rate_per_min"])
        s.arrival_rate_per_min =
            scalar<double>(root["arrival_rate_per_min"], "arrival_rate_per_min");
    if (root["arrival_process"]) {
        auto p = lookup<ArrivalProcess>(
            kArrivalNames, scalar<std::string>(root["arrival_process"], "arrival_process"));
        if (!p) fail(root["arrival_process"], "unknown arrival_process");
        s.arrival_process = *p;
    }
    if (root["mode"]) {
        auto m = lookup<SimMode>(kModeNames, scalar<std::string>(root["mode"], "mode"));
        if (!m) fail(root["mode"], "unknown mode");
        s.mode = *m;
    }
    if (root["seed"]) s.seed = scalar<std::uint64_t>(root["seed"], "seed");
    if (root["regions"]) {
        if (!root["regions"].IsMap()) fail(root["regions"], "regions must be a map");
        for (const auto& kv : root["regions"]) {
            s.regions.emplace_back(kv.first.as<std::string>(),
                                   scalar<double>(kv.second, "region weight"));
        }
    } else {
        s.regions.emplace_back("US", 1.0);
    }
    if (root["user_pool"]) s.user_pool = scalar<int>(root["user_pool"], "user_pool");
    if (!root["providers"]) fail(root, "scenario missing 'providers'");
    for (const auto& p : root["providers"]) s.providers.push_back(parse_provider_model(p));
    if (root["factor_list"] && root["factor_list_path"])
        fail(root["factor_list_path"], "give factor_list inline or by path, not both");
    if (root["factor_list"]) {
        YAML::Emitter em;
        em << root["factor_list"];
        auto parsed = parse_factor_list(std::string(em.c_str()));
        if (!parsed) fail(root["factor_list"], "factor_list: " + parsed.error);
        s.factor_list = std::move(*parsed.value);
    } else if (root["factor_list_path"]) {
        auto path = scalar<std::string>(root["factor_list_path"], "factor_list_path");
        auto parsed = load_factor_list_file(path);
        if (!parsed) fail(root["factor_list_path"], "factor_list_path: " + parsed.error);
        s.factor_list = std::move(*parsed.value);
    } else {
        fail(root, "scenario missing 'factor_list'");
    }
    if (root["telemetry_impairment"]) {
        require_keys(root["telemetry_impairment"], {"lag_ms", "frozen_from_ms"},
                     "telemetry_impairment");
        TelemetryImpairment t;
        if (root["telemetry_impairment"]["lag_ms"])
            t.lag_ms = scalar<Millis>(root["telemetry_impairment"]["lag_ms"], "lag_ms");
        if (root["telemetry_impairment"]["frozen_from_ms"])
            t.frozen_from_ms =
                scalar<Millis>(root["telemetry_impairment"]["frozen_from_ms"], "frozen_from_ms");
        s.telemetry_impairment = t;
    }
    if (root["config_impairment"]) {
        require_keys(root["config_impairment"],
                     {"unavailable_from_ms", "unavailable_until_ms", "store_bound_ms"},
                     "config_impairment");
        ConfigImpairment c;
        if (!root["config_impairment"]["unavailable_from_ms"])
            fail(root["config_impairment"], "config_impairment requires unavailable_from_ms");
        c.unavailable_from_ms =
            scalar<Millis>(root["config_impairment"]["unavailable_from_ms"], "unavailable_from_ms");
        if (root["config_impairment"]["unavailable_until_ms"])
            c.unavailable_until_ms = scalar<Millis>(
                root["config_impairment"]["unavailable_until_ms"], "unavailable_until_ms");
        if (root["config_impairment"]["store_bound_ms"])
            c.store_bound_ms =
                scalar<Millis>(root["config_impairment"]["store_bound_ms"], "store_bound_ms");
        s.config_impairment = c;
    }
    if (root["telemetry"]) {
        require_keys(root["telemetry"],
                     {"window_ms", "bucket_ms", "completion_link_timeout_ms", "exact_mode",
                      "reservoir_capacity", "incident_decay_tau_ms"},
                     "telemetry");
        const auto& t = root["telemetry"];
        if (t["window_ms"]) s.telemetry.window_ms = scalar<Millis>(t["window_ms"], "window_ms");
        if (t["bucket_ms"]) s.telemetry.bucket_ms = scalar<Millis>(t["bucket_ms"], "bucket_ms");
        if (t["completion_link_timeout_ms"])
            s.telemetry.completion_link_timeout_ms =
                scalar<Millis>(t["completion_link_timeout_ms"], "completion_link_timeout_ms");
        if (t["exact_mode"]) s.telemetry.exact_mode = scalar<bool>(t["exact_mode"], "exact_mode");
        if (t["reservoir_capacity"])
            s.telemetry.reservoir_capacity =
                scalar<int>(t["reservoir_capacity"], "reservoir_capacity");
        if (t["incident_decay_tau_ms"])
            s.telemetry.incident_decay_tau_ms =
                scalar<Millis>(t["incident_decay_tau_ms"], "incident_decay_tau_ms");
    }
    if (root["forced_switch_sweep_min"]) {
        std::vector<double> sweep;
        for (const auto& v : root["forced_switch_sweep_min"])
            sweep.push_back(scalar<double>(v, "forced switch minute"));
        s.forced_switch_sweep_min = std::move(sweep);
    }
    if (root["failover_bound"]) {
        require_keys(root["failover_bound"],
                     {"t_detect_ms", "t_publish_ms", "t_aggregate_ms", "t_refresh_ms",
                      "t_decision_ms"},
                     "failover_bound");
        const auto& b = root["failover_bound"];
        FailoverBoundTerms terms;
        if (b["t_detect_ms"]) terms.t_detect_ms = scalar<double>(b["t_detect_ms"], "t_detect_ms");
        if (b["t_publish_ms"])
            terms.t_publish_ms = scalar<double>(b["t_publish_ms"], "t_publish_ms");
        if (b["t_aggregate_ms"])
            terms.t_aggregate_ms = scalar<double>(b["t_aggregate_ms"], "t_aggregate_ms");
        if (b["t_refresh_ms"])
            terms.t_refresh_ms = scalar<double>(b["t_refresh_ms"], "t_refresh_ms");
        if (b["t_decision_ms"])
            terms.t_decision_ms = scalar<double>(b["t_decision_ms"], "t_decision_ms");
        s.failover_bound = terms;
    }
    if (root["check_conformance"])
        s.check_conformance = scalar<bool>(root["check_conformance"], "check_conformance");
    return s;
}

}  // namespace

const ProviderModel* Scenario::find_provider(const ProviderId& id) const {
    for (const auto& p : providers) {
        if (p.id == id) return &p;
    }
    return nullptr;
}

Parsed<Scenario> parse_scenario(const std::string& text) {
    Parsed<Scenario> result;
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

Parsed<Scenario> load_scenario_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        Parsed<Scenario> result;
        result.error = "cannot open file: " + path;
        return result;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::vector<std::string> validate_scenario(const Scenario& s) {
    std::vector<std::string> v;
    if (s.duration_ms <= 0) v.emplace_back("duration_ms must be > 0");
    if (!(s.arrival_rate_per_min > 0)) v.emplace_back("arrival_rate_per_min must be > 0");
    if (s.providers.empty()) v.emplace_back("at least one provider required");
    if (s.user_pool < 1) v.emplace_back("user_pool must be >= 1");
    double weight_sum = 0;
    for (const auto& [region, w] : s.regions) {
        if (region.empty()) v.emplace_back("region name empty");
        if (w < 0) v.emplace_back("region weight negative");
        weight_sum += w;
    }
    if (std::abs(weight_sum - 1.0) > 1e-9) v.emplace_back("region weights must sum to 1");
    std::set<ProviderId> ids;
    for (const auto& p : s.providers) {
        if (!ids.insert(p.id).second) v.emplace_back("duplicate provider model " + p.id.name);
        if (p.base_success_prob < 0 || p.base_success_prob > 1)
            v.emplace_back(p.id.name + ": base_success_prob must be in [0,1]");
        if (p.latency.kind == LatencyKind::lognormal &&
            (p.latency.median_ms <= 0 || p.latency.sigma <= 0))
            v.emplace_back(p.id.name + ": lognormal parameters must be positive");
        if (p.latency.kind == LatencyKind::constant && p.latency.value_ms < 0)
            v.emplace_back(p.id.name + ": constant latency must be >= 0");
        if (p.cost_per_attempt < 0) v.emplace_back(p.id.name + ": cost_per_attempt negative");
        for (const auto& [region, rb] : p.per_region) {
            if (rb.success_prob && (*rb.success_prob < 0 || *rb.success_prob > 1))
                v.emplace_back(p.id.name + ": region " + region + " success_prob out of [0,1]");
        }
        Millis prev_end = -1;
        for (const auto& f : p.fault_timeline) {
            if (f.start_ms >= f.end_ms)
                v.emplace_back(p.id.name + ": fault phase start >= end");
            if (f.start_ms < prev_end)
                v.emplace_back(p.id.name + ": fault phases overlap or are unordered");
            prev_end = f.end_ms;
            if (f.degraded_success_prob < 0 || f.degraded_success_prob > 1)
                v.emplace_back(p.id.name + ": degraded_success_prob out of [0,1]");
            if (f.reject_fraction < 0 || f.reject_fraction > 1)
                v.emplace_back(p.id.name + ": reject_fraction out of [0,1]");
            if (f.kind == FaultKind::recovery_ramp && f.ramp_duration_ms <= 0)
                v.emplace_back(p.id.name + ": recovery_ramp requires ramp_duration_ms > 0");
        }
    }
    for (const auto& fv : validate_factor_list(s.factor_list))
        v.push_back("factor_list: " + fv);
    // Every configured provider needs a synthetic model.
    for (const auto& p : s.factor_list.providers) {
        if (!s.find_provider(p.id))
            v.emplace_back("no provider model for configured provider " + p.id.name);
    }
    for (const auto& wv : s.telemetry.violations()) v.push_back("telemetry: " + wv);
    if (s.mode == SimMode::expectation && !s.forced_switch_sweep_min)
        v.emplace_back("expectation mode requires forced_switch_sweep_min");
    if (s.forced_switch_sweep_min && s.providers.size() < 2)
        v.emplace_back("forced_switch_sweep_min requires two providers");
    if (s.config_impairment && s.config_impairment->unavailable_until_ms &&
        *s.config_impairment->unavailable_until_ms <= s.config_impairment->unavailable_from_ms)
        v.emplace_back("config_impairment until must be after from");
    return v;
}

std::string_view to_string(FaultKind v) noexcept {
    return kFaultNames[static_cast<std::size_t>(v)];
}
std::string_view to_string(ArrivalProcess v) noexcept {
    return kArrivalNames[static_cast<std::size_t>(v)];
}
std::string_view to_string(SimMode v) noexcept {
    return kModeNames[static_cast<std::size_t>(v)];
}

EffectiveBehavior provider_behavior(const ProviderModel& model, const std::string& region,
                                    Millis t) {
    EffectiveBehavior b;
    b.success_prob = model.base_success_prob;
    auto rit = model.per_region.find(region);
    if (rit != model.per_region.end()) {
        if (rit->second.success_prob) b.success_prob = *rit->second.success_prob;
        b.latency_multiplier = rit->second.latency_multiplier;
    }
    const double healthy = b.success_prob;
    for (const auto& phase : model.fault_timeline) {
        if (t < phase.start_ms || t >= phase.end_ms) continue;
        const bool scoped = !phase.affected_regions.empty();
        const bool hits_region =
            !scoped || std::find(phase.affected_regions.begin(), phase.affected_regions.end(),
                                 region) != phase.affected_regions.end();
        if (!hits_region) continue;
        switch (phase.kind) {
            case FaultKind::full_outage:
            case FaultKind::partial_regional:
                b.success_prob = phase.degraded_success_prob;
                b.latency_multiplier *= phase.latency_multiplier;
                break;
            case FaultKind::rate_limit:
                b.reject_fraction = phase.reject_fraction;
                break;
            case FaultKind::latency_only:
                b.latency_multiplier *= phase.latency_multiplier;
                break;
            case FaultKind::recovery_ramp: {
                const double span = static_cast<double>(
                    phase.ramp_duration_ms > 0 ? phase.ramp_duration_ms
                                               : phase.end_ms - phase.start_ms);
                double frac = static_cast<double>(t - phase.start_ms) / span;
                frac = std::clamp(frac, 0.0, 1.0);
                b.success_prob =
                    phase.degraded_success_prob + frac * (healthy - phase.degraded_success_prob);
                break;
            }
        }
        break;  // phases are non-overlapping; first hit wins
    }
    return b;
}

}  // namespace froute::sim
