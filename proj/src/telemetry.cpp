#include "froute/telemetry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace froute {

using ordered_json = nlohmann::ordered_json;

namespace {

// splitmix64; seeds per-(key, bucket) reservoir decisions reproducibly.
std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t key_hash(const MetricKey& key) noexcept {
    std::uint64_t h = fnv1a64(key.operation.name);
    h = splitmix64(h ^ fnv1a64(key.provider.name));
    return splitmix64(h ^ fnv1a64(key.scope));
}

}  // namespace

std::vector<std::string> WindowConfig::violations() const {
    std::vector<std::string> v;
    if (window_ms <= 0) v.emplace_back("window_ms must be > 0");
    if (bucket_ms <= 0) v.emplace_back("bucket_ms must be > 0");
    if (bucket_ms > 0 && window_ms % bucket_ms != 0)
        v.emplace_back("window_ms must be a multiple of bucket_ms");
    if (bucket_ms > 0 && window_ms / bucket_ms < 2)
        v.emplace_back("window must span at least 2 buckets");
    if (completion_link_timeout_ms <= 0)
        v.emplace_back("completion_link_timeout_ms must be > 0");
    if (reservoir_capacity < 1) v.emplace_back("reservoir_capacity must be >= 1");
    if (incident_decay_tau_ms <= 0) v.emplace_back("incident_decay_tau_ms must be > 0");
    return v;
}

std::optional<double> percentile(std::span<const double> samples, double q) {
    if (samples.empty()) return std::nullopt;
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    // Small epsilon so q*n values that are exact integers do not get bumped
    // up by binary representation error.
    auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

std::string snapshot_to_jsonl(const MetricSnapshot& s) {
    ordered_json j;
    j["key"] = ordered_json{{"operation", s.key.operation.name},
                            {"provider", s.key.provider.name},
                            {"scope", s.key.scope}};
    j["attempted"] = s.attempted;
    j["completed"] = s.completed;
    j["completion_rate"] = s.completion_rate ? ordered_json(*s.completion_rate)
                                             : ordered_json(nullptr);
    j["latency_p95_ms"] =
        s.latency_p95_ms ? ordered_json(*s.latency_p95_ms) : ordered_json(nullptr);
    j["latency_p99_ms"] =
        s.latency_p99_ms ? ordered_json(*s.latency_p99_ms) : ordered_json(nullptr);
    j["mean_cost"] = s.mean_cost ? ordered_json(*s.mean_cost) : ordered_json(nullptr);
    j["incident_penalty"] = s.incident_penalty;
    j["sample_count"] = s.sample_count;
    j["freshness_ts"] = s.freshness_ts;
    j["snapshot_id"] = s.snapshot_id;
    return j.dump();
}

std::string link_to_jsonl(const CompletionLink& link) {
    ordered_json j;
    j["request_id"] = link.request_id;
    j["business_kind"] = to_string(link.business_kind);
    j["ts"] = link.ts;
    return j.dump();
}

std::optional<CompletionLink> link_from_jsonl(std::string_view line, std::string& error) {
    error.clear();
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        error = "not a JSON object";
        return std::nullopt;
    }
    CompletionLink link;
    try {
        link.request_id = j.at("request_id").get<std::string>();
        auto kind = business_kind_from(j.at("business_kind").get<std::string>());
        if (!kind) {
            error = "unknown business kind";
            return std::nullopt;
        }
        link.business_kind = *kind;
        link.ts = j.at("ts").get<Millis>();
    } catch (const ordered_json::exception& ex) {
        error = ex.what();
        return std::nullopt;
    }
    return link;
}

std::string incident_to_jsonl(const IncidentMarker& m) {
    ordered_json j;
    j["ts"] = m.ts;
    j["key"] = ordered_json{{"operation", m.operation.name},
                            {"provider", m.provider.name},
                            {"region", m.region}};
    j["transition"] = m.transition;
    return j.dump();
}

TelemetryHub::TelemetryHub(WindowConfig wc, std::uint64_t seed)
    : wc_(wc), seed_(seed) {}

std::uint64_t TelemetryHub::reservoir_draw(const MetricKey& key, std::int64_t bucket,
                                           long long n) const {
    std::uint64_t h = splitmix64(seed_ ^ key_hash(key));
    h = splitmix64(h ^ static_cast<std::uint64_t>(bucket));
    h = splitmix64(h ^ static_cast<std::uint64_t>(n));
    return h;
}

void TelemetryHub::record_attempt_locked(const MetricKey& key, const AttemptEvent& e,
                                         bool completed) {
    auto& w = windows_[key];
    if (wc_.exact_mode) {
        w.recs.push_back({e.start_time, e.latency_ms, e.cost, completed});
        return;
    }
    const std::int64_t bi = e.start_time / wc_.bucket_ms;
    auto& bucket = w.buckets[bi];
    bucket.attempted += 1;
    if (completed) bucket.completed += 1;
    bucket.cost_sum += e.cost;
    if (bucket.seen_latencies < wc_.reservoir_capacity) {
        bucket.latencies.push_back(e.latency_ms);
    } else {
        const auto j = reservoir_draw(key, bi, bucket.seen_latencies) %
                       static_cast<std::uint64_t>(bucket.seen_latencies + 1);
        if (j < static_cast<std::uint64_t>(wc_.reservoir_capacity))
            bucket.latencies[static_cast<std::size_t>(j)] = e.latency_ms;
    }
    bucket.seen_latencies += 1;
}

void TelemetryHub::credit_completion_locked(const MetricKey& key, Millis start_time) {
    auto it = windows_.find(key);
    if (it == windows_.end()) return;
    auto& w = it->second;
    if (wc_.exact_mode) {
        for (auto rit = w.recs.rbegin(); rit != w.recs.rend(); ++rit) {
            if (rit->start_time == start_time && !rit->completed) {
                rit->completed = true;
                return;
            }
        }
        return;
    }
    const std::int64_t bi = start_time / wc_.bucket_ms;
    auto bit = w.buckets.find(bi);
    if (bit != w.buckets.end()) bit->second.completed += 1;
}

TelemetryHub::AppendOutcome TelemetryHub::append_event(const AttemptEvent& e) {
    AppendOutcome out;
    auto violations = validate_event(e);
    if (!violations.empty()) {
        out.error = "invalid_event: " + violations.front();
        return out;
    }
    std::lock_guard lock(mu_);
    auto attempt_id = std::make_pair(e.request_id, e.retry_count);
    if (seen_attempt_ids_.count(attempt_id)) {
        out.error = "invalid_event: duplicate (request_id, retry_count)";
        return out;
    }
    seen_attempt_ids_[attempt_id] = true;
    const auto seq = static_cast<long long>(events_.size());
    events_.push_back(e);

    const bool completed_now = is_workflow_success(e.business.kind);
    MetricKey region_key{e.operation, e.provider, e.region};
    MetricKey global_key{e.operation, e.provider, kGlobalScope};
    record_attempt_locked(region_key, e, completed_now);
    record_attempt_locked(global_key, e, completed_now);
    attempts_[e.request_id] = AttemptRef{region_key, e.start_time, completed_now};
    out.seq = seq;
    return out;
}

LinkResult TelemetryHub::link_completion(const std::string& request_id,
                                         BusinessOutcome business, Millis ts) {
    std::lock_guard lock(mu_);
    auto it = attempts_.find(request_id);
    if (it == attempts_.end()) return LinkResult::unmatched;
    links_.push_back({request_id, business.kind, ts});
    auto& ref = it->second;
    const bool success = is_workflow_success(business.kind);
    const bool in_time = ts - ref.start_time <= wc_.completion_link_timeout_ms;
    if (success && in_time && !ref.counted) {
        ref.counted = true;
        credit_completion_locked(ref.region_key, ref.start_time);
        MetricKey global_key{ref.region_key.operation, ref.region_key.provider, kGlobalScope};
        credit_completion_locked(global_key, ref.start_time);
    }
    return LinkResult::ok;
}

void TelemetryHub::add_incident(const IncidentMarker& marker) {
    std::lock_guard lock(mu_);
    incidents_.push_back(marker);
}

double TelemetryHub::incident_penalty(const MetricKey& key, Millis now) const {
    std::lock_guard lock(mu_);
    double sum = 0;
    for (const auto& m : incidents_) {
        // Only transitions into open and operator-declared incidents count.
        if (!m.transition.ends_with("->open") && m.transition != "operator") continue;
        if (m.operation != key.operation || m.provider != key.provider) continue;
        if (key.scope != kGlobalScope && m.region != key.scope) continue;
        if (m.ts > now) continue;
        sum += std::exp(-static_cast<double>(now - m.ts) /
                        static_cast<double>(wc_.incident_decay_tau_ms));
    }
    return std::min(1.0, sum);
}

MetricSnapshot TelemetryHub::aggregate(const MetricKey& key, Millis now) const {
    MetricSnapshot s;
    s.key = key;
    s.freshness_ts = now;
    std::vector<double> latencies;
    double cost_sum = 0;
    {
        std::lock_guard lock(mu_);
        auto it = windows_.find(key);
        if (it != windows_.end()) {
            const auto& w = it->second;
            if (wc_.exact_mode) {
                const Millis from = now - wc_.window_ms;
                for (const auto& rec : w.recs) {
                    if (rec.start_time > from && rec.start_time <= now) {
                        s.attempted += 1;
                        if (rec.completed) s.completed += 1;
                        cost_sum += rec.cost;
                        latencies.push_back(rec.latency);
                    }
                }
            } else {
                const std::int64_t nb = wc_.window_ms / wc_.bucket_ms;
                const std::int64_t current = now / wc_.bucket_ms;
                const std::int64_t oldest = current - nb + 1;
                for (const auto& [bi, bucket] : w.buckets) {
                    if (bi < oldest || bi > current) continue;
                    s.attempted += bucket.attempted;
                    s.completed += bucket.completed;
                    cost_sum += bucket.cost_sum;
                    latencies.insert(latencies.end(), bucket.latencies.begin(),
                                     bucket.latencies.end());
                }
            }
        }
    }
    s.sample_count = s.attempted;
    if (s.attempted > 0) {
        s.completion_rate = static_cast<double>(s.completed) / static_cast<double>(s.attempted);
        s.mean_cost = cost_sum / static_cast<double>(s.attempted);
    }
    if (!latencies.empty()) {
        s.latency_p95_ms = percentile(latencies, 0.95);
        s.latency_p99_ms = percentile(latencies, 0.99);
    }
    s.incident_penalty = incident_penalty(key, now);
    return s;
}

std::vector<MetricKey> TelemetryHub::known_keys(const OperationId& op) const {
    std::lock_guard lock(mu_);
    std::vector<MetricKey> keys;
    for (const auto& [key, _] : windows_) {
        if (key.operation == op) keys.push_back(key);
    }
    return keys;
}

std::vector<MetricKey> TelemetryHub::all_keys() const {
    std::lock_guard lock(mu_);
    std::vector<MetricKey> keys;
    keys.reserve(windows_.size());
    for (const auto& [key, _] : windows_) keys.push_back(key);
    return keys;
}

std::vector<AttemptEvent> TelemetryHub::events_copy() const {
    std::lock_guard lock(mu_);
    return events_;
}

std::vector<IncidentMarker> TelemetryHub::incidents_copy() const {
    std::lock_guard lock(mu_);
    return incidents_;
}

std::vector<CompletionLink> TelemetryHub::links_copy() const {
    std::lock_guard lock(mu_);
    return links_;
}

bool TelemetryHub::save_events_jsonl(const std::string& path) const {
    auto events = events_copy();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    for (const auto& e : events) out << event_to_jsonl(e) << '\n';
    return static_cast<bool>(out);
}

EventLogLoad load_event_log(const std::string& path, bool strict) {
    EventLogLoad result;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        result.fatal = "io_error: cannot open " + path;
        return result;
    }
    std::string line;
    int line_no = 0;
    std::string error;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto event = event_from_jsonl(line, error);
        if (!event) {
            auto msg = "line " + std::to_string(line_no) + ": " + error;
            if (strict) {
                result.fatal = "malformed_line: " + msg;
                result.events.clear();
                return result;
            }
            result.warnings.push_back(msg);
            continue;
        }
        result.events.push_back(std::move(*event));
    }
    return result;
}

void SnapshotCache::refresh(const TelemetryHub& hub, Millis as_of) {
    const auto keys = hub.all_keys();

    std::map<std::pair<OperationId, std::string>, View> fresh;
    std::lock_guard lock(mu_);
    ++refresh_seq_;
    char id[32];
    std::snprintf(id, sizeof(id), "%012lld", refresh_seq_);
    for (const auto& key : keys) {
        auto snapshot = hub.aggregate(key, as_of);
        snapshot.snapshot_id = id;
        auto& view = fresh[{key.operation, key.scope}];
        view.freshness_ts = as_of;
        view.snapshot_id = id;
        view.by_provider[key.provider] = std::move(snapshot);
    }
    for (auto& [group, view] : fresh) {
        views_[group] = std::make_shared<const View>(std::move(view));
    }
}

SnapshotCache::GetResult SnapshotCache::get(const OperationId& op, const std::string& scope,
                                            Millis now, Millis stale_after_ms) const {
    std::lock_guard lock(mu_);
    GetResult r;
    auto it = views_.find({op, scope});
    if (it == views_.end()) {
        r.stale = true;
        return r;
    }
    r.view = it->second;
    r.stale = (now - r.view->freshness_ts) > stale_after_ms;
    return r;
}

void SnapshotCache::publish(const OperationId& op, const std::string& scope, View view) {
    std::lock_guard lock(mu_);
    ++refresh_seq_;
    views_[{op, scope}] = std::make_shared<const View>(std::move(view));
}

}  // namespace froute
