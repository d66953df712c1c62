#include "froute/sim/conformance.hpp"

#include <algorithm>
#include <sstream>

namespace froute::sim {

std::string_view to_string(PreferenceState v) noexcept {
    switch (v) {
        case PreferenceState::primary_preferred: return "Primary";
        case PreferenceState::secondary_preferred: return "Secondary";
        case PreferenceState::probe_primary: return "Probe";
        case PreferenceState::degraded: return "Degraded";
    }
    return "?";
}

bool ConformanceResult::saw(std::string_view tag) const {
    return std::any_of(transitions.begin(), transitions.end(),
                       [&](const ObservedTransition& t) { return t.tag == tag; });
}

std::string ConformanceResult::path(const std::string& scope) const {
    std::ostringstream out;
    out << "Primary";
    for (const auto& t : transitions) {
        if (t.scope != scope) continue;
        out << " -" << t.tag << "-> " << to_string(t.to);
    }
    return out.str();
}

namespace {

struct Item {
    Millis ts = 0;
    bool is_incident = false;
    const DecisionTrace* trace = nullptr;
    const IncidentMarker* incident = nullptr;
};

const ScoredCandidate* find_candidate(const DecisionTrace& t, const ProviderId& id) {
    for (const auto& c : t.candidates) {
        if (c.provider == id) return &c;
    }
    return nullptr;
}

bool gate_failed_for(const DecisionTrace& t, const ProviderId& id) {
    for (const auto& g : t.gate_results) {
        if (g.provider == id && !g.passed) return true;
    }
    return false;
}

bool superiority_holds(const DecisionTrace& t, const ProviderId& challenger,
                       const ProviderId& incumbent, double delta) {
    const auto* c = find_candidate(t, challenger);
    const auto* i = find_candidate(t, incumbent);
    return c && i && c->total > i->total + delta;
}

}  // namespace

ConformanceResult check_state_machine(const SimReport& report, const Scenario& scenario) {
    ConformanceResult result;
    const auto& fl = scenario.factor_list;
    if (fl.providers.size() != 2) {
        result.conformant = false;
        result.violations.push_back("state-machine check requires exactly two providers");
        return result;
    }
    const ProviderId primary = fl.control.default_provider;
    const ProviderId secondary =
        fl.providers[0].id == primary ? fl.providers[1].id : fl.providers[0].id;
    const double delta = fl.control.hysteresis_delta;
    const int required = fl.control.sustained_windows_required;

    for (const auto& [scope, weight] : scenario.regions) {
        (void)weight;
        std::vector<Item> items;
        std::vector<const DecisionTrace*> scope_traces;
        for (std::size_t i = 0; i < report.traces.size(); ++i) {
            if (report.trace_scopes[i] != scope) continue;
            Item item;
            item.ts = report.traces[i].timestamp;
            item.trace = &report.traces[i];
            items.push_back(item);
            scope_traces.push_back(&report.traces[i]);
        }
        for (const auto& inc : report.incidents) {
            if (inc.region != scope || inc.provider != primary) continue;
            Item item;
            item.ts = inc.ts;
            item.is_incident = true;
            item.incident = &inc;
            items.push_back(item);
        }
        std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
            if (a.ts != b.ts) return a.ts < b.ts;
            return a.is_incident && !b.is_incident;  // incidents first at equal ts
        });

        auto violation = [&](Millis ts, const std::string& what) {
            result.conformant = false;
            result.violations.push_back("nonconforming_transition at ts=" + std::to_string(ts) +
                                        " scope=" + scope + ": " + what);
        };

        PreferenceState state = PreferenceState::primary_preferred;
        Millis half_open_at = -1;  // <0 means no half-open circuit observed
        auto emit = [&](const char* tag, Millis ts, PreferenceState to) {
            result.transitions.push_back({tag, ts, scope, state, to});
            state = to;
        };

        // Index of the trace within scope_traces, for T3 lookback.
        std::size_t trace_idx = 0;
        for (const auto& item : items) {
            if (item.is_incident) {
                const auto& tr = item.incident->transition;
                if (tr == "open->half_open") {
                    half_open_at = item.ts;
                } else if (tr == "half_open->open") {
                    if (state == PreferenceState::probe_primary) {
                        emit("T4", item.ts, PreferenceState::secondary_preferred);
                    }
                    half_open_at = -1;
                }
                continue;
            }

            const DecisionTrace& t = *item.trace;
            const std::size_t my_idx = trace_idx++;
            if (t.fallback) {
                if (state == PreferenceState::degraded) continue;
                if (state == PreferenceState::secondary_preferred) {
                    emit("T5", t.timestamp, PreferenceState::degraded);
                } else {
                    violation(t.timestamp,
                              "fallback (all gates failed) while in state " +
                                  std::string(to_string(state)));
                    state = PreferenceState::degraded;
                }
                continue;
            }

            const ProviderId sel = *t.selected;
            const auto* sel_candidate = find_candidate(t, sel);
            const bool probe = sel_candidate && sel_candidate->probe;

            if (probe) {
                if (sel != primary) continue;  // secondary probes are outside the model
                switch (state) {
                    case PreferenceState::secondary_preferred:
                        if (half_open_at >= 0 && half_open_at <= t.timestamp) {
                            emit("T2", t.timestamp, PreferenceState::probe_primary);
                        } else {
                            violation(t.timestamp, "probe dispatched without half-open circuit");
                            state = PreferenceState::probe_primary;
                        }
                        break;
                    case PreferenceState::probe_primary:
                    case PreferenceState::degraded:
                    case PreferenceState::primary_preferred:
                        break;  // probing continues / recovery testing
                }
                continue;
            }

            if (sel == primary) {
                switch (state) {
                    case PreferenceState::primary_preferred:
                        break;
                    case PreferenceState::probe_primary: {
                        // T3 needs the switch plus the preceding required-1
                        // consecutive decisions to show sustained superiority.
                        bool sustained = superiority_holds(t, primary, secondary, delta);
                        int checked = 0;
                        for (std::size_t back = my_idx; back > 0 && checked < required - 1;) {
                            --back;
                            const DecisionTrace& prev = *scope_traces[back];
                            if (prev.fallback) { sustained = false; break; }
                            const auto* prev_sel = find_candidate(prev, *prev.selected);
                            if (prev_sel && prev_sel->probe) continue;  // probes don't count
                            if (!superiority_holds(prev, primary, secondary, delta)) {
                                sustained = false;
                                break;
                            }
                            ++checked;
                        }
                        if (checked < required - 1) sustained = false;
                        if (sustained) {
                            emit("T3", t.timestamp, PreferenceState::primary_preferred);
                        } else {
                            violation(t.timestamp,
                                      "switch back to primary without sustained recovery");
                            state = PreferenceState::primary_preferred;
                        }
                        break;
                    }
                    case PreferenceState::degraded:
                        emit("T6", t.timestamp, PreferenceState::primary_preferred);
                        break;
                    case PreferenceState::secondary_preferred:
                        violation(t.timestamp, "switch back to primary without a probe phase");
                        state = PreferenceState::primary_preferred;
                        break;
                }
                continue;
            }

            // Normal selection of the secondary.
            switch (state) {
                case PreferenceState::secondary_preferred:
                case PreferenceState::probe_primary:
                    break;  // serving secondary while (possibly) probing
                case PreferenceState::primary_preferred: {
                    const bool evicted = gate_failed_for(t, primary);
                    const bool score_switch =
                        t.previous_choice && *t.previous_choice == primary;
                    if (evicted || score_switch) {
                        emit("T1", t.timestamp, PreferenceState::secondary_preferred);
                    } else {
                        violation(t.timestamp,
                                  "secondary preferred without degradation evidence");
                        state = PreferenceState::secondary_preferred;
                    }
                    break;
                }
                case PreferenceState::degraded:
                    violation(t.timestamp, "recovery to secondary is not a modeled transition");
                    state = PreferenceState::secondary_preferred;
                    break;
            }
        }
    }
    return result;
}

}  // namespace froute::sim
