#pragma once

#include <string>
#include <vector>

#include "froute/sim/engine.hpp"

namespace froute::sim {

/// Provider-preference states reconstructed from a two-provider run.
enum class PreferenceState : std::uint8_t {
    primary_preferred,
    secondary_preferred,
    probe_primary,
    degraded,
};

std::string_view to_string(PreferenceState v) noexcept;

struct ObservedTransition {
    std::string tag;  // T1..T6
    Millis ts = 0;
    std::string scope;
    PreferenceState from = PreferenceState::primary_preferred;
    PreferenceState to = PreferenceState::primary_preferred;
};

struct ConformanceResult {
    bool conformant = true;
    std::vector<ObservedTransition> transitions;
    std::vector<std::string> violations;  // "nonconforming_transition at ts=..."

    [[nodiscard]] bool saw(std::string_view tag) const;
    [[nodiscard]] std::string path(const std::string& scope) const;
};

/// Verifies that every preference change observed in the report is one of
/// the six legal transitions, with its precondition:
///   T1 primary->secondary: degradation or open circuit
///   T2 secondary->probe:   circuit half-open, probe dispatched
///   T3 probe->primary:     sustained recovery over the required windows
///   T4 probe->secondary:   probe failure (circuit reopens)
///   T5 secondary->degraded: all providers fail gates
///   T6 degraded->primary:  provider recovery
ConformanceResult check_state_machine(const SimReport& report, const Scenario& scenario);

}  // namespace froute::sim
