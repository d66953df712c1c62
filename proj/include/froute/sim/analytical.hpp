#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace froute::sim {

/// Serial availability: product of per-dependency availabilities.
/// Empty input is an error (nullopt).
std::optional<double> availability_serial(std::span<const double> avails);

/// Two-provider parallel availability: 1 - (1-a1)(1-a2).
double availability_parallel(double a1, double a2);

/// Expected failed requests during an outage of D minutes with arrival
/// rate lambda/min, switching after T minutes (clamped to D): primary
/// success p_f during the outage, secondary success p_s after the switch.
double expected_failures(double lambda_per_min, double duration_min, double switch_min,
                         double p_f, double p_s);

/// Failover latency upper bound: sum of detection, publication,
/// aggregation, refresh and decision delays.
double failover_latency_bound(double t_detect, double t_publish, double t_aggregate,
                              double t_refresh, double t_decision);

struct FailoverModelRow {
    std::string label;
    double switch_min = 0;
    double expected = 0;
    std::string note;  // non-empty for documented discrepancies
};

/// The five-row failover sensitivity table for the standard parameters
/// (lambda=1000/min, D=10 min, p_f=0.05, p_s=0.99).
std::vector<FailoverModelRow> failover_model_table(double lambda_per_min = 1000,
                                                   double duration_min = 10,
                                                   double p_f = 0.05, double p_s = 0.99);

}  // namespace froute::sim
