#pragma once

#include "zosmd/config.hpp"
#include "zosmd/evaluation.hpp"

#include <json.hpp>

#include <string>

namespace zosmd {

// Deterministic per-checkpoint CSV: header
// t,index,metric,value,log10_t,log10_value with rows ordered checkpoint-major,
// then metric name lexicographic, then index. Timing data is excluded so the
// bytes are reproducible; see timings_csv.
std::string metrics_csv(const RunReport& rep, Variant variant);

// Wall-clock sidecar (non-deterministic diagnostics).
std::string timings_csv(const RunReport& rep);

// Schema-versioned report embedding the fully resolved config; feeding the
// report back to the CLI reproduces the run byte for byte.
nlohmann::json report_json(const ExperimentConfig& cfg, const RunReport& rep);

// Two-row comparison table for cmd_compare; columns are fixed:
// solver,variant,T,r,base_seed,seeds,final_excess_inner_mean,
// final_excess_outer_max,final_eps_phi,value_calls,grad_calls
std::string compare_csv_header();
std::string compare_csv_row(const std::string& solver_label, Variant variant, long T, int r,
                            std::uint64_t base_seed, int seeds, double excess_inner_mean,
                            double excess_outer_max, double eps_phi, std::uint64_t value_calls,
                            std::uint64_t grad_calls);

// Mean and standard error across seeds for each (t, metric, index) row.
std::string aggregate_csv(const std::vector<RunReport>& reports, Variant variant);

std::string format_double(double v);

}  // namespace zosmd
