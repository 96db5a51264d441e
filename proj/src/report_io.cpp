#include "zosmd/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace zosmd {
namespace {

struct MetricRow {
  long t;
  std::string metric;
  int index;  // 0 = joint, otherwise 1-based distribution index
  double value;
};

std::string index_label(int idx) { return idx == 0 ? "joint" : std::to_string(idx); }

void checkpoint_rows(const CheckpointMetrics& cm, Variant variant, std::vector<MetricRow>& rows) {
  auto add = [&](const std::string& name, int idx, double v) {
    if (std::isfinite(v)) rows.push_back({cm.t, name, idx, v});
  };
  for (std::size_t i = 0; i < cm.excess_inner.size(); ++i) {
    add("excess_inner", static_cast<int>(i) + 1, cm.excess_inner[i]);
  }
  for (std::size_t i = 0; i < cm.excess_outer.size(); ++i) {
    add("excess_outer", static_cast<int>(i) + 1, cm.excess_outer[i]);
  }
  add("excess_outer_max", 0, cm.max_excess_outer);
  add("eps_phi", 0, cm.eps_phi);
  for (std::size_t i = 0; i < cm.risk_estimates.size(); ++i) {
    add("risk_estimate", static_cast<int>(i) + 1, cm.risk_estimates[i]);
  }
  for (std::size_t i = 0; i < cm.rstar_estimates.size(); ++i) {
    add("rstar_estimate", static_cast<int>(i) + 1, cm.rstar_estimates[i]);
  }
  add("eta_inner", 0, cm.sched.eta_inner);
  add("eta_w", 0, cm.sched.eta_w);
  add("eta_q", 0, cm.sched.eta_q);
  if (variant == Variant::Smooth) add("mu", 0, cm.sched.mu);
  if (variant == Variant::NonSmooth) {
    add("mu1", 0, cm.sched.mu1);
    add("mu2", 0, cm.sched.mu2);
  }
  add("grad_dual_norm", 0, cm.grad_dual_norm);
  rows.push_back({cm.t, "oracle_grad_calls", 0, static_cast<double>(cm.grad_calls)});
  rows.push_back({cm.t, "oracle_value_calls", 0, static_cast<double>(cm.value_calls)});
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string metrics_csv(const RunReport& rep, Variant variant) {
  std::vector<MetricRow> rows;
  for (const auto& cm : rep.checkpoints) checkpoint_rows(cm, variant, rows);
  std::stable_sort(rows.begin(), rows.end(), [](const MetricRow& a, const MetricRow& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.metric != b.metric) return a.metric < b.metric;
    return a.index < b.index;
  });
  std::ostringstream out;
  out << "t,index,metric,value,log10_t,log10_value\n";
  for (const auto& row : rows) {
    out << row.t << ',' << index_label(row.index) << ',' << row.metric << ','
        << format_double(row.value) << ',' << format_double(std::log10(static_cast<double>(row.t)))
        << ',';
    if (row.value > 0.0) out << format_double(std::log10(row.value));
    out << '\n';
  }
  return out.str();
}

std::string timings_csv(const RunReport& rep) {
  std::ostringstream out;
  out << "t,wall_seconds\n";
  for (const auto& cm : rep.checkpoints) {
    out << cm.t << ',' << format_double(cm.wall_seconds) << '\n';
  }
  out << "total," << format_double(rep.wall_seconds) << '\n';
  return out.str();
}

nlohmann::json report_json(const ExperimentConfig& cfg, const RunReport& rep) {
  using nlohmann::json;
  json j;
  j["schema_version"] = 1;
  j["config"] = config_to_json(cfg);
  j["completed"] = rep.completed;
  if (!rep.error.empty()) j["error"] = rep.error;
  if (std::isfinite(rep.mero_opt)) {
    j["mero_optimum"] = rep.mero_opt;
    j["mero_optimum_exact"] = rep.mero_opt_exact;
  }
  j["oracle"] = {{"value_calls", rep.value_calls}, {"grad_calls", rep.grad_calls}};
  json cps = json::array();
  for (const auto& cm : rep.checkpoints) {
    json c;
    c["t"] = cm.t;
    if (!cm.rstar_estimates.empty()) c["rstar_estimates"] = cm.rstar_estimates;
    if (!cm.excess_inner.empty()) c["excess_inner"] = cm.excess_inner;
    if (!cm.excess_outer.empty()) c["excess_outer"] = cm.excess_outer;
    if (std::isfinite(cm.max_excess_outer)) c["excess_outer_max"] = cm.max_excess_outer;
    if (std::isfinite(cm.eps_phi)) c["eps_phi"] = cm.eps_phi;
    if (!cm.risk_estimates.empty()) c["risk_estimates"] = cm.risk_estimates;
    c["value_calls"] = cm.value_calls;
    c["grad_calls"] = cm.grad_calls;
    c["eta_inner"] = cm.sched.eta_inner;
    c["eta_w"] = cm.sched.eta_w;
    c["eta_q"] = cm.sched.eta_q;
    if (cm.sched.mu > 0.0) c["mu"] = cm.sched.mu;
    if (cm.sched.mu1 > 0.0) {
      c["mu1"] = cm.sched.mu1;
      c["mu2"] = cm.sched.mu2;
    }
    c["grad_dual_norm"] = cm.grad_dual_norm;
    cps.push_back(std::move(c));
  }
  j["checkpoints"] = cps;
  if (rep.eps_phi_slope.used_points >= 2 && std::isfinite(rep.eps_phi_slope.slope)) {
    j["slope"] = {{"slope", rep.eps_phi_slope.slope},
                  {"intercept", rep.eps_phi_slope.intercept},
                  {"residual_rms", rep.eps_phi_slope.residual_rms},
                  {"used_points", rep.eps_phi_slope.used_points},
                  {"filtered", rep.eps_phi_slope.filtered}};
  }
  return j;
}

std::string compare_csv_header() {
  return "solver,variant,T,r,base_seed,seeds,final_excess_inner_mean,final_excess_outer_max,"
         "final_eps_phi,value_calls,grad_calls\n";
}

std::string compare_csv_row(const std::string& solver_label, Variant variant, long T, int r,
                            std::uint64_t base_seed, int seeds, double excess_inner_mean,
                            double excess_outer_max, double eps_phi, std::uint64_t value_calls,
                            std::uint64_t grad_calls) {
  std::ostringstream out;
  out << solver_label << ',' << to_string(variant) << ',' << T << ',' << r << ',' << base_seed
      << ',' << seeds << ',' << format_double(excess_inner_mean) << ','
      << format_double(excess_outer_max) << ',' << format_double(eps_phi) << ',' << value_calls
      << ',' << grad_calls << '\n';
  return out.str();
}

std::string aggregate_csv(const std::vector<RunReport>& reports, Variant variant) {
  // key: (t, metric, index) -> values across seeds
  std::map<std::tuple<long, std::string, int>, std::vector<double>> cells;
  for (const auto& rep : reports) {
    std::vector<MetricRow> rows;
    for (const auto& cm : rep.checkpoints) checkpoint_rows(cm, variant, rows);
    for (const auto& row : rows) {
      cells[{row.t, row.metric, row.index}].push_back(row.value);
    }
  }
  std::ostringstream out;
  out << "t,index,metric,mean,stderr,n_seeds\n";
  for (const auto& [key, vals] : cells) {
    const auto& [t, metric, index] = key;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double se =
        vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) *
                                           (static_cast<double>(vals.size()) - 1.0)))
                        : 0.0;
    out << t << ',' << index_label(index) << ',' << metric << ',' << format_double(mean) << ','
        << format_double(se) << ',' << vals.size() << '\n';
  }
  return out.str();
}

}  // namespace zosmd
