#pragma once

#include "zosmd/problems.hpp"
#include "zosmd/solver.hpp"

#include <limits>
#include <string>
#include <vector>

namespace zosmd {

struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double residual_rms = std::numeric_limits<double>::quiet_NaN();
  int used_points = 0;
  int filtered = 0;  // nonpositive values dropped before fitting
};

// Least-squares fit of log(value) against log(t). Needs >= 5 points.
SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points);

// min_w sum_i q_i R_i(w) over W. Dispatches to the analytic minimizer
// (projected weighted centroid) for quadratics, coordinatewise bisection for
// the separable absolute family on boxes, and the descent oracle otherwise.
Vec weighted_risk_minimizer(const Problem& p, const Vec& q);

// First-order descent oracle (projected gradient with backtracking and
// momentum) on the exact risks; evaluation tooling, not part of the solver.
Vec weighted_risk_min_descent(const Problem& p, const Vec& q, double tol = 1e-8,
                              long max_iter = 500000);

// Saddle-point optimization error
// eps_phi = max_q phi(w_bar, q) - min_w phi(w, q_bar).
double opt_error(const Problem& p, const Vec& w_bar, const Vec& q_bar);

struct MeroOptimum {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool exact = false;
};

// OPT = min_w max_i [R_i(w) - R_i*]. Exact for quadratics with an interior
// saddle (active-set enumeration) and for two-distribution absolute fixtures
// (golden section over the simplex); numeric mirror-ascent bound otherwise.
MeroOptimum mero_optimum(const Problem& p);

struct CheckpointMetrics {
  long t = 0;
  std::vector<double> rstar_estimates;  // R_i(wi_bar): the running R_i* estimates
  std::vector<double> excess_inner;     // R_i(wi_bar) - R_i*
  std::vector<double> excess_outer;     // R_i(w_bar) - R_i*
  double max_excess_outer = std::numeric_limits<double>::quiet_NaN();
  double eps_phi = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> risk_estimates;  // empirical problems: Monte-Carlo R_i(w_bar)
  std::uint64_t value_calls = 0;
  std::uint64_t grad_calls = 0;
  Schedules sched;
  double grad_dual_norm = 0.0;
  double wall_seconds = 0.0;
};

struct RunReport {
  std::vector<CheckpointMetrics> checkpoints;
  SlopeFit eps_phi_slope;
  double mero_opt = std::numeric_limits<double>::quiet_NaN();
  bool mero_opt_exact = false;
  bool completed = false;
  std::string error;
  std::uint64_t value_calls = 0;
  std::uint64_t grad_calls = 0;
  double wall_seconds = 0.0;
};

// Turns a solver trajectory into per-checkpoint metrics. Synthetic problems
// get exact excess risks and eps_phi; empirical problems get Monte-Carlo risk
// estimates instead.
RunReport evaluate(const Problem& p, const Trajectory& traj, long mc_risk_draws = 20000);

struct DistributionDiagnostics {
  int i = 0;
  Vec empirical_mean;
  Vec analytic_grad;
  Vec mc_margin;             // componentwise 4*sigma_hat/sqrt(N)
  double bias_norm = 0.0;
  double bias_cap = 0.0;     // d*L*mu/2 at the theorem schedule value
  double second_moment = 0.0;
  double second_moment_bound = 0.0;  // smooth: analytic cap; non-smooth: c=10 envelope
  double fitted_c = 0.0;             // non-smooth only
  bool bias_ok = true;
  bool moment_ok = true;
};

struct DiagnosticsReport {
  Variant variant = Variant::Smooth;
  long N = 0;
  double probe_mu = 0.0, probe_mu1 = 0.0, probe_mu2 = 0.0;
  double bound_mu = 0.0, bound_mu1 = 0.0, bound_mu2 = 0.0;
  std::vector<DistributionDiagnostics> per_distribution;
  bool all_ok = false;
};

// Monte-Carlo bias/second-moment check of the configured estimator at w
// against the analytic bounds. Probes use mu_scale times the round-1 theorem
// schedule; the bounds stay pinned at the theorem values, so an oversized
// smoothing radius is flagged.
DiagnosticsReport estimator_diagnostics(const Problem& p, const Vec& w, Variant variant,
                                        double mu_scale, long N, std::uint64_t seed,
                                        SmoothingPair pair = SmoothingPair::BallBall);

}  // namespace zosmd
