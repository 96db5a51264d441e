#pragma once

#include "zosmd/estimators.hpp"
#include "zosmd/geometry.hpp"
#include "zosmd/problems.hpp"
#include "zosmd/sampling.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace zosmd {

enum class Variant { Smooth, NonSmooth, FirstOrderBaseline };

const char* to_string(Variant v);

struct SolverConfig {
  Variant variant = Variant::Smooth;
  long T = 2;
  int r = 1;
  std::uint64_t seed = 0;
  // Optional multipliers on the theorem-prescribed step sizes and smoothing
  // radii; 1.0 means the literal theorem values.
  double eta_scale = 1.0;
  double mu_scale = 1.0;
  std::vector<long> checkpoints;  // empty selects the geometric grid {2,4,...,T}
  SmoothingPair pair = SmoothingPair::BallBall;
  bool share_outer_directions = true;   // one {u_j} set per round across i
  bool share_inner_directions = false;  // inner draws fresh per (i, j)
  bool resample_outer = false;          // ablation: outer gradients resample z
  bool schedule_fallback = false;       // allow missing L/L* (defaults to 1)
  int workers = 1;

  // Test seam: overrides the sampled directions. Arguments are
  // (t, i, j, inner); must return a unit vector of the problem dimension.
  std::function<Vec(long, int, int, bool)> direction_override;
};

// Step sizes and smoothing radii at round t. Smooth runs fill mu; non-smooth
// runs fill mu1/mu2; the baseline fills only the etas.
struct Schedules {
  double eta_inner = 0.0;
  double eta_w = 0.0;
  double eta_q = 0.0;
  double mu = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
};

Schedules schedule_eval(const SolverConfig& cfg, const Problem& p, const GeometryConfig& geo,
                        long t);

std::vector<long> geometric_checkpoints(long T);

// Weighted prefix sums supporting the moving-window partial average
// w̄_t = sum_{j=ceil(t/2)}^{t} eta_j w_j / sum eta_j in O(1) per query.
class PrefixAverager {
 public:
  explicit PrefixAverager(int dim);
  void push(double eta, const Vec& x);
  Vec average(long t) const;
  long rounds() const { return static_cast<long>(eta_sums_.size()) - 1; }

 private:
  std::vector<Vec> sums_;
  std::vector<double> eta_sums_;
};

struct CheckpointSnapshot {
  long t = 0;
  Vec w_bar;
  Vec q_bar;
  std::vector<Vec> wi_bar;
  std::uint64_t value_calls = 0;
  std::uint64_t grad_calls = 0;
  Schedules sched;
  double grad_dual_norm = 0.0;  // product dual norm of the round's (g_w, g_q)
  double wall_seconds = 0.0;    // cumulative; diagnostics only
};

struct Trajectory {
  std::vector<CheckpointSnapshot> snapshots;
  bool completed = false;
  std::string error;
  std::uint64_t value_calls = 0;
  std::uint64_t grad_calls = 0;
  double wall_seconds = 0.0;
};

// Per-round view handed to the observer before the round's updates are
// applied; used by tests to audit feasibility and partial averages.
struct RoundView {
  long t;
  const Vec& w;
  const Vec& q;
  const std::vector<Vec>& wi;
  const Schedules& sched;
};
using RoundObserver = std::function<void(const RoundView&)>;

class Solver {
 public:
  Solver(const Problem& p, const SolverConfig& cfg);

  // Executes rounds 1..T, materializing a snapshot at every checkpoint.
  Trajectory run(const RoundObserver& observer = {});

  // Executes a single round (sampling, m inner updates, partial averages,
  // outer (w, q) update). Exposed for step-level tests.
  void step();

  long round() const { return t_; }  // next round to execute, 1-based
  const Vec& w() const { return w_; }
  const Vec& q() const { return q_; }
  const std::vector<Vec>& wi() const { return wi_; }
  Vec w_bar(long t) const { return w_avg_.average(t); }
  Vec q_bar(long t) const { return q_avg_.average(t); }
  Vec wi_bar(int i, long t) const { return wi_avg_[static_cast<std::size_t>(i)].average(t); }
  std::uint64_t value_calls() const { return value_calls_; }
  std::uint64_t grad_calls() const { return grad_calls_; }
  double last_grad_dual_norm() const { return last_grad_dual_norm_; }
  const GeometryConfig& geometry() const { return geo_; }

 private:
  double counted_loss(const Vec& w, const Vec& z);
  Vec counted_grad(const Vec& w, const Vec& z);
  std::vector<std::vector<Vec>> draw_batches(long t, StreamPurpose purpose);
  Vec direction(long t, int i, int j, bool inner);
  std::pair<Vec, Vec> direction_pair(long t, int i, int j, bool inner);
  void inner_phase(long t, const Schedules& s, const std::vector<std::vector<Vec>>& batches,
                   std::vector<Vec>& wi_next);
  void outer_phase(long t, const Schedules& s, const std::vector<std::vector<Vec>>& batches,
                   const std::vector<Vec>& anchors);

  const Problem& p_;
  SolverConfig cfg_;
  GeometryConfig geo_;
  RandomStream root_;
  long t_ = 1;
  Vec w_;
  Vec q_;
  std::vector<Vec> wi_;
  PrefixAverager w_avg_;
  PrefixAverager q_avg_;
  std::vector<PrefixAverager> wi_avg_;
  std::uint64_t value_calls_ = 0;
  std::uint64_t grad_calls_ = 0;
  double last_grad_dual_norm_ = 0.0;
};

Trajectory run_solver(const Problem& p, const SolverConfig& cfg, const RoundObserver& obs = {});

}  // namespace zosmd
