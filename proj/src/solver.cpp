#include "zosmd/solver.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace zosmd {
namespace {

constexpr double kSqrt2 = 1.4142135623730950488;

// Static work distribution by atomic index; each task writes only its own
// slot, so results do not depend on how indices land on threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<int> next{0};
    auto body = [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min(workers, n);
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int k = 0; k < nthreads; ++k) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }
  for (const auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

double require_constant(const std::optional<double>& c, const char* name, bool fallback) {
  if (c.has_value()) return *c;
  if (fallback) return 1.0;
  std::ostringstream msg;
  msg << "schedule_eval: missing constant " << name
      << " for the chosen variant (set schedule_fallback to proceed with " << name << "=1)";
  throw std::invalid_argument(msg.str());
}

double finite_or_throw(double v, long t, int i) {
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << "round " << t << ", distribution " << (i + 1) << ": non-finite loss value";
    throw EstimatorError(msg.str());
  }
  return v;
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Smooth: return "smooth";
    case Variant::NonSmooth: return "non-smooth";
    case Variant::FirstOrderBaseline: return "first-order-baseline";
  }
  return "?";
}

Schedules schedule_eval(const SolverConfig& cfg, const Problem& p, const GeometryConfig& geo,
                        long t) {
  if (t < 1) throw std::invalid_argument("schedule_eval: t must be >= 1");
  const double d = static_cast<double>(p.dim());
  const double sq = std::sqrt(static_cast<double>(t) + 1.0);
  const double lnm = std::log(static_cast<double>(geo.m));
  const double tau1 = geo.tau1;
  const double tau2 = geo.tau2;
  Schedules s;
  switch (cfg.variant) {
    case Variant::Smooth: {
      const double L = require_constant(p.constants().L, "L", cfg.schedule_fallback);
      s.mu = cfg.mu_scale * 2.0 / (tau1 * L * sq);
      s.eta_inner = cfg.eta_scale / (kSqrt2 * tau1 * tau2 * d * sq);
      s.eta_w = cfg.eta_scale * 2.0 * geo.D2 / (kSqrt2 * tau1 * tau2 * d * sq);
      s.eta_q = cfg.eta_scale * 2.0 * lnm / (kSqrt2 * tau1 * tau2 * d * sq);
      break;
    }
    case Variant::NonSmooth: {
      const double Ls = require_constant(p.constants().Lstar, "L*", cfg.schedule_fallback);
      s.eta_inner = cfg.eta_scale * kSqrt2 / (tau2 * Ls * d * sq);
      s.eta_w = cfg.eta_scale * 2.0 * geo.D2 / (kSqrt2 * tau1 * tau2 * Ls * d * sq);
      s.eta_q = cfg.eta_scale * 2.0 * lnm / (kSqrt2 * tau1 * tau2 * Ls * d * sq);
      s.mu1 = cfg.mu_scale / (static_cast<double>(t) + 1.0);
      s.mu2 = cfg.mu_scale / (d * (static_cast<double>(t) + 1.0) * (static_cast<double>(t) + 1.0));
      break;
    }
    case Variant::FirstOrderBaseline: {
      // Same step-size family as the matching ZO variant; only the gradient
      // differs (exact per-sample gradients).
      if (p.constants().L.has_value() || !p.constants().Lstar.has_value()) {
        const double L = require_constant(p.constants().L, "L", cfg.schedule_fallback);
        (void)L;
        s.eta_inner = cfg.eta_scale / (kSqrt2 * tau1 * tau2 * d * sq);
        s.eta_w = cfg.eta_scale * 2.0 * geo.D2 / (kSqrt2 * tau1 * tau2 * d * sq);
        s.eta_q = cfg.eta_scale * 2.0 * lnm / (kSqrt2 * tau1 * tau2 * d * sq);
      } else {
        const double Ls = *p.constants().Lstar;
        s.eta_inner = cfg.eta_scale * kSqrt2 / (tau2 * Ls * d * sq);
        s.eta_w = cfg.eta_scale * 2.0 * geo.D2 / (kSqrt2 * tau1 * tau2 * Ls * d * sq);
        s.eta_q = cfg.eta_scale * 2.0 * lnm / (kSqrt2 * tau1 * tau2 * Ls * d * sq);
      }
      break;
    }
  }
  return s;
}

std::vector<long> geometric_checkpoints(long T) {
  std::vector<long> cps;
  for (long c = 2; c <= T; c *= 2) cps.push_back(c);
  if (cps.empty() || cps.back() != T) cps.push_back(T);
  return cps;
}

PrefixAverager::PrefixAverager(int dim) {
  sums_.push_back(Vec::Zero(dim));
  eta_sums_.push_back(0.0);
}

void PrefixAverager::push(double eta, const Vec& x) {
  sums_.push_back(sums_.back() + eta * x);
  eta_sums_.push_back(eta_sums_.back() + eta);
}

Vec PrefixAverager::average(long t) const {
  if (t < 1 || t > rounds()) throw std::invalid_argument("partial average: t out of range");
  const auto hi = static_cast<std::size_t>(t);
  const auto lo = static_cast<std::size_t>((t + 1) / 2);  // ceil(t/2)
  const double denom = eta_sums_[hi] - eta_sums_[lo - 1];
  return (sums_[hi] - sums_[lo - 1]) / denom;
}

Solver::Solver(const Problem& p, const SolverConfig& cfg)
    : p_(p),
      cfg_(cfg),
      geo_(GeometryConfig::for_domain(p.domain(), p.m())),
      root_(cfg.seed),
      w_avg_(p.dim()),
      q_avg_(p.m()) {
  if (cfg_.T < 2) throw std::invalid_argument("T must be >= 2");
  if (cfg_.r < 1) throw std::invalid_argument("r must be >= 1");
  if (cfg_.workers < 1) throw std::invalid_argument("workers must be >= 1");
  if (cfg_.checkpoints.empty()) {
    cfg_.checkpoints = geometric_checkpoints(cfg_.T);
  } else {
    long prev = 0;
    for (long c : cfg_.checkpoints) {
      if (c < 2 || c > cfg_.T) throw std::invalid_argument("checkpoints must lie in [2, T]");
      if (c <= prev) throw std::invalid_argument("checkpoints must be strictly increasing");
      prev = c;
    }
  }
  if (cfg_.variant == Variant::FirstOrderBaseline && !p_.has_loss_grad()) {
    throw std::invalid_argument("first-order baseline needs per-sample gradients (synthetic specs)");
  }
  // Algorithm line 1: w_1 = w_1^(i) = argmin nu_w, q_1 uniform.
  w_ = p_.domain().dgf_center();
  q_ = uniform_simplex(p_.m());
  wi_.assign(static_cast<std::size_t>(p_.m()), w_);
  wi_avg_.assign(static_cast<std::size_t>(p_.m()), PrefixAverager(p_.dim()));
  // Validate schedule constants up front so misconfiguration fails fast.
  (void)schedule_eval(cfg_, p_, geo_, 1);
}

std::vector<std::vector<Vec>> Solver::draw_batches(long t, StreamPurpose purpose) {
  std::vector<std::vector<Vec>> batches(static_cast<std::size_t>(p_.m()));
  for (int i = 0; i < p_.m(); ++i) {
    auto& batch = batches[static_cast<std::size_t>(i)];
    batch.reserve(static_cast<std::size_t>(cfg_.r));
    for (int j = 0; j < cfg_.r; ++j) {
      RandomStream s = root_.fork(purpose, static_cast<std::uint64_t>(t),
                                  static_cast<std::uint64_t>(i + 1),
                                  static_cast<std::uint64_t>(j + 1));
      batch.push_back(p_.draw(i, s));
    }
  }
  return batches;
}

Vec Solver::direction(long t, int i, int j, bool inner) {
  if (cfg_.direction_override) return cfg_.direction_override(t, i, j, inner);
  const bool shared = inner ? cfg_.share_inner_directions : cfg_.share_outer_directions;
  RandomStream s = root_.fork(inner ? StreamPurpose::InnerDirection : StreamPurpose::OuterDirection,
                              static_cast<std::uint64_t>(t),
                              shared ? 0 : static_cast<std::uint64_t>(i + 1),
                              static_cast<std::uint64_t>(j + 1));
  return sample_unit_sphere(s, p_.dim());
}

std::pair<Vec, Vec> Solver::direction_pair(long t, int i, int j, bool inner) {
  const bool shared = inner ? cfg_.share_inner_directions : cfg_.share_outer_directions;
  RandomStream s = root_.fork(inner ? StreamPurpose::InnerDirection : StreamPurpose::OuterDirection,
                              static_cast<std::uint64_t>(t),
                              shared ? 0 : static_cast<std::uint64_t>(i + 1),
                              static_cast<std::uint64_t>(j + 1));
  return sample_smoothing_pair(s, cfg_.pair, p_.dim());
}

void Solver::inner_phase(long t, const Schedules& s, const std::vector<std::vector<Vec>>& batches,
                         std::vector<Vec>& wi_next) {
  const int m = p_.m();
  const double d = static_cast<double>(p_.dim());
  const double inv_r = 1.0 / static_cast<double>(cfg_.r);
  std::vector<std::uint64_t> vcalls(static_cast<std::size_t>(m), 0);
  std::vector<std::uint64_t> gcalls(static_cast<std::size_t>(m), 0);
  parallel_for(m, cfg_.workers, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    const Vec& wi = wi_[ui];
    Vec est = Vec::Zero(p_.dim());
    for (int j = 0; j < cfg_.r; ++j) {
      const Vec& z = batches[ui][static_cast<std::size_t>(j)];
      switch (cfg_.variant) {
        case Variant::Smooth: {
          const Vec u = direction(t, i, j, true);
          const double fwd = finite_or_throw(p_.loss(wi + s.mu * u, z), t, i);
          const double base = finite_or_throw(p_.loss(wi, z), t, i);
          vcalls[ui] += 2;
          est += ((fwd - base) * d / s.mu) * u;
          break;
        }
        case Variant::NonSmooth: {
          const auto [u, v] = direction_pair(t, i, j, true);
          const Vec probe = wi + s.mu1 * u;
          const double fwd = finite_or_throw(p_.loss(probe + s.mu2 * v, z), t, i);
          const double base = finite_or_throw(p_.loss(probe, z), t, i);
          vcalls[ui] += 2;
          est += ((fwd - base) / s.mu2) * v;
          break;
        }
        case Variant::FirstOrderBaseline: {
          est += p_.loss_grad(wi, z);
          gcalls[ui] += 1;
          break;
        }
      }
    }
    est *= inv_r;
    try {
      wi_next[ui] = mirror_step_weight(wi, est, s.eta_inner, p_.domain());
    } catch (const EstimatorError& e) {
      std::ostringstream msg;
      msg << "round " << t << ", distribution " << (i + 1) << ": " << e.what();
      throw EstimatorError(msg.str());
    }
  });
  for (int i = 0; i < m; ++i) {
    value_calls_ += vcalls[static_cast<std::size_t>(i)];
    grad_calls_ += gcalls[static_cast<std::size_t>(i)];
  }
}

void Solver::outer_phase(long t, const Schedules& s, const std::vector<std::vector<Vec>>& batches,
                         const std::vector<Vec>& anchors) {
  const int m = p_.m();
  const int r = cfg_.r;
  const double d = static_cast<double>(p_.dim());
  const double inv_r = 1.0 / static_cast<double>(r);
  std::vector<Vec> per_dist(static_cast<std::size_t>(m));
  Vec gq(m);
  std::vector<std::uint64_t> vcalls(static_cast<std::size_t>(m), 0);
  std::vector<std::uint64_t> gcalls(static_cast<std::size_t>(m), 0);
  parallel_for(m, cfg_.workers, [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    Vec est = Vec::Zero(p_.dim());
    double gq_acc = 0.0;
    for (int j = 0; j < r; ++j) {
      const Vec& z = batches[ui][static_cast<std::size_t>(j)];
      // l(w_t; z) is shared between the w-gradient and the q-gradient, so it
      // is evaluated (and counted) once per (i, j).
      double base = 0.0;
      switch (cfg_.variant) {
        case Variant::Smooth: {
          const Vec u = direction(t, i, j, false);
          base = finite_or_throw(p_.loss(w_, z), t, i);
          const double fwd = finite_or_throw(p_.loss(w_ + s.mu * u, z), t, i);
          vcalls[ui] += 2;
          est += ((fwd - base) * d / s.mu) * u;
          break;
        }
        case Variant::NonSmooth: {
          const auto [u, v] = direction_pair(t, i, j, false);
          const Vec probe = w_ + s.mu1 * u;
          const double fwd = finite_or_throw(p_.loss(probe + s.mu2 * v, z), t, i);
          const double mid = finite_or_throw(p_.loss(probe, z), t, i);
          base = finite_or_throw(p_.loss(w_, z), t, i);
          vcalls[ui] += 3;
          est += ((fwd - mid) / s.mu2) * v;
          break;
        }
        case Variant::FirstOrderBaseline: {
          est += p_.loss_grad(w_, z);
          gcalls[ui] += 1;
          base = finite_or_throw(p_.loss(w_, z), t, i);
          vcalls[ui] += 1;
          break;
        }
      }
      const double anchor_val = finite_or_throw(p_.loss(anchors[ui], z), t, i);
      vcalls[ui] += 1;
      gq_acc += base - anchor_val;
    }
    per_dist[ui] = est * inv_r;
    gq[i] = gq_acc * inv_r;
  });
  Vec gw = Vec::Zero(p_.dim());
  for (int i = 0; i < m; ++i) {
    gw += q_[i] * per_dist[static_cast<std::size_t>(i)];
    value_calls_ += vcalls[static_cast<std::size_t>(i)];
    grad_calls_ += gcalls[static_cast<std::size_t>(i)];
  }
  const double gq_inf = gq.cwiseAbs().maxCoeff();
  last_grad_dual_norm_ = std::sqrt(2.0 * geo_.D2 * gw.squaredNorm() +
                                   2.0 * std::log(static_cast<double>(m)) * gq_inf * gq_inf);
  try {
    w_ = mirror_step_weight(w_, gw, s.eta_w, p_.domain());
  } catch (const EstimatorError& e) {
    std::ostringstream msg;
    msg << "round " << t << ", joint update: " << e.what();
    throw EstimatorError(msg.str());
  }
  q_ = mirror_step_simplex(q_, gq, s.eta_q);
}

void Solver::step() {
  const long t = t_;
  if (t > cfg_.T) throw std::logic_error("step: past the configured horizon");
  const Schedules s = schedule_eval(cfg_, p_, geo_, t);

  w_avg_.push(s.eta_w, w_);
  q_avg_.push(p_.m() == 1 ? 1.0 : s.eta_q, q_);
  for (int i = 0; i < p_.m(); ++i) {
    wi_avg_[static_cast<std::size_t>(i)].push(s.eta_inner, wi_[static_cast<std::size_t>(i)]);
  }

  auto batches = draw_batches(t, StreamPurpose::Sample);

  std::vector<Vec> wi_next(static_cast<std::size_t>(p_.m()));
  inner_phase(t, s, batches, wi_next);

  std::vector<Vec> anchors(static_cast<std::size_t>(p_.m()));
  for (int i = 0; i < p_.m(); ++i) {
    anchors[static_cast<std::size_t>(i)] = wi_avg_[static_cast<std::size_t>(i)].average(t);
  }

  if (cfg_.resample_outer) {
    const auto outer_batches = draw_batches(t, StreamPurpose::Evaluation);
    outer_phase(t, s, outer_batches, anchors);
  } else {
    outer_phase(t, s, batches, anchors);
  }

  wi_ = std::move(wi_next);
  ++t_;
}

Trajectory Solver::run(const RoundObserver& observer) {
  Trajectory traj;
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&start] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  std::size_t next_cp = 0;
  try {
    for (long t = 1; t <= cfg_.T; ++t) {
      if (observer) {
        const Schedules s = schedule_eval(cfg_, p_, geo_, t);
        observer(RoundView{t, w_, q_, wi_, s});
      }
      step();
      if (next_cp < cfg_.checkpoints.size() && cfg_.checkpoints[next_cp] == t) {
        CheckpointSnapshot snap;
        snap.t = t;
        snap.w_bar = w_avg_.average(t);
        snap.q_bar = q_avg_.average(t);
        snap.wi_bar.reserve(static_cast<std::size_t>(p_.m()));
        for (int i = 0; i < p_.m(); ++i) snap.wi_bar.push_back(wi_bar(i, t));
        snap.value_calls = value_calls_;
        snap.grad_calls = grad_calls_;
        snap.sched = schedule_eval(cfg_, p_, geo_, t);
        snap.grad_dual_norm = last_grad_dual_norm_;
        snap.wall_seconds = elapsed();
        traj.snapshots.push_back(std::move(snap));
        ++next_cp;
      }
    }
    traj.completed = true;
  } catch (const std::exception& e) {
    traj.completed = false;
    traj.error = e.what();
  }
  traj.value_calls = value_calls_;
  traj.grad_calls = grad_calls_;
  traj.wall_seconds = elapsed();
  return traj;
}

Trajectory run_solver(const Problem& p, const SolverConfig& cfg, const RoundObserver& obs) {
  Solver solver(p, cfg);
  return solver.run(obs);
}

}  // namespace zosmd
