#include "zosmd/evaluation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace zosmd {
namespace {

double weighted_risk_value(const Problem& p, const Vec& q, const Vec& w) {
  double acc = 0.0;
  for (int i = 0; i < p.m(); ++i) acc += q[i] * p.risk_exact(i, w);
  return acc;
}

Vec weighted_risk_grad(const Problem& p, const Vec& q, const Vec& w) {
  Vec g = Vec::Zero(p.dim());
  for (int i = 0; i < p.m(); ++i) g += q[i] * p.risk_grad(i, w);
  return g;
}

// Coordinatewise bisection for the separable absolute family on a box: the
// per-coordinate derivative of the weighted risk is nondecreasing.
Vec absolute_box_minimizer(const PiecewiseAbsolute& p, const Vec& q) {
  const WeightDomain& dom = p.domain();
  Vec w(dom.dim());
  for (int k = 0; k < dom.dim(); ++k) {
    auto deriv = [&](double x) {
      double acc = 0.0;
      for (int i = 0; i < p.m(); ++i) {
        Vec point = Vec::Zero(dom.dim());
        point[k] = x;
        acc += q[i] * p.risk_grad(i, point)[k];
      }
      return acc;
    };
    double lo = dom.lo()[k], hi = dom.hi()[k];
    if (deriv(lo) >= 0.0) {
      w[k] = lo;
      continue;
    }
    if (deriv(hi) <= 0.0) {
      w[k] = hi;
      continue;
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (deriv(mid) < 0.0 ? lo : hi) = mid;
    }
    w[k] = 0.5 * (lo + hi);
  }
  return w;
}

// Active-set enumeration for min_w max_i [0.5*||w - c_i||^2 + k_i] over W.
// Equal Hessians make every KKT candidate a small linear solve in the simplex
// weights q: the stationarity condition fixes the free coordinates of w at
// the weighted centroid, and the equalization rows f_i = f_0 are linear in w.
// Balls are handled for interior saddles; boxes enumerate the clamp patterns
// as well, so boundary-active saddles stay exact.
struct EqualCurvatureMinimax {
  const ShiftedQuadratic& p;
  std::vector<double> k;

  explicit EqualCurvatureMinimax(const ShiftedQuadratic& prob) : p(prob) {
    k.resize(static_cast<std::size_t>(p.m()));
    for (int i = 0; i < p.m(); ++i) {
      const auto u = static_cast<std::size_t>(i);
      const double s = p.noise_scales()[u];
      k[u] = 0.5 * s * s * p.dim() + p.offsets()[u] - p.rstar_exact(i);
    }
  }

  double f(int i, const Vec& w) const {
    const auto u = static_cast<std::size_t>(i);
    return 0.5 * (w - p.centers()[u]).squaredNorm() + k[u];
  }

  bool dominated(const Vec& w, double v) const {
    for (int i = 0; i < p.m(); ++i) {
      if (f(i, w) > v + 1e-9) return true;
    }
    return false;
  }

  // rows: sum q = 1 plus the equalization constraints, with w(q) affine in q
  // (clamped coordinates fixed, free coordinates at the weighted centroid).
  bool solve_pattern(const std::vector<int>& A, const std::vector<int>& pattern, double& value) {
    const int s = static_cast<int>(A.size());
    const int d = p.dim();
    const auto& centers = p.centers();
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(s, s);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(s);
    M.row(0).setOnes();
    rhs[0] = 1.0;
    auto bound_at = [&](int kk) {
      return pattern[static_cast<std::size_t>(kk)] == 1 ? p.domain().lo()[kk]
                                                        : p.domain().hi()[kk];
    };
    const Vec& c0 = centers[static_cast<std::size_t>(A[0])];
    for (int row = 1; row < s; ++row) {
      const Vec& ci = centers[static_cast<std::size_t>(A[row])];
      const Vec v = c0 - ci;
      double r = 0.5 * (c0.squaredNorm() - ci.squaredNorm()) +
                 (k[static_cast<std::size_t>(A[0])] - k[static_cast<std::size_t>(A[row])]);
      for (int kk = 0; kk < d; ++kk) {
        if (pattern.empty() || pattern[static_cast<std::size_t>(kk)] == 0) {
          for (int col = 0; col < s; ++col) {
            M(row, col) += centers[static_cast<std::size_t>(A[col])][kk] * v[kk];
          }
        } else {
          r -= bound_at(kk) * v[kk];
        }
      }
      rhs[row] = r;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) return false;
    const Eigen::VectorXd qa = lu.solve(rhs);
    if (!qa.allFinite() || qa.minCoeff() < -1e-10) return false;
    Vec centroid = Vec::Zero(d);
    for (int col = 0; col < s; ++col) {
      centroid += qa[col] * centers[static_cast<std::size_t>(A[col])];
    }
    Vec w(d);
    for (int kk = 0; kk < d; ++kk) {
      if (pattern.empty() || pattern[static_cast<std::size_t>(kk)] == 0) {
        w[kk] = centroid[kk];
        if (!pattern.empty() &&
            (w[kk] < p.domain().lo()[kk] - 1e-10 || w[kk] > p.domain().hi()[kk] + 1e-10)) {
          return false;
        }
      } else if (pattern[static_cast<std::size_t>(kk)] == 1) {
        w[kk] = p.domain().lo()[kk];
        if (centroid[kk] > w[kk] + 1e-10) return false;  // KKT: gradient points outward
      } else {
        w[kk] = p.domain().hi()[kk];
        if (centroid[kk] < w[kk] - 1e-10) return false;
      }
    }
    if (pattern.empty() && !p.domain().contains(w, 1e-9)) return false;
    const double v = f(A[0], w);
    if (dominated(w, v)) return false;
    value = v;
    return true;
  }

  MeroOptimum run() {
    const int m = p.m();
    MeroOptimum best;
    best.value = std::numeric_limits<double>::infinity();
    std::vector<std::vector<int>> patterns;
    if (p.domain().kind() == DomainKind::Box) {
      const int d = p.dim();
      std::vector<int> pattern(static_cast<std::size_t>(d), 0);
      long total = 1;
      for (int kk = 0; kk < d; ++kk) total *= 3;
      for (long code = 0; code < total; ++code) {
        long c = code;
        for (int kk = 0; kk < d; ++kk) {
          pattern[static_cast<std::size_t>(kk)] = static_cast<int>(c % 3);
          c /= 3;
        }
        patterns.push_back(pattern);
      }
    } else {
      patterns.push_back({});  // interior-only candidates for the ball
    }
    for (unsigned mask = 1; mask < (1u << m); ++mask) {
      std::vector<int> A;
      for (int i = 0; i < m; ++i) {
        if (mask & (1u << i)) A.push_back(i);
      }
      for (const auto& pattern : patterns) {
        double v = 0.0;
        if (solve_pattern(A, pattern, v) && v < best.value) {
          best.value = v;
          best.exact = true;
        }
      }
    }
    if (!std::isfinite(best.value)) {
      best.value = std::numeric_limits<double>::quiet_NaN();
      best.exact = false;
    }
    return best;
  }
};

MeroOptimum quadratic_minimax(const ShiftedQuadratic& p) {
  return EqualCurvatureMinimax(p).run();
}

double simplex_min_value(const Problem& p, const Vec& q) {
  const Vec w = weighted_risk_minimizer(p, q);
  double rstar_mix = 0.0;
  for (int i = 0; i < p.m(); ++i) rstar_mix += q[i] * p.rstar_exact(i);
  return weighted_risk_value(p, q, w) - rstar_mix;
}

// Entropic mirror ascent on the concave dual g(q) = min_w phi(w, q); returns
// the best value found (a valid lower bound on OPT).
MeroOptimum mirror_ascent_optimum(const Problem& p, long iters) {
  Vec q = uniform_simplex(p.m());
  double best = -std::numeric_limits<double>::infinity();
  for (long it = 1; it <= iters; ++it) {
    const Vec w = weighted_risk_minimizer(p, q);
    Vec super(p.m());
    double val = 0.0;
    for (int i = 0; i < p.m(); ++i) {
      super[i] = p.risk_exact(i, w) - p.rstar_exact(i);
      val += q[i] * super[i];
    }
    best = std::max(best, val);
    q = mirror_step_simplex(q, super, 0.5 / std::sqrt(static_cast<double>(it)));
  }
  return MeroOptimum{best, false};
}

}  // namespace

SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 5) throw std::invalid_argument("slope_fit: need at least 5 points");
  SlopeFit fit;
  std::vector<std::pair<double, double>> logs;
  for (const auto& [t, v] : points) {
    if (!(v > 0.0) || !(t > 0.0)) {
      ++fit.filtered;
      continue;
    }
    logs.emplace_back(std::log(t), std::log(v));
  }
  fit.used_points = static_cast<int>(logs.size());
  if (logs.size() < 2) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : logs) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(logs.size());
  const double denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double rss = 0.0;
  for (const auto& [x, y] : logs) {
    const double e = y - (fit.intercept + fit.slope * x);
    rss += e * e;
  }
  fit.residual_rms = std::sqrt(rss / n);
  return fit;
}

Vec weighted_risk_min_descent(const Problem& p, const Vec& q, double tol, long max_iter) {
  if (!on_simplex(q, 1e-9)) throw std::invalid_argument("weighted_risk_min_descent: q off simplex");
  const WeightDomain& dom = p.domain();
  Vec x = dom.dgf_center();
  Vec x_prev = x;
  double fx = weighted_risk_value(p, q, x);
  double lip = 1.0;
  double theta = 1.0;
  for (long it = 0; it < max_iter; ++it) {
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    const double beta = (theta - 1.0) / theta_next;
    Vec y = x + beta * (x - x_prev);
    double fy = weighted_risk_value(p, q, y);
    Vec g = weighted_risk_grad(p, q, y);
    Vec xn;
    double fxn = 0.0;
    for (int bt = 0; bt < 80; ++bt) {
      xn = dom.project(y - g / lip);
      fxn = weighted_risk_value(p, q, xn);
      const Vec diff = xn - y;
      if (fxn <= fy + g.dot(diff) + 0.5 * lip * diff.squaredNorm() + 1e-15) break;
      lip *= 2.0;
    }
    if (fxn > fx) {  // restart momentum on non-monotone step
      theta = 1.0;
      x_prev = x;
      const Vec xg = dom.project(x - weighted_risk_grad(p, q, x) / lip);
      if ((xg - x).norm() <= tol) return x;
      fx = weighted_risk_value(p, q, xg);
      x = xg;
      continue;
    }
    x_prev = x;
    x = xn;
    fx = fxn;
    theta = theta_next;
    lip = std::max(lip * 0.7, 1e-12);
    if ((xn - y).norm() <= tol && beta > 0.0) {
      const Vec xg = dom.project(x - weighted_risk_grad(p, q, x) / lip);
      if ((xg - x).norm() <= tol) return x;
    }
  }
  return x;
}

Vec weighted_risk_minimizer(const Problem& p, const Vec& q) {
  if (!on_simplex(q, 1e-9)) throw std::invalid_argument("weighted_risk_minimizer: q off simplex");
  if (static_cast<int>(q.size()) != p.m()) {
    throw std::invalid_argument("weighted_risk_minimizer: q dimension mismatch");
  }
  if (const auto* quad = dynamic_cast<const ShiftedQuadratic*>(&p)) {
    Vec centroid = Vec::Zero(p.dim());
    for (int i = 0; i < p.m(); ++i) centroid += q[i] * quad->centers()[static_cast<std::size_t>(i)];
    return p.domain().project(centroid);
  }
  if (const auto* abs = dynamic_cast<const PiecewiseAbsolute*>(&p)) {
    if (p.domain().kind() == DomainKind::Box) return absolute_box_minimizer(*abs, q);
  }
  return weighted_risk_min_descent(p, q);
}

double opt_error(const Problem& p, const Vec& w_bar, const Vec& q_bar) {
  if (!on_simplex(q_bar, 1e-9)) throw std::invalid_argument("opt_error: q_bar off the simplex");
  double max_excess = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.m(); ++i) {
    max_excess = std::max(max_excess, p.risk_exact(i, w_bar) - p.rstar_exact(i));
  }
  return max_excess - simplex_min_value(p, q_bar);
}

MeroOptimum mero_optimum(const Problem& p) {
  if (!p.has_exact_risk()) {
    throw std::logic_error("mero_optimum: unsupported on empirical distributions");
  }
  if (p.m() == 1) return MeroOptimum{0.0, true};
  if (const auto* quad = dynamic_cast<const ShiftedQuadratic*>(&p);
      quad && p.m() <= 16 && (p.domain().kind() == DomainKind::Ball || p.dim() <= 8)) {
    MeroOptimum opt = quadratic_minimax(*quad);
    if (opt.exact) return opt;
    return mirror_ascent_optimum(p, 20000);
  }
  if (p.m() == 2) {
    // golden section over q = (a, 1-a); g is concave in a
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = 1.0;
    auto g = [&](double a) {
      Vec q(2);
      q << a, 1.0 - a;
      return simplex_min_value(p, q);
    };
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double g1 = g(x1), g2 = g(x2);
    for (int it = 0; it < 120; ++it) {
      if (g1 < g2) {
        lo = x1;
        x1 = x2;
        g1 = g2;
        x2 = lo + phi * (hi - lo);
        g2 = g(x2);
      } else {
        hi = x2;
        x2 = x1;
        g2 = g1;
        x1 = hi - phi * (hi - lo);
        g1 = g(x1);
      }
    }
    return MeroOptimum{std::max(g1, g2), true};
  }
  return mirror_ascent_optimum(p, 20000);
}

RunReport evaluate(const Problem& p, const Trajectory& traj, long mc_risk_draws) {
  RunReport rep;
  rep.completed = traj.completed;
  rep.error = traj.error;
  rep.value_calls = traj.value_calls;
  rep.grad_calls = traj.grad_calls;
  rep.wall_seconds = traj.wall_seconds;
  const bool exact = p.has_exact_risk();
  if (exact && p.m() >= 1) {
    const MeroOptimum opt = mero_optimum(p);
    rep.mero_opt = opt.value;
    rep.mero_opt_exact = opt.exact;
  }
  for (const auto& snap : traj.snapshots) {
    CheckpointMetrics cm;
    cm.t = snap.t;
    cm.value_calls = snap.value_calls;
    cm.grad_calls = snap.grad_calls;
    cm.sched = snap.sched;
    cm.grad_dual_norm = snap.grad_dual_norm;
    cm.wall_seconds = snap.wall_seconds;
    cm.rstar_estimates.resize(static_cast<std::size_t>(p.m()));
    if (exact) {
      cm.excess_inner.resize(static_cast<std::size_t>(p.m()));
      cm.excess_outer.resize(static_cast<std::size_t>(p.m()));
      double max_exc = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < p.m(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        cm.rstar_estimates[u] = p.risk_exact(i, snap.wi_bar[u]);
        cm.excess_inner[u] = cm.rstar_estimates[u] - p.rstar_exact(i);
        cm.excess_outer[u] = p.risk_exact(i, snap.w_bar) - p.rstar_exact(i);
        max_exc = std::max(max_exc, cm.excess_outer[u]);
      }
      cm.max_excess_outer = max_exc;
      cm.eps_phi = opt_error(p, snap.w_bar, snap.q_bar);
    } else {
      cm.risk_estimates.resize(static_cast<std::size_t>(p.m()));
      for (int i = 0; i < p.m(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        RandomStream s = RandomStream(1789).fork(StreamPurpose::Evaluation,
                                                 static_cast<std::uint64_t>(snap.t),
                                                 static_cast<std::uint64_t>(i + 1));
        cm.risk_estimates[u] = risk_estimate(p, i, snap.w_bar, mc_risk_draws, s);
        RandomStream s2 = RandomStream(1789).fork(StreamPurpose::Evaluation,
                                                  static_cast<std::uint64_t>(snap.t), 0,
                                                  static_cast<std::uint64_t>(i + 1));
        cm.rstar_estimates[u] = risk_estimate(p, i, snap.wi_bar[u], mc_risk_draws, s2);
      }
    }
    rep.checkpoints.push_back(std::move(cm));
  }
  if (exact && rep.checkpoints.size() >= 5) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& cm : rep.checkpoints) {
      pts.emplace_back(static_cast<double>(cm.t), cm.eps_phi);
    }
    rep.eps_phi_slope = slope_fit(pts);
  }
  return rep;
}

DiagnosticsReport estimator_diagnostics(const Problem& p, const Vec& w, Variant variant,
                                        double mu_scale, long N, std::uint64_t seed,
                                        SmoothingPair pair) {
  if (N < 10000) throw std::invalid_argument("estimator_diagnostics: N must be >= 10^4");
  if (variant == Variant::FirstOrderBaseline) {
    throw std::invalid_argument("estimator_diagnostics: needs a zeroth-order variant");
  }
  const double d = static_cast<double>(p.dim());
  DiagnosticsReport rep;
  rep.variant = variant;
  rep.N = N;
  const double L = p.constants().L.value_or(1.0);
  const double Ls = p.constants().Lstar.value_or(1.0);
  const double G = p.constants().G.value_or(0.0);
  const double sigma = p.constants().sigma.value_or(0.0);
  // Bounds are pinned at the round-1 theorem schedule; the probe applies the
  // user multiplier, so an oversized smoothing radius fails the checks.
  rep.bound_mu = 2.0 / (L * std::sqrt(2.0));
  rep.bound_mu1 = 0.5;
  rep.bound_mu2 = 1.0 / (2.0 * d * 2.0);
  rep.probe_mu = mu_scale * rep.bound_mu;
  rep.probe_mu1 = mu_scale * rep.bound_mu1;
  rep.probe_mu2 = mu_scale * rep.bound_mu2;
  rep.all_ok = true;
  RandomStream root(seed);
  for (int i = 0; i < p.m(); ++i) {
    DistributionDiagnostics diag;
    diag.i = i;
    Vec mean = Vec::Zero(p.dim());
    Vec m2 = Vec::Zero(p.dim());  // running component second moments
    double sq_norm_acc = 0.0;
    RandomStream s = root.fork(StreamPurpose::Diagnostic, 0, static_cast<std::uint64_t>(i + 1));
    for (long n = 0; n < N; ++n) {
      const Vec z = p.draw(i, s);
      Vec est;
      if (variant == Variant::Smooth) {
        const Vec u = sample_unit_sphere(s, p.dim());
        est = unige_single([&p](const Vec& ww, const Vec& zz) { return p.loss(ww, zz); }, w, z, u,
                           rep.probe_mu);
      } else {
        const auto [u, v] = sample_smoothing_pair(s, pair, p.dim());
        est = nonsmooth_single([&p](const Vec& ww, const Vec& zz) { return p.loss(ww, zz); }, w, z,
                               u, v, rep.probe_mu1, rep.probe_mu2);
      }
      mean += est;
      m2 += est.cwiseProduct(est);
      sq_norm_acc += est.squaredNorm();
    }
    const double nn = static_cast<double>(N);
    mean /= nn;
    m2 /= nn;
    diag.empirical_mean = mean;
    diag.second_moment = sq_norm_acc / nn;
    diag.mc_margin = (4.0 / std::sqrt(nn)) *
                     (m2 - mean.cwiseProduct(mean)).cwiseMax(0.0).cwiseSqrt();
    if (variant == Variant::Smooth) {
      diag.analytic_grad = p.risk_grad(i, w);
      diag.bias_cap = d * L * rep.bound_mu / 2.0;
      diag.bias_norm = (mean - diag.analytic_grad).norm();
      diag.bias_ok = true;
      for (int kk = 0; kk < p.dim(); ++kk) {
        if (std::abs(mean[kk] - diag.analytic_grad[kk]) > diag.mc_margin[kk] + diag.bias_cap) {
          diag.bias_ok = false;
        }
      }
      const double mu_b = rep.bound_mu;
      diag.second_moment_bound =
          4.0 * d * d * (G * G + sigma * sigma) + d * d * mu_b * mu_b * L * L / 2.0;
      diag.moment_ok = diag.second_moment <= 1.1 * diag.second_moment_bound;
    } else {
      const double ratio_denom =
          Ls * Ls * d * (std::sqrt(rep.bound_mu2 / rep.bound_mu1) * d + 1.0 + std::log(d));
      diag.fitted_c = diag.second_moment / ratio_denom;
      diag.second_moment_bound = 10.0 * ratio_denom;
      diag.moment_ok = diag.fitted_c <= 10.0;
      diag.bias_ok = true;  // the non-smooth bias floor is exercised by the rate checks
    }
    rep.all_ok = rep.all_ok && diag.bias_ok && diag.moment_ok;
    rep.per_distribution.push_back(std::move(diag));
  }
  return rep;
}

}  // namespace zosmd
