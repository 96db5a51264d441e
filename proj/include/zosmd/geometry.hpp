#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace zosmd {

using Vec = Eigen::VectorXd;

/// Raised when a zeroth-order estimate produces non-finite values; the solver
/// aborts the run and reports the offending round/distribution.
class EstimatorError : public std::runtime_error {
 public:
  explicit EstimatorError(const std::string& what) : std::runtime_error(what) {}
};

enum class DomainKind { Ball, Box };

// Convex compact weight domain W. Two kinds: a Euclidean ball centered at the
// origin, or an axis-aligned box. Both have closed-form projections and a
// closed-form Bregman radius D^2 = max_w B_w(w, o_w) under nu_w = 0.5*||.||^2.
class WeightDomain {
 public:
  static WeightDomain ball(int dim, double radius);
  static WeightDomain box(Vec lo, Vec hi);

  DomainKind kind() const { return kind_; }
  int dim() const { return dim_; }
  double radius() const;
  const Vec& lo() const;
  const Vec& hi() const;

  Vec project(const Vec& w) const;
  bool contains(const Vec& w, double tol = 1e-10) const;
  double distance(const Vec& w) const;

  // o_w = argmin_{w in W} 0.5*||w||^2: the origin for the ball, the Euclidean
  // projection of the origin for boxes.
  Vec dgf_center() const;
  // D^2 = max_{w in W} B_w(w, o_w).
  double bregman_radius_sq() const;
  double diameter() const;

 private:
  WeightDomain() = default;
  DomainKind kind_ = DomainKind::Ball;
  int dim_ = 0;
  double radius_ = 0.0;
  Vec lo_, hi_;
};

// Norm-equivalence constants and Bregman radius used by the theorem schedules.
// With nu_w = 0.5*||.||_2^2 the weight norm is Euclidean, so tau1 = tau2 = 1.
struct GeometryConfig {
  double D2 = 0.0;
  double tau1 = 1.0;
  double tau2 = 1.0;
  int m = 0;

  static GeometryConfig for_domain(const WeightDomain& domain, int m);
};

Vec uniform_simplex(int m);
bool on_simplex(const Vec& q, double tol = 1e-12);

// B_w(u, v) for the half-squared-Euclidean DGF: 0.5*||u - v||_2^2.
double bregman_w(const Vec& u, const Vec& v);

// argmin_{x in W} { eta*<g, x - w> + B_w(x, w) }. For the half-squared
// Euclidean DGF this is the projection of w - eta*g onto the domain.
// Throws EstimatorError on non-finite gradient entries.
Vec mirror_step_weight(const Vec& w, const Vec& g, double eta, const WeightDomain& domain);

// Entropy prox ascent step on the simplex: q'_i proportional to
// q_i * exp(eta * g_i), computed in the log domain with max subtraction.
Vec mirror_step_simplex(const Vec& q, const Vec& g, double eta);

// Dual norm on the product space W x Delta_m:
// sqrt(2*D^2*||gw||_2^2 + 2*ln(m)*||gq||_inf^2). Diagnostic only.
double product_norm_dual(const Vec& gw, const Vec& gq, double D2, int m);

}  // namespace zosmd
