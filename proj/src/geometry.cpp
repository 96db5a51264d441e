#include "zosmd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zosmd {

WeightDomain WeightDomain::ball(int dim, double radius) {
  if (dim < 1) throw std::invalid_argument("ball domain: dimension must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("ball domain: radius must be positive");
  WeightDomain d;
  d.kind_ = DomainKind::Ball;
  d.dim_ = dim;
  d.radius_ = radius;
  return d;
}

WeightDomain WeightDomain::box(Vec lo, Vec hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("box domain: lo/hi dimension mismatch");
  if (lo.size() < 1) throw std::invalid_argument("box domain: dimension must be >= 1");
  for (Eigen::Index k = 0; k < lo.size(); ++k) {
    if (!(lo[k] < hi[k])) throw std::invalid_argument("box domain: requires lo[k] < hi[k]");
  }
  WeightDomain d;
  d.kind_ = DomainKind::Box;
  d.dim_ = static_cast<int>(lo.size());
  d.lo_ = std::move(lo);
  d.hi_ = std::move(hi);
  return d;
}

double WeightDomain::radius() const {
  if (kind_ != DomainKind::Ball) throw std::logic_error("radius() on non-ball domain");
  return radius_;
}

const Vec& WeightDomain::lo() const {
  if (kind_ != DomainKind::Box) throw std::logic_error("lo() on non-box domain");
  return lo_;
}

const Vec& WeightDomain::hi() const {
  if (kind_ != DomainKind::Box) throw std::logic_error("hi() on non-box domain");
  return hi_;
}

Vec WeightDomain::project(const Vec& w) const {
  if (w.size() != dim_) throw std::invalid_argument("project: dimension mismatch");
  if (kind_ == DomainKind::Ball) {
    const double n = w.norm();
    if (n <= radius_) return w;
    return w * (radius_ / n);
  }
  return w.cwiseMax(lo_).cwiseMin(hi_);
}

bool WeightDomain::contains(const Vec& w, double tol) const {
  return distance(w) <= tol;
}

double WeightDomain::distance(const Vec& w) const {
  return (w - project(w)).norm();
}

Vec WeightDomain::dgf_center() const {
  if (kind_ == DomainKind::Ball) return Vec::Zero(dim_);
  return project(Vec::Zero(dim_));
}

double WeightDomain::bregman_radius_sq() const {
  if (kind_ == DomainKind::Ball) return 0.5 * radius_ * radius_;
  const Vec o = dgf_center();
  double s = 0.0;
  for (Eigen::Index k = 0; k < lo_.size(); ++k) {
    const double reach = std::max(hi_[k] - o[k], o[k] - lo_[k]);
    s += reach * reach;
  }
  return 0.5 * s;
}

double WeightDomain::diameter() const {
  if (kind_ == DomainKind::Ball) return 2.0 * radius_;
  return (hi_ - lo_).norm();
}

GeometryConfig GeometryConfig::for_domain(const WeightDomain& domain, int m) {
  if (m < 1) throw std::invalid_argument("GeometryConfig: m must be >= 1");
  GeometryConfig g;
  g.D2 = domain.bregman_radius_sq();
  g.tau1 = 1.0;
  g.tau2 = 1.0;
  g.m = m;
  return g;
}

Vec uniform_simplex(int m) {
  if (m < 1) throw std::invalid_argument("uniform_simplex: m must be >= 1");
  return Vec::Constant(m, 1.0 / m);
}

bool on_simplex(const Vec& q, double tol) {
  if (q.size() < 1) return false;
  if (q.minCoeff() < 0.0) return false;
  return std::abs(q.sum() - 1.0) <= tol;
}

double bregman_w(const Vec& u, const Vec& v) {
  if (u.size() != v.size()) throw std::invalid_argument("bregman_w: dimension mismatch");
  return 0.5 * (u - v).squaredNorm();
}

Vec mirror_step_weight(const Vec& w, const Vec& g, double eta, const WeightDomain& domain) {
  if (w.size() != g.size()) throw std::invalid_argument("mirror_step_weight: dimension mismatch");
  if (!(eta > 0.0)) throw std::invalid_argument("mirror_step_weight: eta must be positive");
  if (!g.allFinite()) {
    throw EstimatorError("mirror_step_weight: non-finite gradient entries (estimator blow-up)");
  }
  return domain.project(w - eta * g);
}

Vec mirror_step_simplex(const Vec& q, const Vec& g, double eta) {
  if (q.size() != g.size()) throw std::invalid_argument("mirror_step_simplex: dimension mismatch");
  if (!(eta >= 0.0)) throw std::invalid_argument("mirror_step_simplex: eta must be nonnegative");
  // log-domain update: logits_i = ln q_i + eta*g_i, shifted by the max so the
  // exponentials cannot overflow for any finite g.
  Vec logits(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    logits[i] = (q[i] > 0.0 ? std::log(q[i]) : -std::numeric_limits<double>::infinity()) + eta * g[i];
  }
  const double shift = logits.maxCoeff();
  Vec out(q.size());
  double z = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    out[i] = std::isinf(logits[i]) ? 0.0 : std::exp(logits[i] - shift);
    z += out[i];
  }
  out /= z;
  return out;
}

double product_norm_dual(const Vec& gw, const Vec& gq, double D2, int m) {
  if (!(D2 > 0.0)) throw std::invalid_argument("product_norm_dual: D2 must be positive");
  if (m < 2) throw std::invalid_argument("product_norm_dual: m must be >= 2");
  const double ginf = gq.size() > 0 ? gq.cwiseAbs().maxCoeff() : 0.0;
  return std::sqrt(2.0 * D2 * gw.squaredNorm() + 2.0 * std::log(static_cast<double>(m)) * ginf * ginf);
}

}  // namespace zosmd
