#include "zosmd/estimators.hpp"

#include <cmath>
#include <sstream>

namespace zosmd {
namespace {

double checked_loss(const LossFn& loss, const Vec& w, const Vec& z, const char* where) {
  const double v = loss(w, z);
  if (!std::isfinite(v)) {
    std::ostringstream msg;
    msg << where << ": non-finite loss value " << v;
    throw EstimatorError(msg.str());
  }
  return v;
}

}  // namespace

Vec unige_single(const LossFn& loss, const Vec& w, const Vec& z, const Vec& u, double mu) {
  if (!(mu > 0.0)) throw std::invalid_argument("unige_single: mu must be positive");
  if (u.size() != w.size()) throw std::invalid_argument("unige_single: direction dimension mismatch");
  const double d = static_cast<double>(w.size());
  const double forward = checked_loss(loss, w + mu * u, z, "unige_single");
  const double base = checked_loss(loss, w, z, "unige_single");
  return ((forward - base) * d / mu) * u;
}

Vec unige_batch(const LossFn& loss, const Vec& w, const std::vector<Vec>& samples,
                const std::vector<Vec>& dirs, double mu) {
  if (samples.size() != dirs.size() || samples.empty()) {
    throw std::invalid_argument("unige_batch: need matching nonempty samples and dirs");
  }
  Vec acc = Vec::Zero(w.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    acc += unige_single(loss, w, samples[j], dirs[j], mu);
  }
  return acc / static_cast<double>(samples.size());
}

Vec nonsmooth_single(const LossFn& loss, const Vec& w, const Vec& z, const Vec& u, const Vec& v,
                     double mu1, double mu2) {
  if (!(mu1 > 0.0) || !(mu2 > 0.0)) {
    throw std::invalid_argument("nonsmooth_single: mu1 and mu2 must be positive");
  }
  const Vec base_point = w + mu1 * u;
  const double forward = checked_loss(loss, base_point + mu2 * v, z, "nonsmooth_single");
  const double base = checked_loss(loss, base_point, z, "nonsmooth_single");
  return ((forward - base) / mu2) * v;
}

Vec nonsmooth_batch(const LossFn& loss, const Vec& w, const std::vector<Vec>& samples,
                    const std::vector<Vec>& us, const std::vector<Vec>& vs, double mu1,
                    double mu2) {
  if (samples.size() != us.size() || samples.size() != vs.size() || samples.empty()) {
    throw std::invalid_argument("nonsmooth_batch: need matching nonempty samples and directions");
  }
  Vec acc = Vec::Zero(w.size());
  for (std::size_t j = 0; j < samples.size(); ++j) {
    acc += nonsmooth_single(loss, w, samples[j], us[j], vs[j], mu1, mu2);
  }
  return acc / static_cast<double>(samples.size());
}

Vec gq_hat(const LossFn& loss, const Vec& w, const std::vector<Vec>& anchors,
           const std::vector<std::vector<Vec>>& batches) {
  const std::size_t m = anchors.size();
  if (batches.size() != m || m == 0) {
    throw std::invalid_argument("gq_hat: anchors/batches size mismatch");
  }
  const std::size_t r = batches[0].size();
  Vec g(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (batches[i].size() != r || r == 0) {
      throw std::invalid_argument("gq_hat: batch size mismatch across distributions");
    }
    double acc = 0.0;
    for (const Vec& z : batches[i]) {
      acc += checked_loss(loss, w, z, "gq_hat") - checked_loss(loss, anchors[i], z, "gq_hat");
    }
    g[static_cast<Eigen::Index>(i)] = acc / static_cast<double>(r);
  }
  return g;
}

Vec gw_hat(const LossFn& loss, const Vec& w, const Vec& q,
           const std::vector<std::vector<Vec>>& batches, const std::vector<Vec>& dirs, double mu) {
  if (static_cast<std::size_t>(q.size()) != batches.size()) {
    throw std::invalid_argument("gw_hat: q/batches size mismatch");
  }
  Vec acc = Vec::Zero(w.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    acc += q[i] * unige_batch(loss, w, batches[static_cast<std::size_t>(i)], dirs, mu);
  }
  return acc;
}

Vec gw_hat_nonsmooth(const LossFn& loss, const Vec& w, const Vec& q,
                     const std::vector<std::vector<Vec>>& batches, const std::vector<Vec>& us,
                     const std::vector<Vec>& vs, double mu1, double mu2) {
  if (static_cast<std::size_t>(q.size()) != batches.size()) {
    throw std::invalid_argument("gw_hat_nonsmooth: q/batches size mismatch");
  }
  Vec acc = Vec::Zero(w.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    acc += q[i] * nonsmooth_batch(loss, w, batches[static_cast<std::size_t>(i)], us, vs, mu1, mu2);
  }
  return acc;
}

}  // namespace zosmd
