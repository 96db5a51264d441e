#pragma once

#include "zosmd/geometry.hpp"
#include "zosmd/sampling.hpp"

#include <functional>
#include <vector>

namespace zosmd {

// Loss value oracle l(w; z). Implementations must accept evaluation points in
// a neighborhood of W (the estimators probe w + mu*u without projecting).
using LossFn = std::function<double(const Vec& w, const Vec& z)>;

struct SmoothEstimatorParams {
  double mu = 0.0;  // smoothing radius
  int r = 1;        // batch size
  int d = 0;
};

struct NonSmoothEstimatorParams {
  double mu1 = 0.0;
  double mu2 = 0.0;
  SmoothingPair pair = SmoothingPair::BallBall;
  int r = 1;
};

// Two-point uniform-smoothing estimate along a unit direction u:
// (l(w + mu*u; z) - l(w; z)) * (d/mu) * u.
Vec unige_single(const LossFn& loss, const Vec& w, const Vec& z, const Vec& u, double mu);

// Mini-batch mean of unige_single over paired (samples[j], dirs[j]).
Vec unige_batch(const LossFn& loss, const Vec& w, const std::vector<Vec>& samples,
                const std::vector<Vec>& dirs, double mu);

// Doubly randomized two-point estimate for non-smooth losses:
// (l(w + mu1*u + mu2*v; z) - l(w + mu1*u; z)) / mu2 * v.
Vec nonsmooth_single(const LossFn& loss, const Vec& w, const Vec& z, const Vec& u, const Vec& v,
                     double mu1, double mu2);

Vec nonsmooth_batch(const LossFn& loss, const Vec& w, const std::vector<Vec>& samples,
                    const std::vector<Vec>& us, const std::vector<Vec>& vs, double mu1, double mu2);

// Simplex-gradient estimate: component i is the batch mean of
// l(w; z) - l(anchors[i]; z) over batches[i]. Unbiased for
// [R_i(w) - R_i(anchors[i])]_i.
Vec gq_hat(const LossFn& loss, const Vec& w, const std::vector<Vec>& anchors,
           const std::vector<std::vector<Vec>>& batches);

// Weight-gradient estimate of phi: sum_i q_i * unige_batch over distribution
// i's batch, with one direction set shared across distributions.
Vec gw_hat(const LossFn& loss, const Vec& w, const Vec& q,
           const std::vector<std::vector<Vec>>& batches, const std::vector<Vec>& dirs, double mu);

// Non-smooth analogue with shared (u, v) pairs.
Vec gw_hat_nonsmooth(const LossFn& loss, const Vec& w, const Vec& q,
                     const std::vector<std::vector<Vec>>& batches, const std::vector<Vec>& us,
                     const std::vector<Vec>& vs, double mu1, double mu2);

}  // namespace zosmd
