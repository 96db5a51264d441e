#pragma once

#include "zosmd/geometry.hpp"

#include <cstdint>
#include <utility>

namespace zosmd {

// Purpose tags for stream forks. Each (seed, purpose, t, i, j) tuple addresses
// an independent sample sequence, so trajectories do not depend on worker
// scheduling or evaluation order.
enum class StreamPurpose : std::uint64_t {
  Sample = 1,
  InnerDirection = 2,
  OuterDirection = 3,
  Diagnostic = 4,
  Evaluation = 5,
};

// Counter-based random stream: output_k = finalize(key + k*gamma), with child
// keys derived by mixing the fork label into the parent key. Same (seed,
// labels) always yields the same sequence; forking never consumes parent
// state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed);

  RandomStream fork(StreamPurpose purpose, std::uint64_t t = 0, std::uint64_t i = 0,
                    std::uint64_t j = 0) const;

  std::uint64_t next_u64();
  double uniform();  // [0, 1)
  double normal();   // N(0, 1), Box-Muller

 private:
  RandomStream(std::uint64_t key, int) : key_(key) {}
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

enum class SmoothingPair { GaussianGaussian, BallBall, BallSphere };

const char* to_string(SmoothingPair pair);

// Uniform on the unit sphere (Gaussian draw, normalized). For d = 1 this is
// +-1 with equal probability.
Vec sample_unit_sphere(RandomStream& stream, int d);

// Uniform on the l2-ball / l2-sphere of the given radius.
Vec sample_ball(RandomStream& stream, int d, double radius);
Vec sample_sphere(RandomStream& stream, int d, double radius);

// Draws (u, v) from the configured smoothing pair: gaussian-gaussian,
// ball-ball with radius sqrt(d+2), or ball(sqrt(d+2))-sphere(sqrt(d)).
// Every marginal satisfies E[vv^T] = I.
std::pair<Vec, Vec> sample_smoothing_pair(RandomStream& stream, SmoothingPair pair, int d);

// Standard normal conditioned on |x| <= cut, rescaled to unit variance.
// Used by the synthetic families so their closed-form risks stay exact while
// the loss remains bounded.
double truncated_normal_unit_var(RandomStream& stream, double cut = 4.0);

// Variance of the standard normal truncated to [-cut, cut] (before rescaling).
double truncated_normal_variance(double cut = 4.0);

// Mean absolute deviation helpers for the truncated unit-variance noise; see
// problems.cpp for the piecewise-absolute closed forms built on these.
double standard_normal_pdf(double x);
double standard_normal_cdf(double x);

}  // namespace zosmd
