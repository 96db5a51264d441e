#include "zosmd/sampling.hpp"

#include <cmath>

namespace zosmd {
namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer (Stafford variant 13): a 64-bit bijective mixer.
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

std::uint64_t combine(std::uint64_t key, std::uint64_t word) {
  return mix64(key ^ (word + kGamma + (key << 6) + (key >> 2)));
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

RandomStream::RandomStream(std::uint64_t seed) : key_(mix64(seed + kGamma)) {}

RandomStream RandomStream::fork(StreamPurpose purpose, std::uint64_t t, std::uint64_t i,
                                std::uint64_t j) const {
  std::uint64_t k = key_;
  k = combine(k, static_cast<std::uint64_t>(purpose));
  k = combine(k, t);
  k = combine(k, i);
  k = combine(k, j);
  return RandomStream(k, 0);
}

std::uint64_t RandomStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double RandomStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  cached_normal_ = r * std::sin(kTwoPi * u2);
  has_cached_normal_ = true;
  return r * std::cos(kTwoPi * u2);
}

const char* to_string(SmoothingPair pair) {
  switch (pair) {
    case SmoothingPair::GaussianGaussian: return "gaussian-gaussian";
    case SmoothingPair::BallBall: return "ball-ball";
    case SmoothingPair::BallSphere: return "ball-sphere";
  }
  return "?";
}

Vec sample_unit_sphere(RandomStream& stream, int d) {
  if (d < 1) throw std::invalid_argument("sample_unit_sphere: d must be >= 1");
  Vec u(d);
  double n = 0.0;
  do {
    for (int k = 0; k < d; ++k) u[k] = stream.normal();
    n = u.norm();
  } while (n < 1e-100);
  return u / n;
}

Vec sample_sphere(RandomStream& stream, int d, double radius) {
  return radius * sample_unit_sphere(stream, d);
}

Vec sample_ball(RandomStream& stream, int d, double radius) {
  // direction times radius * U^(1/d): exact, rejection-free.
  const Vec dir = sample_unit_sphere(stream, d);
  const double r = radius * std::pow(stream.uniform(), 1.0 / d);
  return r * dir;
}

std::pair<Vec, Vec> sample_smoothing_pair(RandomStream& stream, SmoothingPair pair, int d) {
  if (d < 1) throw std::invalid_argument("sample_smoothing_pair: d must be >= 1");
  const double ball_radius = std::sqrt(static_cast<double>(d) + 2.0);
  switch (pair) {
    case SmoothingPair::GaussianGaussian: {
      Vec u(d), v(d);
      for (int k = 0; k < d; ++k) u[k] = stream.normal();
      for (int k = 0; k < d; ++k) v[k] = stream.normal();
      return {u, v};
    }
    case SmoothingPair::BallBall: {
      Vec u = sample_ball(stream, d, ball_radius);
      Vec v = sample_ball(stream, d, ball_radius);
      return {u, v};
    }
    case SmoothingPair::BallSphere: {
      Vec u = sample_ball(stream, d, ball_radius);
      Vec v = sample_sphere(stream, d, std::sqrt(static_cast<double>(d)));
      return {u, v};
    }
  }
  throw std::logic_error("sample_smoothing_pair: unknown pair");
}

double standard_normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi);
}

double standard_normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

double truncated_normal_variance(double cut) {
  const double z = 2.0 * standard_normal_cdf(cut) - 1.0;
  return 1.0 - 2.0 * cut * standard_normal_pdf(cut) / z;
}

double truncated_normal_unit_var(RandomStream& stream, double cut) {
  const double scale = 1.0 / std::sqrt(truncated_normal_variance(cut));
  double x = stream.normal();
  while (std::abs(x) > cut) x = stream.normal();
  return x * scale;
}

}  // namespace zosmd
