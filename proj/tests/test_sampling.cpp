#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "zosmd/sampling.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <set>

using namespace zosmd;

TEST_CASE("unit sphere draws are normalized") {
  RandomStream s(1);
  for (int d : {1, 2, 5, 17}) {
    for (int rep = 0; rep < 100; ++rep) {
      CHECK(std::abs(sample_unit_sphere(s, d).norm() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("d = 1 sphere is a fair sign flip") {
  RandomStream s(2);
  int plus = 0;
  const int n = 20000;
  for (int rep = 0; rep < n; ++rep) {
    const Vec u = sample_unit_sphere(s, 1);
    CHECK(std::abs(std::abs(u[0]) - 1.0) <= 1e-15);
    if (u[0] > 0) ++plus;
  }
  // binomial(n, 1/2): 5 sigma band
  CHECK(std::abs(plus - n / 2) <= 5.0 * std::sqrt(0.25 * n));
}

TEST_CASE("sphere second moment matches I/d") {
  const long N = 100000;
  for (int d : {2, 8}) {
    RandomStream s(100 + d);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    for (long n = 0; n < N; ++n) {
      const Vec u = sample_unit_sphere(s, d);
      acc += u * u.transpose();
    }
    acc /= static_cast<double>(N);
    const Eigen::MatrixXd err = acc - Eigen::MatrixXd::Identity(d, d) / double(d);
    CHECK(err.cwiseAbs().maxCoeff() <= 5.0 / std::sqrt(double(N)));
  }
}

TEST_CASE("sphere mean is centered") {
  const long N = 100000;
  RandomStream s(42);
  Vec acc = Vec::Zero(6);
  for (long n = 0; n < N; ++n) acc += sample_unit_sphere(s, 6);
  acc /= static_cast<double>(N);
  CHECK(acc.cwiseAbs().maxCoeff() <= 5.0 / std::sqrt(double(N)));
}

TEST_CASE("smoothing pair support bounds") {
  RandomStream s(9);
  for (int rep = 0; rep < 2000; ++rep) {
    const auto [u3, v3] = sample_smoothing_pair(s, SmoothingPair::BallBall, 3);
    CHECK(u3.norm() <= std::sqrt(5.0) + 1e-12);
    CHECK(v3.norm() <= std::sqrt(5.0) + 1e-12);
    const auto [u4, v4] = sample_smoothing_pair(s, SmoothingPair::BallSphere, 4);
    CHECK(u4.norm() <= std::sqrt(6.0) + 1e-12);
    CHECK(std::abs(v4.norm() - 2.0) <= 1e-12);
  }
}

TEST_CASE("smoothing pair second moments are identity") {
  const long N = 100000;
  for (auto pair :
       {SmoothingPair::GaussianGaussian, SmoothingPair::BallBall, SmoothingPair::BallSphere}) {
    RandomStream s(31 + static_cast<int>(pair));
    const int d = 2;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    for (long n = 0; n < N; ++n) {
      const auto [u, v] = sample_smoothing_pair(s, pair, d);
      acc += v * v.transpose();
    }
    acc /= static_cast<double>(N);
    CHECK((acc - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() <= 0.05);
  }
}

TEST_CASE("fourth moment stays within the c4 <= 3 envelope") {
  const long N = 100000;
  for (auto pair :
       {SmoothingPair::GaussianGaussian, SmoothingPair::BallBall, SmoothingPair::BallSphere}) {
    for (int d : {2, 6}) {
      RandomStream s(800 + 10 * d + static_cast<int>(pair));
      double acc = 0.0;
      for (long n = 0; n < N; ++n) {
        const auto [u, v] = sample_smoothing_pair(s, pair, d);
        const double n2 = v.squaredNorm();
        acc += n2 * n2;
      }
      acc /= static_cast<double>(N);
      CHECK(acc <= 3.0 * double(d) * double(d) * 1.1);
    }
  }
}

TEST_CASE("fork determinism and label separation") {
  RandomStream root(77);
  auto a = root.fork(StreamPurpose::Sample, 1, 1);
  auto b = root.fork(StreamPurpose::Sample, 1, 1);
  for (int k = 0; k < 100; ++k) CHECK(a.next_u64() == b.next_u64());

  // distinct labels -> distinct first outputs (collision check over 10^4 forks)
  std::set<std::uint64_t> seen;
  for (int t = 1; t <= 100; ++t) {
    for (int i = 1; i <= 100; ++i) {
      auto st = root.fork(StreamPurpose::Sample, t, i);
      seen.insert(st.next_u64());
    }
  }
  CHECK(seen.size() == 10000);

  auto c1 = root.fork(StreamPurpose::Sample, 1, 1);
  auto c2 = root.fork(StreamPurpose::Sample, 1, 2);
  CHECK(c1.next_u64() != c2.next_u64());
}

TEST_CASE("fork order independence") {
  RandomStream root(123);
  // forward order
  auto s12 = root.fork(StreamPurpose::Sample, 1, 2);
  auto s11 = root.fork(StreamPurpose::Sample, 1, 1);
  const std::uint64_t x11 = s11.next_u64();
  const std::uint64_t x12 = s12.next_u64();
  // reversed order, interleaved with unrelated draws
  RandomStream other = root.fork(StreamPurpose::Diagnostic, 5);
  (void)other.next_u64();
  auto r11 = root.fork(StreamPurpose::Sample, 1, 1);
  auto r12 = root.fork(StreamPurpose::Sample, 1, 2);
  CHECK(r11.next_u64() == x11);
  CHECK(r12.next_u64() == x12);
}

TEST_CASE("uniform and normal are sane") {
  RandomStream s(55);
  double mean = 0.0, var = 0.0;
  const long N = 100000;
  for (long n = 0; n < N; ++n) {
    const double x = s.normal();
    mean += x;
    var += x * x;
  }
  mean /= double(N);
  var /= double(N);
  CHECK(std::abs(mean) <= 5.0 / std::sqrt(double(N)));
  CHECK(std::abs(var - 1.0) <= 0.03);
  for (int k = 0; k < 1000; ++k) {
    const double u = s.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("truncated unit-variance noise") {
  RandomStream s(66);
  const double bound = 4.0 / std::sqrt(truncated_normal_variance(4.0));
  double acc = 0.0, acc2 = 0.0;
  const long N = 200000;
  for (long n = 0; n < N; ++n) {
    const double x = truncated_normal_unit_var(s);
    CHECK(std::abs(x) <= bound + 1e-12);
    acc += x;
    acc2 += x * x;
  }
  acc /= double(N);
  acc2 /= double(N);
  CHECK(std::abs(acc) <= 5.0 / std::sqrt(double(N)));
  CHECK(std::abs(acc2 - 1.0) <= 0.02);
}

TEST_CASE("ball sampling radius distribution") {
  RandomStream s(91);
  const int d = 3;
  const double R = 2.0;
  double acc = 0.0;
  const long N = 100000;
  for (long n = 0; n < N; ++n) {
    const double r = sample_ball(s, d, R).norm();
    CHECK(r <= R + 1e-12);
    acc += r;
  }
  // E r = R * d/(d+1)
  CHECK(std::abs(acc / double(N) - R * 3.0 / 4.0) <= 0.01);
}
