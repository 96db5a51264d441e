#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "zosmd/problems.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

using namespace zosmd;
namespace fs = std::filesystem;

namespace {

Vec augmented(const Vec& point, double offset) {
  Vec z(point.size() + 1);
  z.head(point.size()) = point;
  z[point.size()] = offset;
  return z;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("zosmd_problems_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

}  // namespace

TEST_CASE("loss evaluations") {
  const auto quad = fixtures::quadratic5();
  Vec w = Vec::Constant(5, 0.2);
  CHECK(quad.loss(w, augmented(w, 0.0)) == 0.0);
  Vec w2 = Vec::Zero(5);
  w2[0] = 1.0;
  CHECK(quad.loss(w2, augmented(Vec::Zero(5), 0.5)) == doctest::Approx(1.0).epsilon(1e-15));

  const auto abs = fixtures::absolute4();
  Vec wa = Vec::Zero(4);
  Vec za = Vec::Zero(4);
  za[0] = 1.0;
  za[1] = -1.0;
  CHECK(abs.loss(wa, augmented(za, 0.0)) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("quadratic risks in closed form") {
  const auto dom = WeightDomain::ball(2, 5.0);
  std::vector<Vec> centers = {Vec::Zero(2)};
  centers[0] << 1.0, 1.0;

  ShiftedQuadratic noiseless(dom, centers, {0.0}, {0.0});
  CHECK(noiseless.risk_exact(0, centers[0]) == 0.0);
  Vec w(2);
  w << 2.0, 2.0;  // w - c = (1, 1)
  CHECK(noiseless.risk_exact(0, w) == doctest::Approx(1.0).epsilon(1e-15));

  const auto dom5 = WeightDomain::ball(5, 5.0);
  std::vector<Vec> c5 = {Vec::Constant(5, 0.1)};
  ShiftedQuadratic noisy(dom5, c5, {0.3}, {0.0});
  // 0.5 * s^2 * d with the unit-variance truncated noise
  CHECK(noisy.risk_exact(0, c5[0]) == doctest::Approx(0.225).epsilon(1e-15));
}

TEST_CASE("Monte-Carlo risk agrees with risk_exact") {
  struct Case {
    const Problem& p;
    int i;
    Vec w;
  };
  const auto quad = fixtures::quadratic5();
  const auto abs = fixtures::absolute4();
  Vec wq = Vec::Constant(5, 0.15);
  Vec wa = Vec::Constant(4, -0.2);
  const std::vector<Case> cases = {{quad, 0, wq}, {quad, 2, wq}, {abs, 0, wa}, {abs, 1, wa}};
  const long N = 1000000;
  int case_id = 0;
  for (const auto& c : cases) {
    RandomStream s(500 + case_id++);
    double acc = 0.0, acc2 = 0.0;
    for (long n = 0; n < N; ++n) {
      const double v = c.p.loss(c.w, c.p.draw(c.i, s));
      acc += v;
      acc2 += v * v;
    }
    const double mean = acc / double(N);
    const double se = std::sqrt(std::max(0.0, acc2 / double(N) - mean * mean) / double(N));
    CHECK(std::abs(mean - c.p.risk_exact(c.i, c.w)) <= 4.0 * se + 1e-9);
  }
}

TEST_CASE("rstar_exact matches projection and grid search") {
  // center inside the ball, no noise: minimum 0 at the center
  const auto inside = ShiftedQuadratic(WeightDomain::ball(2, 1.0), {Vec::Constant(2, 0.3)}, {0.0},
                                       {0.0});
  CHECK(inside.rstar_exact(0) == 0.0);

  // center at distance 2 from the origin, unit ball: minimum 0.5 at the boundary
  std::vector<Vec> far = {Vec::Zero(2)};
  far[0] << 2.0, 0.0;
  const auto outside = ShiftedQuadratic(WeightDomain::ball(2, 1.0), far, {0.0}, {0.0});
  CHECK(outside.rstar_exact(0) == doctest::Approx(0.5).epsilon(1e-12));

  // dense grid-search oracle over the ball
  double best = std::numeric_limits<double>::infinity();
  const int n = 400;
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n; ++b) {
      Vec w(2);
      w << -1.0 + 2.0 * a / n, -1.0 + 2.0 * b / n;
      if (w.norm() > 1.0) continue;
      best = std::min(best, outside.risk_exact(0, w));
    }
  }
  CHECK(outside.rstar_exact(0) == doctest::Approx(best).epsilon(1e-3));
}

TEST_CASE("absolute family closed-form risk via grid search") {
  std::vector<Vec> centers = {Vec::Zero(2)};
  centers[0] << 0.3, -0.4;
  const auto p = PiecewiseAbsolute(
      WeightDomain::box(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0)), centers, {0.25}, {0.1});
  const double rstar = p.rstar_exact(0);
  double best = std::numeric_limits<double>::infinity();
  const int n = 500;
  for (int a = 0; a <= n; ++a) {
    for (int b = 0; b <= n; ++b) {
      Vec w(2);
      w << -1.0 + 2.0 * a / n, -1.0 + 2.0 * b / n;
      best = std::min(best, p.risk_exact(0, w));
    }
  }
  CHECK(rstar <= best + 1e-12);
  CHECK(rstar == doctest::Approx(best).epsilon(5e-4));
  // gradient at the center vanishes (median optimality)
  CHECK(p.risk_grad(0, centers[0]).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("risk convexity spot check") {
  const auto quad = fixtures::quadratic5();
  const auto abs = fixtures::absolute4();
  RandomStream s(77);
  for (int rep = 0; rep < 200; ++rep) {
    const double lam = s.uniform();
    Vec w1q(5), w2q(5), w1a(4), w2a(4);
    for (int k = 0; k < 5; ++k) {
      w1q[k] = 2.0 * s.uniform() - 1.0;
      w2q[k] = 2.0 * s.uniform() - 1.0;
    }
    for (int k = 0; k < 4; ++k) {
      w1a[k] = 2.0 * s.uniform() - 1.0;
      w2a[k] = 2.0 * s.uniform() - 1.0;
    }
    const Vec mq = lam * w1q + (1.0 - lam) * w2q;
    const Vec ma = lam * w1a + (1.0 - lam) * w2a;
    for (int i = 0; i < quad.m(); ++i) {
      CHECK(quad.risk_exact(i, mq) <=
            lam * quad.risk_exact(i, w1q) + (1.0 - lam) * quad.risk_exact(i, w2q) + 1e-10);
    }
    for (int i = 0; i < abs.m(); ++i) {
      CHECK(abs.risk_exact(i, ma) <=
            lam * abs.risk_exact(i, w1a) + (1.0 - lam) * abs.risk_exact(i, w2a) + 1e-10);
    }
  }
}

TEST_CASE("loss values stay within [0, C]") {
  const auto quad = fixtures::quadratic5();
  RandomStream s(123);
  CHECK_NOTHROW(validate_instance(quad, 100000, s, oracle_margin(quad.dim())));
  const auto abs = fixtures::absolute4();
  RandomStream s2(124);
  CHECK_NOTHROW(validate_instance(abs, 100000, s2, oracle_margin(abs.dim())));
}

TEST_CASE("risk gradients match finite differences") {
  const auto abs = fixtures::absolute4();
  Vec w(4);
  w << 0.31, -0.22, 0.05, 0.4;
  const double h = 1e-6;
  for (int i = 0; i < abs.m(); ++i) {
    const Vec g = abs.risk_grad(i, w);
    for (int k = 0; k < 4; ++k) {
      Vec wp = w, wm = w;
      wp[k] += h;
      wm[k] -= h;
      const double fd = (abs.risk_exact(i, wp) - abs.risk_exact(i, wm)) / (2.0 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("csv ingestion") {
  TempDir tmp;
  const auto ok = tmp.path / "ok.csv";
  write_text(ok, "1.0,2.0\n3.5,-4.25\n0,1e-3\n");
  const auto rows = ingest_csv(ok.string(), false);
  CHECK(rows.size() == 3);
  CHECK(rows[0].size() == 2);
  CHECK(rows[1][1] == doctest::Approx(-4.25));

  const auto with_header = tmp.path / "header.csv";
  write_text(with_header, "x,y\n1,2\n3,4\n");
  CHECK(ingest_csv(with_header.string(), true).size() == 2);
  CHECK_THROWS_WITH_AS(ingest_csv(with_header.string(), false), doctest::Contains(":1"),
                       std::runtime_error);

  const auto empty = tmp.path / "empty.csv";
  write_text(empty, "");
  CHECK_THROWS_WITH_AS(ingest_csv(empty.string(), false), doctest::Contains("empty distribution"),
                       std::runtime_error);

  const auto ragged = tmp.path / "ragged.csv";
  write_text(ragged, "1,2\n3,4,5\n");
  CHECK_THROWS_WITH_AS(ingest_csv(ragged.string(), false),
                       doctest::Contains("dimension inconsistency"), std::runtime_error);

  const auto junk = tmp.path / "junk.csv";
  write_text(junk, "1,2\n3,oops\n");
  CHECK_THROWS_WITH_AS(ingest_csv(junk.string(), false), doctest::Contains(":2"),
                       std::runtime_error);
}

TEST_CASE("empirical problems") {
  TempDir tmp;
  write_text(tmp.path / "d1.csv", "0.5,0.5\n-0.5,0.5\n0,0\n");
  auto rows = ingest_csv((tmp.path / "d1.csv").string(), false);
  EmpiricalProblem p(WeightDomain::ball(2, 1.0), {rows}, EmpiricalLoss::Quadratic);
  CHECK(p.m() == 1);
  CHECK(!p.has_exact_risk());
  CHECK_THROWS_WITH_AS(p.risk_exact(0, Vec::Zero(2)), doctest::Contains("risk_estimate"),
                       std::logic_error);

  RandomStream s(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Vec z = p.draw(0, s);
    CHECK(z.size() == 3);  // offset-augmented row
    CHECK(z[2] == 0.0);
  }
  // with-replacement draws cover the table
  const double est = risk_estimate(p, 0, Vec::Zero(2), 20000, s);
  // E[0.5*||z||^2] over the three rows = (0.25 + 0.25 + 0)/3
  CHECK(est == doctest::Approx((0.25 + 0.25 + 0.0) / 3.0).epsilon(0.05));
}

TEST_CASE("constants are recorded for the schedules") {
  const auto quad = fixtures::quadratic5();
  CHECK(*quad.constants().L == 1.0);
  CHECK(quad.constants().G.has_value());
  CHECK(quad.constants().sigma == doctest::Approx(0.25 * std::sqrt(5.0)));
  CHECK(quad.constants().C.has_value());

  const auto abs = fixtures::absolute4();
  CHECK(!abs.constants().L.has_value());  // not gradient-Lipschitz
  CHECK(*abs.constants().Lstar == doctest::Approx(2.0));
}

TEST_CASE("family parameter validation") {
  CHECK_THROWS_AS(ShiftedQuadratic(WeightDomain::ball(2, 1.0), {Vec::Zero(3)}, {0.1}, {0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ShiftedQuadratic(WeightDomain::ball(2, 1.0), {Vec::Zero(2)}, {-0.1}, {0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(ShiftedQuadratic(WeightDomain::ball(2, 1.0), {Vec::Zero(2)}, {0.1}, {-1.0}),
                  std::invalid_argument);
}
