#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "zosmd/estimators.hpp"
#include "zosmd/solver.hpp"

#include <cmath>

using namespace zosmd;

namespace {

// Minimal problem with injectable loss/gradient and constants, for
// step-level hand evaluations.
class TestProblem : public Problem {
 public:
  using LossHook = std::function<double(const Vec&, const Vec&)>;
  using GradHook = std::function<Vec(const Vec&, const Vec&)>;

  TestProblem(int m, WeightDomain domain, LossHook loss, GradHook grad = nullptr)
      : Problem(m, std::move(domain)), loss_(std::move(loss)), grad_(std::move(grad)) {
    constants_.L = 1.0;
    constants_.Lstar = 1.0;
    constants_.C = 1e6;
    constants_.G = 1.0;
    constants_.sigma = 1.0;
  }

  void set_constants(const ProblemConstants& c) { constants_ = c; }

  std::string family() const override { return "test"; }
  double loss(const Vec& w, const Vec& z) const override { return loss_(w, z); }
  Vec draw(int i, RandomStream& stream) const override {
    Vec z(2);
    z << static_cast<double>(i), stream.uniform();
    return z;
  }
  bool has_loss_grad() const override { return static_cast<bool>(grad_); }
  Vec loss_grad(const Vec& w, const Vec& z) const override { return grad_(w, z); }

 private:
  LossHook loss_;
  GradHook grad_;
};

SolverConfig base_config(Variant v, long T, int r, std::uint64_t seed) {
  SolverConfig cfg;
  cfg.variant = v;
  cfg.T = T;
  cfg.r = r;
  cfg.seed = seed;
  return cfg;
}

bool snapshots_equal(const Trajectory& a, const Trajectory& b) {
  if (a.snapshots.size() != b.snapshots.size()) return false;
  for (std::size_t k = 0; k < a.snapshots.size(); ++k) {
    const auto& x = a.snapshots[k];
    const auto& y = b.snapshots[k];
    if (x.t != y.t || x.value_calls != y.value_calls || x.grad_calls != y.grad_calls) return false;
    if ((x.w_bar - y.w_bar).cwiseAbs().maxCoeff() != 0.0) return false;
    if ((x.q_bar - y.q_bar).cwiseAbs().maxCoeff() != 0.0) return false;
    for (std::size_t i = 0; i < x.wi_bar.size(); ++i) {
      if ((x.wi_bar[i] - y.wi_bar[i]).cwiseAbs().maxCoeff() != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("schedule values match the theorem formulas") {
  // smooth: tau1 = tau2 = 1, L = 2, t = 1 -> mu = 2/(2*sqrt(2))
  TestProblem p(2, WeightDomain::ball(4, 1.0),
                [](const Vec&, const Vec&) { return 0.0; });
  ProblemConstants c;
  c.L = 2.0;
  c.Lstar = 1.0;
  p.set_constants(c);
  const auto geo = GeometryConfig::for_domain(p.domain(), p.m());
  auto cfg = base_config(Variant::Smooth, 8, 1, 0);
  const auto s1 = schedule_eval(cfg, p, geo, 1);
  CHECK(s1.mu == doctest::Approx(0.70710678118654752).epsilon(1e-14));
  // d = 4: eta_1 = 1/(sqrt(2)*4*sqrt(2)) = 1/8
  CHECK(s1.eta_inner == doctest::Approx(0.125).epsilon(1e-14));
  CHECK(s1.eta_w == doctest::Approx(2.0 * geo.D2 * 0.125).epsilon(1e-14));
  CHECK(s1.eta_q == doctest::Approx(2.0 * std::log(2.0) * 0.125).epsilon(1e-14));

  // non-smooth: d = 4, t = 3 -> mu2 = 1/(4*16)
  cfg.variant = Variant::NonSmooth;
  const auto s3 = schedule_eval(cfg, p, geo, 3);
  CHECK(s3.mu2 == doctest::Approx(0.015625).epsilon(1e-14));
  CHECK(s3.mu1 == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(s3.eta_inner == doctest::Approx(std::sqrt(2.0) / (1.0 * 4.0 * 2.0)).epsilon(1e-14));

  CHECK_THROWS_AS(schedule_eval(cfg, p, geo, 0), std::invalid_argument);
}

TEST_CASE("missing constants error unless the fallback is set") {
  TestProblem p(1, WeightDomain::ball(2, 1.0), [](const Vec&, const Vec&) { return 0.0; });
  ProblemConstants none;
  p.set_constants(none);
  const auto geo = GeometryConfig::for_domain(p.domain(), 1);
  auto cfg = base_config(Variant::Smooth, 4, 1, 0);
  CHECK_THROWS_AS(schedule_eval(cfg, p, geo, 1), std::invalid_argument);
  cfg.schedule_fallback = true;
  CHECK_NOTHROW(schedule_eval(cfg, p, geo, 1));
}

TEST_CASE("schedules decrease strictly in t") {
  const auto p = fixtures::quadratic5();
  const auto geo = GeometryConfig::for_domain(p.domain(), p.m());
  for (auto variant : {Variant::Smooth, Variant::NonSmooth}) {
    auto cfg = base_config(variant, 4, 1, 0);
    auto prev = schedule_eval(cfg, p, geo, 1);
    for (long t = 2; t <= 100; ++t) {
      const auto cur = schedule_eval(cfg, p, geo, t);
      CHECK(cur.eta_inner < prev.eta_inner);
      CHECK(cur.eta_w < prev.eta_w);
      CHECK(cur.eta_q < prev.eta_q);
      if (variant == Variant::Smooth) CHECK(cur.mu < prev.mu);
      if (variant == Variant::NonSmooth) {
        CHECK(cur.mu1 < prev.mu1);
        CHECK(cur.mu2 < prev.mu2);
      }
      prev = cur;
    }
  }
}

TEST_CASE("partial averaging windows") {
  PrefixAverager avg(2);
  std::vector<Vec> xs;
  std::vector<double> etas;
  RandomStream s(17);
  for (int t = 1; t <= 9; ++t) {
    Vec x(2);
    x << s.uniform(), s.uniform();
    const double eta = 0.1 + s.uniform();
    xs.push_back(x);
    etas.push_back(eta);
    avg.push(eta, x);
  }
  // t = 1: the window is {1}
  CHECK((avg.average(1) - xs[0]).norm() <= 1e-15);
  // t = 4: the window is {2, 3, 4}
  Vec direct = Vec::Zero(2);
  double denom = 0.0;
  for (int j = 2; j <= 4; ++j) {
    direct += etas[j - 1] * xs[j - 1];
    denom += etas[j - 1];
  }
  CHECK((avg.average(4) - direct / denom).norm() <= 1e-15);
  CHECK_THROWS_AS(avg.average(0), std::invalid_argument);
  CHECK_THROWS_AS(avg.average(10), std::invalid_argument);

  PrefixAverager cavg(2);
  Vec c(2);
  c << 0.4, -0.2;
  for (int t = 1; t <= 7; ++t) cavg.push(0.3 / std::sqrt(t + 1.0), c);
  CHECK((cavg.average(7) - c).norm() <= 1e-15);
}

TEST_CASE("constant loss keeps every iterate fixed") {
  TestProblem p(1, WeightDomain::ball(3, 1.0), [](const Vec&, const Vec&) { return 0.7; });
  Solver solver(p, base_config(Variant::Smooth, 4, 2, 5));
  const Vec w1 = solver.wi()[0];
  solver.step();
  CHECK((solver.wi()[0] - w1).norm() == 0.0);
  CHECK((solver.w() - w1).norm() == 0.0);
  CHECK(solver.q()[0] == 1.0);
}

TEST_CASE("single inner step with a forced direction") {
  // linear loss <a, w> on the unit ball; forced u = a/||a||
  Vec a(3);
  a << 0.6, -0.8, 0.0;  // ||a|| = 1
  TestProblem p(1, WeightDomain::ball(3, 1.0),
                [a](const Vec& w, const Vec&) { return a.dot(w); },
                [a](const Vec&, const Vec&) { return a; });
  auto cfg = base_config(Variant::Smooth, 2, 3, 1);
  cfg.direction_override = [a](long, int, int, bool) { return a; };
  Solver solver(p, cfg);
  const auto geo = solver.geometry();
  const auto s1 = schedule_eval(cfg, p, geo, 1);
  solver.step();
  // linear losses make the difference quotient exact: estimate = d*<a,u>*u
  const Vec expected =
      p.domain().project(Vec::Zero(3) - s1.eta_inner * (3.0 * a.dot(a)) * a);
  CHECK((solver.wi()[0] - expected).norm() <= 1e-14);
}

TEST_CASE("one smooth round reproduces the estimator-module path") {
  const auto p = fixtures::quadratic5();
  auto cfg = base_config(Variant::Smooth, 2, 3, 42);
  Solver solver(p, cfg);
  const auto geo = solver.geometry();
  const auto s1 = schedule_eval(cfg, p, geo, 1);

  // reconstruct round-1 batches and directions from the stream contract
  RandomStream root(cfg.seed);
  std::vector<std::vector<Vec>> batches(3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < cfg.r; ++j) {
      auto st = root.fork(StreamPurpose::Sample, 1, i + 1, j + 1);
      batches[i].push_back(p.draw(i, st));
    }
  }
  std::vector<Vec> outer_dirs;
  for (int j = 0; j < cfg.r; ++j) {
    auto st = root.fork(StreamPurpose::OuterDirection, 1, 0, j + 1);
    outer_dirs.push_back(sample_unit_sphere(st, 5));
  }
  const LossFn loss = [&p](const Vec& w, const Vec& z) { return p.loss(w, z); };
  const Vec w1 = p.domain().dgf_center();
  const Vec q1 = uniform_simplex(3);
  // at t = 1 the partial averages equal the initial iterate
  const std::vector<Vec> anchors(3, w1);
  const Vec gw = gw_hat(loss, w1, q1, batches, outer_dirs, s1.mu);
  const Vec gq = gq_hat(loss, w1, anchors, batches);
  const Vec w2 = mirror_step_weight(w1, gw, s1.eta_w, p.domain());
  const Vec q2 = mirror_step_simplex(q1, gq, s1.eta_q);

  solver.step();
  CHECK((solver.w() - w2).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((solver.q() - q2).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("feasibility and partial-average consistency along a run") {
  const auto p = fixtures::quadratic5();
  auto cfg = base_config(Variant::Smooth, 64, 2, 7);
  cfg.checkpoints = {2, 5, 9, 16, 23, 31, 40, 47, 55, 64};

  struct Capture {
    std::vector<Vec> w, q;
    std::vector<std::vector<Vec>> wi;
    std::vector<Schedules> sched;
  } cap;
  Solver solver(p, cfg);
  const auto traj = solver.run([&](const RoundView& view) {
    CHECK(p.domain().distance(view.w) <= 1e-10);
    CHECK(on_simplex(view.q, 1e-12));
    for (const auto& wi : view.wi) CHECK(p.domain().distance(wi) <= 1e-10);
    cap.w.push_back(view.w);
    cap.q.push_back(view.q);
    cap.wi.push_back(view.wi);
    cap.sched.push_back(view.sched);
  });
  REQUIRE(traj.completed);
  REQUIRE(traj.snapshots.size() == cfg.checkpoints.size());

  // direct recomputation of the windowed averages from the raw iterates
  auto direct_avg = [&](long t, auto pick, auto weight) {
    Vec acc = Vec::Zero(pick(0).size());
    double denom = 0.0;
    for (long j = (t + 1) / 2; j <= t; ++j) {
      acc += weight(j) * pick(j - 1);
      denom += weight(j);
    }
    return Vec(acc / denom);
  };
  for (const auto& snap : traj.snapshots) {
    const long t = snap.t;
    const Vec wbar = direct_avg(
        t, [&](long j) { return cap.w[static_cast<std::size_t>(j)]; },
        [&](long j) { return cap.sched[static_cast<std::size_t>(j - 1)].eta_w; });
    CHECK((snap.w_bar - wbar).cwiseAbs().maxCoeff() <= 1e-10);
    const Vec qbar = direct_avg(
        t, [&](long j) { return cap.q[static_cast<std::size_t>(j)]; },
        [&](long j) { return cap.sched[static_cast<std::size_t>(j - 1)].eta_q; });
    CHECK((snap.q_bar - qbar).cwiseAbs().maxCoeff() <= 1e-10);
    for (int i = 0; i < 3; ++i) {
      const Vec wibar = direct_avg(
          t, [&](long j) { return cap.wi[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]; },
          [&](long j) { return cap.sched[static_cast<std::size_t>(j - 1)].eta_inner; });
      CHECK((snap.wi_bar[static_cast<std::size_t>(i)] - wibar).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("determinism under reruns and worker counts") {
  const auto p = fixtures::quadratic5();
  for (auto variant : {Variant::Smooth, Variant::NonSmooth, Variant::FirstOrderBaseline}) {
    auto cfg = base_config(variant, 32, 2, 11);
    const auto t1 = run_solver(p, cfg);
    const auto t2 = run_solver(p, cfg);
    CHECK(snapshots_equal(t1, t2));
    cfg.workers = 4;
    const auto t4 = run_solver(p, cfg);
    CHECK(snapshots_equal(t1, t4));
  }
}

TEST_CASE("symmetric twin distributions keep q at one half") {
  // identical noiseless distributions and shared inner directions: both
  // inner trajectories coincide, so g_q has equal components every round
  Vec c = Vec::Zero(3);
  c << 0.4, -0.1, 0.2;
  ShiftedQuadratic p(WeightDomain::ball(3, 1.0), {c, c}, {0.0, 0.0}, {0.0, 0.0});
  auto cfg = base_config(Variant::Smooth, 64, 2, 3);
  cfg.share_inner_directions = true;
  Solver solver(p, cfg);
  const auto traj = solver.run([&](const RoundView& view) {
    CHECK(std::abs(view.q[0] - 0.5) <= 1e-12);
    CHECK(std::abs(view.q[1] - 0.5) <= 1e-12);
  });
  CHECK(traj.completed);
}

TEST_CASE("m = 1 keeps the vertex weight") {
  ShiftedQuadratic p(WeightDomain::ball(2, 1.0), {Vec::Zero(2)}, {0.1}, {0.0});
  Solver solver(p, base_config(Variant::Smooth, 16, 1, 9));
  const auto traj = solver.run([&](const RoundView& view) { CHECK(view.q[0] == 1.0); });
  CHECK(traj.completed);
  CHECK(traj.snapshots.back().q_bar[0] == 1.0);
}

TEST_CASE("oracle call accounting") {
  const auto p = fixtures::quadratic5();
  const long T = 16;
  const int r = 3;
  const int m = 3;
  {
    const auto traj = run_solver(p, base_config(Variant::Smooth, T, r, 1));
    // 2mr inner + 3mr outer (l(w_t;z) shared between g_w and g_q)
    CHECK(traj.value_calls == static_cast<std::uint64_t>(5 * m * r * T));
    CHECK(traj.grad_calls == 0);
  }
  {
    const auto abs = fixtures::absolute4();
    const auto traj = run_solver(abs, base_config(Variant::NonSmooth, T, r, 1));
    CHECK(traj.value_calls == static_cast<std::uint64_t>(6 * 2 * r * T));
    CHECK(traj.grad_calls == 0);
  }
  {
    const auto traj = run_solver(p, base_config(Variant::FirstOrderBaseline, T, r, 1));
    CHECK(traj.grad_calls == static_cast<std::uint64_t>(2 * m * r * T));
    CHECK(traj.value_calls == static_cast<std::uint64_t>(2 * m * r * T));
  }
}

TEST_CASE("estimator blow-up aborts with diagnostics") {
  int calls = 0;
  TestProblem p(2, WeightDomain::ball(2, 1.0), [&calls](const Vec& w, const Vec&) mutable {
    ++calls;
    if (calls > 40) return std::numeric_limits<double>::quiet_NaN();
    return 0.5 * w.squaredNorm();
  });
  const auto traj = run_solver(p, base_config(Variant::Smooth, 8, 2, 2));
  CHECK(!traj.completed);
  CHECK(traj.error.find("round") != std::string::npos);
  CHECK(traj.error.find("distribution") != std::string::npos);
}

TEST_CASE("config validation") {
  const auto p = fixtures::quadratic5();
  CHECK_THROWS_WITH_AS(Solver(p, base_config(Variant::Smooth, 1, 1, 0)), "T must be >= 2",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(Solver(p, base_config(Variant::Smooth, 4, 0, 0)), "r must be >= 1",
                       std::invalid_argument);
  auto cfg = base_config(Variant::Smooth, 4, 1, 0);
  cfg.checkpoints = {1, 2};
  CHECK_THROWS_AS(Solver(p, cfg), std::invalid_argument);
  cfg.checkpoints = {3, 3};
  CHECK_THROWS_AS(Solver(p, cfg), std::invalid_argument);
  cfg.checkpoints = {2, 4};
  CHECK_NOTHROW(Solver(p, cfg));

  // baseline needs gradients
  TestProblem nograd(1, WeightDomain::ball(2, 1.0), [](const Vec&, const Vec&) { return 0.0; });
  CHECK_THROWS_AS(Solver(nograd, base_config(Variant::FirstOrderBaseline, 4, 1, 0)),
                  std::invalid_argument);
}

TEST_CASE("sampling ablations stay deterministic and change the trajectory") {
  const auto p = fixtures::quadratic5();
  auto base = base_config(Variant::Smooth, 32, 2, 13);
  const auto ref = run_solver(p, base);

  auto resample = base;
  resample.resample_outer = true;
  const auto t_res = run_solver(p, resample);
  CHECK(t_res.completed);
  CHECK(snapshots_equal(t_res, run_solver(p, resample)));
  CHECK(!snapshots_equal(ref, t_res));
  CHECK(t_res.value_calls == ref.value_calls);

  auto per_dist = base;
  per_dist.share_outer_directions = false;
  const auto t_pd = run_solver(p, per_dist);
  CHECK(t_pd.completed);
  CHECK(!snapshots_equal(ref, t_pd));
  CHECK(t_pd.value_calls == ref.value_calls);
}

TEST_CASE("T = 2 with checkpoint at 2 yields exactly one snapshot") {
  const auto p = fixtures::quadratic5();
  auto cfg = base_config(Variant::Smooth, 2, 1, 0);
  cfg.checkpoints = {2};
  const auto traj = run_solver(p, cfg);
  CHECK(traj.completed);
  CHECK(traj.snapshots.size() == 1);
  CHECK(traj.snapshots[0].t == 2);
}

TEST_CASE("geometric checkpoint grid") {
  CHECK(geometric_checkpoints(16) == std::vector<long>{2, 4, 8, 16});
  CHECK(geometric_checkpoints(20) == std::vector<long>{2, 4, 8, 16, 20});
  CHECK(geometric_checkpoints(2) == std::vector<long>{2});
}
