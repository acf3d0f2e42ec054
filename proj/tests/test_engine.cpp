#include <doctest.h>

#include <cmath>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "csopt/diagnostics.hpp"
#include "csopt/engine.hpp"
#include "csopt/errors.hpp"
#include "csopt/problems.hpp"
#include "csopt/runner.hpp"

using namespace csopt;

namespace {

Vector v1(double a) { return Vector::Constant(1, a); }
Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

Sample sample(double x, double y) { return {v1(x), v1(y)}; }

}  // namespace

TEST_CASE("direction at hand-evaluated states") {
  const BuiltinProblem bt = make_bernoulli_testbed();
  Direction d = compute_direction(bt.spec, {v1(0), v2(0, 0), 0}, sample(1, 1), 1.0);
  CHECK(d.d_beta[0] == 0.0);
  CHECK(d.d_theta[0] == 1.0);
  CHECK(d.d_theta[1] == 1.0);

  d = compute_direction(bt.spec, {v1(0), v2(0.2, 0.5), 0}, sample(0, 0), 1.0);
  CHECK(d.d_beta[0] == 0.0);
  CHECK(d.d_theta[0] == doctest::Approx(-0.2));
  CHECK(d.d_theta[1] == 0.0);

  // f = psi and grad g(psi) = 0: both blocks vanish.
  d = compute_direction(bt.spec, {v1(1), v2(0, 0), 0}, sample(1, 1), 3.0);
  CHECK(d.squared_norm() == 0.0);
}

TEST_CASE("direction uses exactly one evaluation of each evaluator") {
  BuiltinProblem bt = make_bernoulli_testbed();
  int inner = 0, outer = 0, model = 0;
  auto f = bt.spec.inner;
  auto g = bt.spec.outer;
  auto m = bt.spec.model;
  bt.spec.inner = [&](const Vector& x, const Vector& y, const Vector& b) { ++inner; return f(x, y, b); };
  bt.spec.outer = [&](const Vector& u) { ++outer; return g(u); };
  bt.spec.model = [&](const Vector& x, const Vector& t) { ++model; return m(x, t); };
  compute_direction(bt.spec, {v1(0.3), v2(0.1, 0.2), 0}, sample(1, 0), 2.0);
  CHECK(inner == 1);
  CHECK(outer == 1);
  CHECK(model == 1);
}

TEST_CASE("update step") {
  IterateState s{v1(0), v2(0, 0), 4};
  IterateState next = step(s, {v1(0), v2(1, 1)}, 0.1);
  CHECK(next.beta[0] == 0.0);
  CHECK(next.theta[0] == doctest::Approx(0.1));
  CHECK(next.theta[1] == doctest::Approx(0.1));
  CHECK(next.k == 5);

  next = step(s, {v1(0), v2(0, 0)}, 7.0);
  CHECK(next.beta == s.beta);
  CHECK(next.theta == s.theta);
  CHECK(next.k == 5);

  next = step({v1(2), v2(0, 0), 0}, {v1(1), v2(0, 0)}, 1.0);
  CHECK(next.beta[0] == 3.0);
  CHECK_THROWS_AS(step(s, {v1(0), v2(0, 0)}, 0.0), ConfigError);
}

TEST_CASE("stepsize schedules") {
  CHECK(stepsize(Schedule::kFixedHorizon, 7, 100, 2.0) == doctest::Approx(0.2));
  CHECK(stepsize(Schedule::kFixedHorizon, 0, 100, 2.0) == stepsize(Schedule::kFixedHorizon, 99, 100, 2.0));
  CHECK(stepsize(Schedule::kAnytime, 0, 50, 1.0) == 1.0);
  CHECK(stepsize(Schedule::kAnytime, 3, 50, 1.0) == 0.5);
  CHECK_THROWS_AS(stepsize(Schedule::kAnytime, 50, 50, 1.0), ConfigError);
}

TEST_CASE("stop index laws") {
  Rng rng(2024);
  CHECK(draw_stop_index(Schedule::kFixedHorizon, 1, 1.0, rng) == 0);
  CHECK(draw_stop_index(Schedule::kAnytime, 1, 1.0, rng) == 0);

  const int draws = 1000000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < draws; ++i) ++counts[draw_stop_index(Schedule::kFixedHorizon, 4, 1.0, rng)];
  for (int c : counts) CHECK(std::abs(c / double(draws) - 0.25) < 0.002);

  int zero = 0;
  for (int i = 0; i < draws; ++i) zero += draw_stop_index(Schedule::kAnytime, 2, 1.0, rng) == 0;
  CHECK(std::abs(zero / double(draws) - 1.0 / (1.0 + 1.0 / std::sqrt(2.0))) < 0.002);

  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) {
    CHECK(draw_stop_index(Schedule::kAnytime, 37, 1.0, a) ==
          draw_stop_index(Schedule::kAnytime, 37, 1.0, b));
  }
}

TEST_CASE("stop index passes chi-square goodness of fit") {
  const long n = 64;
  const int draws = 100000;
  const boost::math::chi_squared dist(n - 1);
  const double critical = boost::math::quantile(boost::math::complement(dist, 1e-3));
  for (Schedule schedule : {Schedule::kFixedHorizon, Schedule::kAnytime}) {
    CAPTURE(to_string(schedule));
    Rng rng(777);
    std::vector<double> counts(n, 0.0), expected(n, 0.0);
    double total = 0.0;
    for (long k = 0; k < n; ++k) total += stepsize(schedule, k, n, 1.0);
    for (long k = 0; k < n; ++k) expected[k] = draws * stepsize(schedule, k, n, 1.0) / total;
    for (int i = 0; i < draws; ++i) counts[draw_stop_index(schedule, n, 1.0, rng)] += 1.0;
    double stat = 0.0;
    for (long k = 0; k < n; ++k) stat += (counts[k] - expected[k]) * (counts[k] - expected[k]) / expected[k];
    CHECK(stat < critical);
  }
}

TEST_CASE("run validates its configuration") {
  const BuiltinProblem bt = make_bernoulli_testbed();
  RunConfig c;
  c.n_iters = 0;
  CHECK_THROWS_AS(run(bt.spec, c), ConfigError);
  c.n_iters = 10;
  c.gamma = -1.0;
  CHECK_THROWS_AS(run(bt.spec, c), ConfigError);
  c.gamma = 1.0;
  c.init_theta = v1(0);
  CHECK_THROWS_AS(run(bt.spec, c), ConfigError);
  c.init_theta.reset();
  c.diag_every = 5;
  CHECK_THROWS_AS(run(bt.spec, c), ConfigError);
}

TEST_CASE("run reduces the tracking error on the Bernoulli testbed") {
  const BuiltinProblem bt = make_bernoulli_testbed();
  RunConfig c;
  c.gamma = 1.0;
  c.alpha = 0.5;
  c.n_iters = 10000;
  c.seed = 1;
  const RunRecord r = run(bt.spec, c);
  REQUIRE(r.trajectory.size() == 10001);
  CHECK(r.trajectory.front().beta[0] == 0.0);
  const double q0 = tracking_error_Q(bt.spec, v1(0), v2(0, 0), DiagnosticsMode::exact()).value;
  CHECK(q0 == doctest::Approx(0.1325).epsilon(1e-12));
  const IterateState end = r.final_state();
  CHECK(end.k == 10000);
  CHECK(tracking_error_Q(bt.spec, end.beta, end.theta, DiagnosticsMode::exact()).value < q0);
  CHECK(r.stop_index >= 0);
  CHECK(r.stop_index < 10000);
  CHECK(r.stopped_state.beta == r.trajectory[r.stop_index].beta);
  CHECK(r.trajectory_samples == 10000);
  CHECK(r.diagnostics_samples == 0);
}

TEST_CASE("identical configuration gives an identical record") {
  const BuiltinProblem lg = make_linear_gaussian(2, 4);
  RunConfig c;
  c.gamma = 2.0;
  c.alpha = 0.3;
  c.n_iters = 500;
  c.schedule = Schedule::kAnytime;
  c.seed = 42;
  c.diag_every = 100;
  c.diagnostics = DiagnosticsSettings{1.0, 2.0, 1.0, 1.0, DiagnosticsMode::monte_carlo(200, 0)};
  const RunRecord a = run(lg.spec, c), b = run(lg.spec, c);
  REQUIRE(a.trajectory.size() == b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
    REQUIRE(a.trajectory[i].beta == b.trajectory[i].beta);
    REQUIRE(a.trajectory[i].theta == b.trajectory[i].theta);
    REQUIRE(a.trajectory[i].tau == b.trajectory[i].tau);
  }
  CHECK(a.stop_index == b.stop_index);
  REQUIRE(a.diagnostics.size() == 6);
  for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
    CHECK(a.diagnostics[i].v_value == b.diagnostics[i].v_value);
    CHECK(a.diagnostics[i].k == static_cast<long>(100 * i));
  }
  // Diagnostics draw from their own stream and are counted separately.
  CHECK(a.trajectory_samples == 500);
  CHECK(a.diagnostics_samples == 6 * 200);
  c.diag_every = 0;
  const RunRecord plain = run(lg.spec, c);
  CHECK(plain.final_state().beta == a.final_state().beta);
  CHECK(plain.stop_index == a.stop_index);
}

TEST_CASE("sample mean of directions converges to the expected direction") {
  const BuiltinProblem bt = make_bernoulli_testbed();
  Rng probes(31);
  for (int p = 0; p < 5; ++p) {
    const Vector beta = v1(uniform01(probes));
    const Vector theta = v2(2 * uniform01(probes) - 1, 2 * uniform01(probes) - 1);
    const double gamma = 3.0;
    Rng rng(100 + p);
    const DirectionMoments m = direction_moment_stats(bt.spec, beta, theta, gamma, 100000, rng);
    const Vector expected =
        expected_direction_Gamma(bt.spec, beta, theta, gamma, DiagnosticsMode::exact()).stacked();
    const Vector mean = m.mean.stacked();
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      CHECK(std::abs(mean[i] - expected[i]) <= 4.0 * m.mean_stderr[i] + 1e-15);
    }
  }
}

TEST_CASE("linear outer reduces to plain SGD, bit for bit") {
  const BuiltinProblem lin = make_linear_outer();
  RunConfig c;
  c.gamma = 5.0;
  c.alpha = 0.7;
  c.n_iters = 2000;
  c.seed = 8;
  const RunRecord r = run(lin.spec, c);

  Rng rng = make_stream(c.seed, StreamId::kTrajectory);
  double beta = 0.0;
  const double tau = c.alpha / std::sqrt(static_cast<double>(c.n_iters));
  for (long k = 0; k < c.n_iters; ++k) {
    REQUIRE(r.trajectory[k].beta[0] == beta);
    const Sample s = sample_joint(lin.spec, rng);
    const double grad = -2.0 * (s.y[0] - beta);  // d/dbeta (y - beta)^2
    beta = beta - tau * grad;
  }
  CHECK(r.final_state().beta[0] == beta);
}
