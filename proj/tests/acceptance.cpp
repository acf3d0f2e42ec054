// Acceptance suite: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "csopt/cli.hpp"
#include "csopt/constants.hpp"
#include "csopt/diagnostics.hpp"
#include "csopt/engine.hpp"
#include "csopt/harness.hpp"
#include "csopt/numfmt.hpp"
#include "csopt/probe.hpp"
#include "csopt/problems.hpp"
#include "csopt/runner.hpp"

using namespace csopt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

const DiagnosticsMode kExact = DiagnosticsMode::exact();

std::string fmt(double v) { return format_double(v); }

// Compliant constants for the shipped analytic BT ledger.
struct Compliant {
  ConstantLedger ledger;
  double lambda, gamma;
  DescentCoefficients c;
  LipschitzW lw;
};

Compliant compliant_bt() {
  Compliant k;
  k.ledger = make_bernoulli_testbed().ledger;
  k.lambda = lambda_for_min_gamma(k.ledger);
  k.gamma = 1.5 * gamma_min(k.ledger, k.lambda);
  k.c = descent_coefficients(k.ledger, k.lambda, k.gamma);
  k.lw = lipschitz_W(k.ledger, k.lambda);
  return k;
}

// Criteria 1 and 2 share one sweep.
struct Sweep {
  ExperimentResult result;
  double estimated_gamma_min = 0.0;
};

const Sweep& rate_sweep() {
  static const Sweep sweep = [] {
    ExperimentConfig config = parse_experiment_config(read_key_values(CSOPT_RATE_CONFIG));
    config.output_dir = std::filesystem::temp_directory_path() / "csopt_acceptance_rate";
    Sweep s;
    s.result = run_experiment(config, default_workers());
    write_outputs(config, s.result);
    const ConstantLedger& l = s.result.setup.ledger;
    s.estimated_gamma_min = gamma_min(l, lambda_for_min_gamma(l));
    return s;
  }();
  return sweep;
}

Outcome rate_reproduction() {
  const Sweep& s = rate_sweep();
  std::vector<RatePoint> points;
  for (const SummaryRow& r : s.result.summary) points.push_back({double(r.n), r.mean_v});
  const RateFit fit = rate_fit(points);
  std::ostringstream d;
  d << "slope=" << fmt(fit.slope) << " r2=" << fmt(fit.r_squared)
    << " alpha*=" << fmt(s.result.setup.alpha)
    << " (estimated-ledger gamma_min=" << fmt(s.estimated_gamma_min) << ")";
  for (const SummaryRow& r : s.result.summary) {
    d << " V(" << r.n << ")=" << fmt(r.mean_v) << "+-" << fmt(r.stderr_v);
  }
  const bool ok =
      fit.slope >= kRateSlopeLow && fit.slope <= kRateSlopeHigh && fit.r_squared >= 0.9;
  return {ok, d.str()};
}

Outcome bound_validity() {
  const Sweep& s = rate_sweep();
  const ExperimentSetup& setup = s.result.setup;
  bool ok = true;
  std::ostringstream d;
  d << "L_W=" << fmt(setup.lipschitz.total) << " Cd^2=" << fmt(setup.moments.c_d_sq)
    << " sigma^2=" << fmt(setup.moments.sigma_sq) << " W0=" << fmt(setup.w0)
    << " Gmin=" << fmt(setup.g_min);
  for (const SummaryRow& r : s.result.summary) {
    const double bound =
        theorem_bound(setup.lipschitz.total, std::sqrt(setup.moments.c_d_sq),
                      std::sqrt(setup.moments.sigma_sq), setup.alpha, r.n, setup.w0, setup.g_min);
    ok = ok && r.mean_v <= bound;
    d << " N=" << r.n << ":" << fmt(r.mean_v) << "<=" << fmt(bound);
  }
  return {ok, d.str()};
}

Outcome descent_inequality() {
  const BuiltinProblem bt = make_bernoulli_testbed();
  const Compliant k = compliant_bt();
  Rng rng = make_stream(3, StreamId::kProbes);
  int failures = 0;
  double worst = -1e300;
  for (int p = 0; p < 100; ++p) {
    const Vector beta = draw_in_box(bt.box.beta_lo, bt.box.beta_hi, rng);
    const Vector theta = draw_in_box(bt.box.theta_lo, bt.box.theta_hi, rng);
    const DescentCheck c = descent_check(bt.spec, beta, theta, k.gamma, k.lambda, k.c.c1, k.c.c2);
    failures += !c.pass;
    worst = std::max(worst, c.lhs - c.rhs);
  }
  return {failures == 0, "lambda=" + fmt(k.lambda) + " gamma=" + fmt(k.gamma) +
                             " failures=" + std::to_string(failures) +
                             " max(lhs-rhs)=" + fmt(worst)};
}

Outcome one_step_recursion() {
  const BuiltinProblem bt = make_bernoulli_testbed();
  const Compliant k = compliant_bt();
  const double tau = 0.01;
  const int steps = 10000;
  Rng probe_rng = make_stream(4, StreamId::kProbes);
  Rng rng = make_stream(4, StreamId::kTrajectory);
  int failures = 0;
  double worst_slack = 1e300;
  for (int p = 0; p < 20; ++p) {
    const IterateState z{draw_in_box(bt.box.beta_lo, bt.box.beta_hi, probe_rng),
                         draw_in_box(bt.box.theta_lo, bt.box.theta_hi, probe_rng), 0};
    const double w = bregman_delta_and_W(bt.spec, z.beta, z.theta, k.lambda, kExact).w.value;
    const double v = nonoptimality_V(bt.spec, z.beta, z.theta, k.c.c1, k.c.c2, kExact);
    double sum = 0.0, sum_sq = 0.0, d_sq = 0.0;
    for (int s = 0; s < steps; ++s) {
      const Direction d = compute_direction(bt.spec, z, sample_joint(bt.spec, rng), k.gamma);
      const IterateState next = step(z, d, tau);
      const double wn = bregman_delta_and_W(bt.spec, next.beta, next.theta, k.lambda, kExact).w.value;
      sum += wn;
      sum_sq += wn * wn;
      d_sq += d.squared_norm();
    }
    const double mean = sum / steps;
    const double var = std::max(0.0, (sum_sq - steps * mean * mean) / (steps - 1));
    const double stderr_w = std::sqrt(var / steps);
    // Measured E||d||^2 = C_d^2 + sigma^2 at this state.
    const double moments = d_sq / steps;
    const double rhs = w - tau * v + 0.5 * k.lw.total * tau * tau * moments + 4.0 * stderr_w;
    failures += !(mean <= rhs);
    worst_slack = std::min(worst_slack, rhs - mean);
  }
  return {failures == 0, "tau=0.01 states=20 steps=10000 failures=" + std::to_string(failures) +
                             " min slack=" + fmt(worst_slack)};
}

Outcome gradient_consistency() {
  const BuiltinProblem bt = make_bernoulli_testbed();
  Rng rng = make_stream(5, StreamId::kProbes);
  double worst = 0.0, oracle = 0.0;
  for (int p = 0; p < 50; ++p) {
    const Vector beta = draw_in_box(bt.box.beta_lo, bt.box.beta_hi, rng);
    const Vector theta = draw_in_box(bt.box.theta_lo, bt.box.theta_hi, rng);
    const double lambda = 1.0 + 4.0 * uniform01(rng);
    auto scalar = [](double x) { return Vector::Constant(1, x); };

    const Matrix fd_g = central_difference(
        [&](const Vector& b) { return scalar(objective_G(bt.spec, b, kExact).value); }, beta);
    worst = std::max(worst, relative_error(grad_G(bt.spec, beta, kExact).value, fd_g));

    const GradW gw = grad_W(bt.spec, beta, theta, lambda, kExact);
    const Matrix fd_wb = central_difference(
        [&](const Vector& b) {
          return scalar(bregman_delta_and_W(bt.spec, b, theta, lambda, kExact).w.value);
        },
        beta);
    const Matrix fd_wt = central_difference(
        [&](const Vector& t) {
          return scalar(bregman_delta_and_W(bt.spec, beta, t, lambda, kExact).w.value);
        },
        theta);
    worst = std::max(worst, relative_error(gw.grad_beta, fd_wb));
    worst = std::max(worst, relative_error(gw.grad_theta, fd_wt));

    const Matrix fd_q = central_difference(
        [&](const Vector& t) { return scalar(tracking_error_Q(bt.spec, beta, t, kExact).value); },
        theta);
    worst = std::max(worst, relative_error(grad_Q_theta(bt.spec, beta, theta, kExact), fd_q));

    oracle = std::max(oracle, oracle_deviation(bt.spec, beta));
  }
  return {worst < 1e-5 && oracle <= 1e-10,
          "probes=50 max rel err=" + fmt(worst) + " oracle deviation=" + fmt(oracle)};
}

Outcome direction_moments() {
  const BuiltinProblem bt = make_bernoulli_testbed();
  const double gamma = 20.0;
  const int n = 100000;
  Rng probe_rng = make_stream(6, StreamId::kProbes);
  Rng rng = make_stream(6, StreamId::kDiagnostics);
  int bias_failures = 0, ratio_failures = 0;
  double max_z = 0.0, ratio_lo = 1e300, ratio_hi = 0.0;
  for (int p = 0; p < 20; ++p) {
    const Vector beta = draw_in_box(bt.box.beta_lo, bt.box.beta_hi, probe_rng);
    const Vector theta = draw_in_box(bt.box.theta_lo, bt.box.theta_hi, probe_rng);
    const DirectionMoments m = direction_moment_stats(bt.spec, beta, theta, gamma, n, rng);
    const Vector expected = expected_direction_Gamma(bt.spec, beta, theta, gamma, kExact).stacked();
    const Vector mean = m.mean.stacked();
    for (Eigen::Index i = 0; i < mean.size(); ++i) {
      const double gap = std::abs(mean[i] - expected[i]);
      if (m.mean_stderr[i] > 0.0) max_z = std::max(max_z, gap / m.mean_stderr[i]);
      bias_failures += !(gap <= 4.0 * m.mean_stderr[i]);
    }
    const DirectionMoments m2 = direction_moment_stats(bt.spec, beta, theta, gamma, 2 * n, rng);
    for (double r : {m2.second_moment / m.second_moment, m2.sigma_sq / m.sigma_sq}) {
      ratio_lo = std::min(ratio_lo, r);
      ratio_hi = std::max(ratio_hi, r);
      ratio_failures += !(std::isfinite(r) && r >= 0.9 && r <= 1.1);
    }
  }
  return {bias_failures == 0 && ratio_failures == 0,
          "probes=20 max |z|=" + fmt(max_z) + " doubling ratios in [" + fmt(ratio_lo) + ", " +
              fmt(ratio_hi) + "]"};
}

Outcome sgd_reduction() {
  const BuiltinProblem lin = make_linear_outer();
  RunConfig c;
  c.gamma = 20.0;
  c.alpha = 0.5;
  c.n_iters = 10000;
  c.seed = 7;
  const RunRecord r = run(lin.spec, c);
  Rng rng = make_stream(c.seed, StreamId::kTrajectory);
  const double tau = c.alpha / std::sqrt(static_cast<double>(c.n_iters));
  double beta = 0.0;
  long mismatches = 0;
  for (long k = 0; k <= c.n_iters; ++k) {
    mismatches += r.trajectory[k].beta[0] != beta;
    if (k == c.n_iters) break;
    const Sample s = sample_joint(lin.spec, rng);
    beta -= tau * (-2.0 * (s.y[0] - beta));
  }
  return {mismatches == 0, "N=10000 mismatched iterates=" + std::to_string(mismatches)};
}

Outcome stopping_law() {
  const long n = 64;
  const int draws = 100000;
  const boost::math::chi_squared dist(n - 1);
  const double critical = boost::math::quantile(boost::math::complement(dist, 1e-3));
  bool ok = true;
  std::ostringstream d;
  d << "critical=" << fmt(critical);
  for (Schedule schedule : {Schedule::kFixedHorizon, Schedule::kAnytime}) {
    Rng rng = make_stream(8, StreamId::kStopIndex);
    std::vector<double> counts(n, 0.0);
    double total = 0.0;
    for (long k = 0; k < n; ++k) total += stepsize(schedule, k, n, 1.0);
    for (int i = 0; i < draws; ++i) counts[draw_stop_index(schedule, n, 1.0, rng)] += 1.0;
    double stat = 0.0;
    for (long k = 0; k < n; ++k) {
      const double expected = draws * stepsize(schedule, k, n, 1.0) / total;
      stat += (counts[k] - expected) * (counts[k] - expected) / expected;
    }
    ok = ok && stat < critical;
    d << " " << to_string(schedule) << "=" << fmt(stat);
  }
  return {ok, d.str()};
}

Outcome constants_arithmetic() {
  const DerivedConstants d = derive_constants(ConstantLedger::all_ones(), 3.0, 20.0);
  // c1 = 8 - 9 / 1.5625 is not representable; compare within one ulp of 2.24.
  const bool c1_ok = std::abs(d.c1 - 2.24) <= 4.5e-16;
  const bool ok = d.cap_C == 8.0 && d.epsilon == 1.5625 && c1_ok && d.c2 == 0.21875 &&
                  d.L_W_beta == 18.0 && d.L_W_theta == 16.0 && d.L_W == std::sqrt(580.0);
  return {ok, "C=" + fmt(d.cap_C) + " eps=" + fmt(d.epsilon) + " c1=" + fmt(d.c1) +
                  " c2=" + fmt(d.c2) + " L_W_beta=" + fmt(d.L_W_beta) +
                  " L_W_theta=" + fmt(d.L_W_theta) + " L_W=" + fmt(d.L_W)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"rate reproduction", rate_reproduction},
      {"theorem bound validity", bound_validity},
      {"descent inequality", descent_inequality},
      {"one-step recursion", one_step_recursion},
      {"gradient and formula consistency", gradient_consistency},
      {"direction unbiasedness and moments", direction_moments},
      {"linear outer reduces to SGD", sgd_reduction},
      {"stopping law", stopping_law},
      {"constants arithmetic", constants_arithmetic},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
