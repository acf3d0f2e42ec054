#include "csopt/cli.hpp"

#include <iomanip>

#include "csopt/constants.hpp"
#include "csopt/diagnostics.hpp"
#include "csopt/errors.hpp"
#include "csopt/harness.hpp"
#include "csopt/numfmt.hpp"
#include "csopt/probe.hpp"
#include "csopt/problems.hpp"

namespace csopt {

namespace {

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
  } catch (const CapabilityError& e) {
    err << "capability error: " << e.what() << "\n";
  } catch (const EvaluationError& e) {
    err << "evaluation error: " << e.what() << "\n";
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitError;
}

void row(std::ostream& out, const std::string& name, double value) {
  out << "  " << std::left << std::setw(15) << name << format_double(value) << "\n";
}

}  // namespace

int cli_run(const std::filesystem::path& config_path, int workers, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig config = parse_experiment_config(read_key_values(config_path));
    const ExperimentResult result = run_experiment(config, workers);
    write_outputs(config, result);
    const ExperimentSetup& s = result.setup;
    out << "problem " << s.problem.spec.name << ", gamma " << format_double(config.gamma)
        << ", lambda " << format_double(s.lambda) << ", alpha " << format_double(s.alpha)
        << (s.alpha_tuned ? " (tuned)" : "") << "\n";
    for (const std::string& v : s.violations) out << "  noncompliant: " << v << "\n";
    for (const SummaryRow& r : result.summary) {
      out << "  N=" << r.n << "  mean V=" << format_double(r.mean_v)
          << "  stderr=" << format_double(r.stderr_v) << "\n";
    }
    out << "wrote " << (config.output_dir / "results.csv").string() << "\n";
    return kExitOk;
  });
}

int cli_check(const CheckOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    BuiltinProblem problem = make_problem(options.problem, options.seed);
    ConstantLedger ledger = problem.ledger;
    if (options.unit_ledger) {
      ledger = ConstantLedger::all_ones();
    } else if (options.estimated) {
      Rng rng = make_stream(options.seed, StreamId::kProbes, 1);
      LedgerEstimate est = estimate_ledger(problem.spec, problem.box, 10000, 64, rng);
      if (!est.m_estimated) est.ledger.M = problem.ledger.M;
      ledger = est.ledger;
    }
    ledger.apply(options.overrides);
    ledger.validate();

    out << "problem " << problem.spec.name << "\nledger:\n";
    for (std::string_view key : ConstantLedger::kKeys) {
      row(out, std::string(key), ledger.at(key).value);
    }
    const double lambda = options.lambda, gamma = options.gamma;
    out << "derived (lambda=" << format_double(lambda) << ", gamma=" << format_double(gamma)
        << "):\n";
    row(out, "lambda_floor", lambda_floor(ledger));
    const LipschitzW lw = lipschitz_W(ledger, lambda);
    const std::vector<std::string> violations = compliance_violations(ledger, lambda, gamma);
    if (violations.empty() || violations.front().rfind("gamma", 0) == 0 ||
        violations.front().rfind("lambda >=", 0) == 0) {
      try {
        row(out, "gamma_min", gamma_min(ledger, lambda));
      } catch (const DomainError&) {
      }
    }
    if (violations.empty()) {
      const DerivedConstants d = derive_constants(ledger, lambda, gamma);
      const double lf2 = ledger.Lbar_f.value * ledger.Lbar_f.value;
      row(out, "C", d.cap_C);
      out << "  " << std::left << std::setw(15) << "eps_range" << "("
          << format_double(lambda * lambda * lf2 / d.cap_C) << ", 2)\n";
      row(out, "epsilon", d.epsilon);
      row(out, "c1", d.c1);
      row(out, "c2", d.c2);
    }
    row(out, "L_W_beta", lw.beta);
    row(out, "L_W_theta", lw.theta);
    row(out, "L_W", lw.total);

    if (options.alpha && options.n_iters && problem.g_min) {
      const IterateState z0{Vector::Zero(problem.spec.dim_beta),
                            Vector::Zero(problem.spec.dim_theta), 0};
      const DirectionMomentBound m = measure_direction_moments(
          problem.spec, problem.box, z0, gamma, 20000, 16, options.seed);
      const DiagnosticsMode mode = DiagnosticsMode::best_for(problem.spec, 20000, options.seed);
      const double w0 = bregman_delta_and_W(problem.spec, z0.beta, z0.theta, lambda, mode).w.value;
      row(out, "C_d^2", m.c_d_sq);
      row(out, "sigma^2", m.sigma_sq);
      row(out, "W0", w0);
      row(out, "G_min", *problem.g_min);
      row(out, "bound", theorem_bound(lw.total, std::sqrt(m.c_d_sq), std::sqrt(m.sigma_sq),
                                      *options.alpha, *options.n_iters, w0, *problem.g_min));
    }

    if (!violations.empty()) {
      for (const std::string& v : violations) out << "violated: " << v << "\n";
      return kExitFail;
    }
    out << "compliant\n";
    return kExitOk;
  });
}

int cli_rate(const std::filesystem::path& summary_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RateFit fit = rate_fit(read_summary_csv(summary_path));
    out << "slope " << format_double(fit.slope) << "\nintercept " << format_double(fit.intercept)
        << "\nr_squared " << format_double(fit.r_squared) << "\n";
    for (const RatePoint& p : fit.excluded) {
      out << "excluded N=" << format_double(p.n) << " (mean V " << format_double(p.mean_v)
          << ")\n";
    }
    const bool in_band = fit.slope >= kRateSlopeLow && fit.slope <= kRateSlopeHigh;
    out << (in_band ? "slope within " : "slope outside ") << "[" << kRateSlopeLow << ", "
        << kRateSlopeHigh << "]\n";
    return in_band ? kExitOk : kExitFail;
  });
}

int cli_gradcheck(const std::string& problem_name, int probes, std::uint64_t seed,
                  std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const BuiltinProblem problem = make_problem(problem_name, seed);
    Rng rng = make_stream(seed, StreamId::kProbes, 2);
    const GradCheckReport report = gradcheck(problem.spec, problem.box, probes, rng);
    out << "probes " << report.probes << "\n";
    row(out, "inner", report.inner);
    row(out, "model", report.model);
    row(out, "outer_grad", report.outer_grad);
    row(out, "outer_hess", report.outer_hess);
    row(out, "asymmetry", report.hess_asymmetry);
    bool ok = report.pass();
    if (problem.spec.has_support() && problem.spec.has_oracle()) {
      double worst = 0.0;
      for (int i = 0; i < probes; ++i) {
        worst = std::max(worst, oracle_deviation(problem.spec,
                                                 draw_in_box(problem.box.beta_lo,
                                                             problem.box.beta_hi, rng)));
      }
      row(out, "oracle", worst);
      ok = ok && worst <= 1e-10;
    }
    out << (ok ? "pass" : "FAIL") << "\n";
    return ok ? kExitOk : kExitFail;
  });
}

}  // namespace csopt
