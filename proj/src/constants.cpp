#include "csopt/constants.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "csopt/diagnostics.hpp"
#include "csopt/errors.hpp"
#include "csopt/numfmt.hpp"

namespace csopt {

ConstantLedger ConstantLedger::all_ones() {
  ConstantLedger ledger;
  for (std::string_view key : kKeys) ledger.at(key) = LedgerEntry::analytic(1.0);
  return ledger;
}

LedgerEntry& ConstantLedger::at(std::string_view key) {
  return const_cast<LedgerEntry&>(std::as_const(*this).at(key));
}

const LedgerEntry& ConstantLedger::at(std::string_view key) const {
  if (key == "L_g") return L_g;
  if (key == "L_hess_g") return L_hess_g;
  if (key == "Lbar_f") return Lbar_f;
  if (key == "C_f") return C_f;
  if (key == "Lbar_grad_f") return Lbar_grad_f;
  if (key == "Lbar_psi") return Lbar_psi;
  if (key == "C_psi") return C_psi;
  if (key == "Lbar_grad_psi") return Lbar_grad_psi;
  if (key == "M") return M;
  throw ConfigError("unknown ledger key '" + std::string(key) + "'");
}

void ConstantLedger::validate() const {
  for (std::string_view key : kKeys) {
    const LedgerEntry& e = at(key);
    if (e.provenance == Provenance::kUnavailable) {
      throw ConfigError("ledger entry " + std::string(key) + " is unavailable; supply it");
    }
    if (!std::isfinite(e.value) || e.value < 0.0) {
      throw ConfigError("ledger entry " + std::string(key) + " must be finite and nonnegative");
    }
    if (e.provenance == Provenance::kEstimated && e.sample_size < 10000) {
      throw ConfigError("estimated ledger entry " + std::string(key) +
                        " needs a sample size of at least 1e4");
    }
  }
  if (!(M.value > 0.0)) throw ConfigError("ledger entry M must be strictly positive");
}

std::string ConstantLedger::to_text(std::string_view prefix) const {
  std::ostringstream os;
  for (std::string_view key : kKeys) {
    os << prefix << key << "=" << format_double(at(key).value) << "\n";
  }
  return os.str();
}

void ConstantLedger::apply(const std::map<std::string, double>& overrides) {
  for (const auto& [key, value] : overrides) at(key) = LedgerEntry::analytic(value);
}

double lambda_floor(const ConstantLedger& ledger) {
  const double l_hess = ledger.L_hess_g.value;
  return std::max(l_hess, 2.0 * ledger.M.value * ledger.Lbar_psi.value * ledger.Lbar_psi.value *
                              l_hess);
}

namespace {

// lambda / M - 2 Lbar_psi^2 L_hess_g
double theta_margin(const ConstantLedger& ledger, double lambda) {
  const double lp = ledger.Lbar_psi.value;
  return lambda / ledger.M.value - 2.0 * lp * lp * ledger.L_hess_g.value;
}

}  // namespace

double gamma_min(const ConstantLedger& ledger, double lambda) {
  const double margin = theta_margin(ledger, lambda);
  if (!(margin > 0.0)) {
    throw DomainError("lambda must exceed 2 M Lbar_psi^2 L_hess_g = " +
                      format_double(2.0 * ledger.M.value * ledger.Lbar_psi.value *
                                    ledger.Lbar_psi.value * ledger.L_hess_g.value));
  }
  const double lf2 = ledger.Lbar_f.value * ledger.Lbar_f.value;
  return (0.5 * lambda * lambda * lf2 + 4.0 * lambda * lf2 * ledger.L_hess_g.value) / margin;
}

double lambda_for_min_gamma(const ConstantLedger& ledger) {
  const double lhg = ledger.L_hess_g.value;
  const double m = ledger.M.value;
  const double k = 2.0 * ledger.Lbar_psi.value * ledger.Lbar_psi.value * lhg;
  const double lf2 = ledger.Lbar_f.value * ledger.Lbar_f.value;
  if (!(k > 0.0) || !(lf2 > 0.0)) return std::max(1.0, lhg);
  // gamma_min = (a l^2 + b l) / (l / M - k) with a = Lbar_f^2 / 2 and
  // b = 4 Lbar_f^2 L_hess_g; stationary at l = M (k + sqrt(k^2 + b k / (a M))).
  const double a = 0.5 * lf2, b = 4.0 * lf2 * lhg;
  const double best = m * (k + std::sqrt(k * k + b * k / (a * m)));
  return std::max(best, lhg);
}

DescentCoefficients descent_coefficients(const ConstantLedger& ledger, double lambda,
                                         double gamma, std::optional<double> epsilon) {
  const double threshold = gamma_min(ledger, lambda);
  if (!(gamma > threshold)) {
    throw DomainError("gamma = " + format_double(gamma) + " is not above gamma_min = " +
                      format_double(threshold));
  }
  const double lf2 = ledger.Lbar_f.value * ledger.Lbar_f.value;
  DescentCoefficients out;
  out.cap_C = gamma * theta_margin(ledger, lambda) - 4.0 * lambda * lf2 * ledger.L_hess_g.value;
  const double lower = lambda * lambda * lf2 / out.cap_C;
  if (!(lower < 2.0)) {
    throw DomainError("empty epsilon interval: lambda^2 Lbar_f^2 / C = " + format_double(lower));
  }
  out.epsilon = epsilon.value_or(0.5 * (lower + 2.0));
  if (!(out.epsilon > lower && out.epsilon < 2.0)) {
    throw DomainError("epsilon = " + format_double(out.epsilon) + " outside (" +
                      format_double(lower) + ", 2)");
  }
  out.c1 = out.cap_C - lambda * lambda * lf2 / out.epsilon;
  out.c2 = 1.0 - out.epsilon / 2.0;
  if (!(out.c1 > 0.0) || !(out.c2 > 0.0)) {
    throw DomainError("descent coefficients are not positive");
  }
  return out;
}

LipschitzW lipschitz_W(const ConstantLedger& ledger, double lambda) {
  const double lg = ledger.L_g.value, lhg = ledger.L_hess_g.value;
  const double lf = ledger.Lbar_f.value, cf = ledger.C_f.value, lgf = ledger.Lbar_grad_f.value;
  const double lp = ledger.Lbar_psi.value, cp = ledger.C_psi.value;
  const double lgp = ledger.Lbar_grad_psi.value;
  LipschitzW out;
  out.beta = lf * lf * lhg + lg * lgf + (lf * lf * lhg + 2.0 * lg * lgf + lf * lhg * lp) +
             lambda * (lf * lf + lgf * cf + lgf * cp + lf * lp);
  out.theta = lhg * (lp * lf + 2.0 * lgp * cf + lp * lp) +
              lambda * (lp * lgf + lgp * cf + lp * lp + lgp * cp);
  out.total = std::sqrt(out.beta * out.beta + out.theta * out.theta);
  return out;
}

double theorem_bound(double L_W, double C_d, double sigma, double alpha, long n_iters, double W0,
                     double G_min) {
  if (!(alpha > 0.0) || n_iters < 1) throw DomainError("alpha and N must be positive");
  if (!(W0 >= G_min)) throw DomainError("W0 must be at least G_min");
  const double noise = C_d * C_d + sigma * sigma;
  return (0.5 * L_W * noise * alpha * alpha + W0 - G_min) /
         (alpha * std::sqrt(static_cast<double>(n_iters)));
}

double optimal_alpha(double L_W, double C_d, double sigma, double W0, double G_min) {
  const double noise = C_d * C_d + sigma * sigma;
  if (!(L_W * noise > 0.0)) throw DomainError("L_W (C_d^2 + sigma^2) must be positive");
  if (!(W0 > G_min)) throw DomainError("W0 must exceed G_min");
  return std::sqrt(2.0 * (W0 - G_min) / (L_W * noise));
}

DerivedConstants derive_constants(const ConstantLedger& ledger, double lambda, double gamma,
                                  std::optional<double> epsilon) {
  ledger.validate();
  if (lambda < ledger.L_hess_g.value) {
    throw DomainError("lambda must be at least L_hess_g = " +
                      format_double(ledger.L_hess_g.value));
  }
  DerivedConstants out;
  out.lambda = lambda;
  out.gamma = gamma;
  out.gamma_min = gamma_min(ledger, lambda);
  const DescentCoefficients dc = descent_coefficients(ledger, lambda, gamma, epsilon);
  out.cap_C = dc.cap_C;
  out.epsilon = dc.epsilon;
  out.c1 = dc.c1;
  out.c2 = dc.c2;
  const LipschitzW lw = lipschitz_W(ledger, lambda);
  out.L_W_beta = lw.beta;
  out.L_W_theta = lw.theta;
  out.L_W = lw.total;
  return out;
}

std::vector<std::string> compliance_violations(const ConstantLedger& ledger, double lambda,
                                               double gamma) {
  std::vector<std::string> out;
  if (lambda < ledger.L_hess_g.value) {
    out.push_back("lambda >= L_hess_g (needed for a nonnegative Bregman gap)");
  }
  if (!(theta_margin(ledger, lambda) > 0.0)) {
    out.push_back("lambda floor: lambda > 2 M Lbar_psi^2 L_hess_g");
    return out;
  }
  if (!(gamma > gamma_min(ledger, lambda))) {
    out.push_back(
        "gamma threshold: 2 (gamma (lambda/M - 2 Lbar_psi^2 L_hess_g) - 4 lambda Lbar_f^2 "
        "L_hess_g) > lambda^2 Lbar_f^2");
  }
  return out;
}

namespace {

double operator_norm(const Matrix& m) {
  if (m.cols() == 1 || m.rows() == 1) return m.norm();
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

double spectral_radius_symmetric(const Matrix& m) {
  if (m.size() == 1) return std::abs(m(0, 0));
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// max over p in {2, 4} of (E[v^p])^(1/p) from running sums of v^2 and v^4.
double moment_bound(double sum2, double sum4, double n) {
  return std::max(std::sqrt(sum2 / n), std::pow(sum4 / n, 0.25));
}

LedgerEntry estimated(double value, long samples, int probes) {
  return {value, Provenance::kEstimated, samples,
          static_cast<double>(probes) / (static_cast<double>(probes) + 1.0)};
}

// Largest ||a_i - a_{i+1}|| / ||p_i - p_{i+1}|| over consecutive probe pairs.
double pairwise_lipschitz(const std::vector<Vector>& points, const std::vector<Matrix>& grads) {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double dist = (points[i] - points[i + 1]).norm();
    if (dist <= 0.0) continue;
    worst = std::max(worst, operator_norm(grads[i] - grads[i + 1]) / dist);
  }
  return worst;
}

}  // namespace

LedgerEstimate estimate_ledger(const ProblemSpec& problem, const ProbeBox& box, int sample_count,
                               int probe_count, Rng& rng) {
  validate(problem);
  if (sample_count < 10000) throw ConfigError("ledger estimation needs at least 1e4 samples");
  if (probe_count < 2) throw ConfigError("ledger estimation needs at least 2 probes");

  const std::vector<Vector> u_probes = probe_points(box.u_lo, box.u_hi, probe_count, rng);
  const std::vector<Vector> beta_probes =
      probe_points(box.beta_lo, box.beta_hi, probe_count, rng);
  const std::vector<Vector> theta_probes =
      probe_points(box.theta_lo, box.theta_hi, probe_count, rng);

  LedgerEstimate result;
  ConstantLedger& ledger = result.ledger;
  const long n = sample_count;
  const int probes = probe_count;

  double l_g = 0.0, l_hess = 0.0;
  for (const Vector& u : u_probes) {
    const OuterEval g = evaluate_outer(problem, u);
    l_g = std::max(l_g, g.grad.norm());
    l_hess = std::max(l_hess, spectral_radius_symmetric(g.hess));
  }
  ledger.L_g = estimated(l_g, n, probes);
  ledger.L_hess_g = estimated(l_hess, n, probes);

  // Envelope moments: per-sample sup over probes, then p-th moments over
  // samples. Value moments: per-probe moments, then sup over probes.
  double lf2 = 0, lf4 = 0, lgf2 = 0, lgf4 = 0, lp2 = 0, lp4 = 0, lgp2 = 0, lgp4 = 0;
  std::vector<double> f2(beta_probes.size(), 0.0), f4(beta_probes.size(), 0.0);
  std::vector<double> p2(theta_probes.size(), 0.0), p4(theta_probes.size(), 0.0);
  std::vector<Matrix> f_grads(beta_probes.size()), p_grads(theta_probes.size());

  for (long s = 0; s < n; ++s) {
    const Sample sample = sample_joint(problem, rng);
    double env_f = 0.0, env_p = 0.0;
    for (std::size_t j = 0; j < beta_probes.size(); ++j) {
      InnerEval f = evaluate_inner(problem, sample.x, sample.y, beta_probes[j]);
      env_f = std::max(env_f, operator_norm(f.grad_beta));
      const double v2 = f.value.squaredNorm();
      f2[j] += v2;
      f4[j] += v2 * v2;
      f_grads[j] = std::move(f.grad_beta);
    }
    for (std::size_t j = 0; j < theta_probes.size(); ++j) {
      ModelEval psi = evaluate_model(problem, sample.x, theta_probes[j]);
      env_p = std::max(env_p, operator_norm(psi.grad_theta));
      const double v2 = psi.value.squaredNorm();
      p2[j] += v2;
      p4[j] += v2 * v2;
      p_grads[j] = std::move(psi.grad_theta);
    }
    const double env_gf = pairwise_lipschitz(beta_probes, f_grads);
    const double env_gp = pairwise_lipschitz(theta_probes, p_grads);
    lf2 += env_f * env_f;
    lf4 += env_f * env_f * env_f * env_f;
    lgf2 += env_gf * env_gf;
    lgf4 += env_gf * env_gf * env_gf * env_gf;
    lp2 += env_p * env_p;
    lp4 += env_p * env_p * env_p * env_p;
    lgp2 += env_gp * env_gp;
    lgp4 += env_gp * env_gp * env_gp * env_gp;
  }
  const double dn = static_cast<double>(n);
  double c_f = 0.0, c_psi = 0.0;
  for (std::size_t j = 0; j < f2.size(); ++j) c_f = std::max(c_f, moment_bound(f2[j], f4[j], dn));
  for (std::size_t j = 0; j < p2.size(); ++j) {
    c_psi = std::max(c_psi, moment_bound(p2[j], p4[j], dn));
  }
  ledger.Lbar_f = estimated(moment_bound(lf2, lf4, dn), n, probes);
  ledger.Lbar_grad_f = estimated(moment_bound(lgf2, lgf4, dn), n, probes);
  ledger.C_f = estimated(c_f, n, probes);
  ledger.Lbar_psi = estimated(moment_bound(lp2, lp4, dn), n, probes);
  ledger.Lbar_grad_psi = estimated(moment_bound(lgp2, lgp4, dn), n, probes);
  ledger.C_psi = estimated(c_psi, n, probes);

  if (problem.has_support()) {
    // Ratio Q / ||grad_theta Q||^2 at one point; negative when undefined.
    auto ratio = [&](const Vector& beta, const Vector& theta) {
      const PointExpectations e =
          point_expectations(problem, beta, theta, 0.0, 1.0, DiagnosticsMode::exact());
      const double q = e.q.value;
      const double grad_sq = e.grad_q_theta.squaredNorm();
      if (q <= 1e-14) return -1.0;
      if (grad_sq <= 1e-12 * q) {
        result.lojasiewicz_violation = "grad_theta Q vanishes with Q = " + format_double(q) +
                              " at beta=" + format_vector(beta) +
                              " theta=" + format_vector(theta);
        return -1.0;
      }
      return q / grad_sq;
    };
    double m_hat = 0.0;
    Vector best_beta = beta_probes.front(), best_theta = theta_probes.front();
    const std::size_t pairs = std::max(beta_probes.size(), theta_probes.size());
    for (std::size_t j = 0; j < pairs; ++j) {
      const Vector& beta = beta_probes[j % beta_probes.size()];
      const Vector& theta = theta_probes[j % theta_probes.size()];
      const double r = ratio(beta, theta);
      if (r > m_hat) {
        m_hat = r;
        best_beta = beta;
        best_theta = theta;
      }
    }
    // Compass search from the best probe, kept inside the box. The probe
    // maximum alone undershoots the supremum.
    if (m_hat > 0.0 && !result.lojasiewicz_violation) {
      const Eigen::Index nb = best_beta.size();
      Vector lo(nb + best_theta.size()), hi(lo.size()), z(lo.size());
      lo << box.beta_lo, box.theta_lo;
      hi << box.beta_hi, box.theta_hi;
      z << best_beta, best_theta;
      Vector step = 0.25 * (hi - lo) / std::sqrt(static_cast<double>(probes));
      for (int sweep = 0; sweep < 200 && step.maxCoeff() > 1e-13 * (hi - lo).maxCoeff();
           ++sweep) {
        bool improved = false;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
          for (double sign : {1.0, -1.0}) {
            Vector cand = z;
            cand[i] = std::clamp(z[i] + sign * step[i], lo[i], hi[i]);
            if (cand[i] == z[i]) continue;
            const double r = ratio(cand.head(nb), cand.tail(z.size() - nb));
            if (r > m_hat) {
              m_hat = r;
              z = cand;
              improved = true;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
    }
    ledger.M = estimated(m_hat, n, probes);
    result.m_estimated = true;
  } else {
    ledger.M = {std::nan(""), Provenance::kUnavailable, 0, 0.0};
  }
  return result;
}

}  // namespace csopt
