#include "csopt/diagnostics.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "csopt/errors.hpp"

namespace csopt {

DiagnosticsMode DiagnosticsMode::best_for(const ProblemSpec& problem, int sample_size,
                                          std::uint64_t seed) {
  return problem.has_support() ? exact() : monte_carlo(sample_size, seed);
}

std::string DiagnosticsMode::describe() const {
  if (kind == Kind::kExact) return "exact";
  std::ostringstream os;
  os << "monte_carlo(" << sample_size << ")";
  return os.str();
}

namespace {

// Layout of the packed per-context contribution vector.
struct Layout {
  int nb, nt;
  int q() const { return 0; }
  int g() const { return 1; }
  int delta() const { return 2; }
  int w() const { return 3; }
  int grad_g() const { return 4; }
  int grad_q_beta() const { return grad_g() + nb; }
  int grad_q_theta() const { return grad_q_beta() + nb; }
  int grad_w_beta() const { return grad_q_theta() + nt; }
  int grad_w_theta() const { return grad_w_beta() + nb; }
  int gamma_beta() const { return grad_w_theta() + nt; }
  int gamma_theta() const { return gamma_beta() + nb; }
  int size() const { return gamma_theta() + nt; }
};

Vector contribution(const ProblemSpec& problem, const Layout& layout, const Vector& x,
                    const ConditionalEval& cond, const Vector& theta, double lambda,
                    double gamma) {
  const ModelEval psi = evaluate_model(problem, x, theta);
  const OuterEval g_f = evaluate_outer(problem, cond.value);
  const OuterEval g_psi = evaluate_outer(problem, psi.value);
  const Vector r = cond.value - psi.value;
  const double half_sq = 0.5 * r.squaredNorm();

  Vector out(layout.size());
  const Vector grad_g = cond.grad_beta * g_f.grad;
  const Vector grad_q_beta = cond.grad_beta * r;
  const Vector psi_r = psi.grad_theta * r;
  const double delta = g_f.value - g_psi.value - g_psi.grad.dot(r) + lambda * half_sq;

  out[layout.q()] = half_sq;
  out[layout.g()] = g_f.value;
  out[layout.delta()] = delta;
  out[layout.w()] = g_f.value + delta;
  out.segment(layout.grad_g(), layout.nb) = grad_g;
  out.segment(layout.grad_q_beta(), layout.nb) = grad_q_beta;
  out.segment(layout.grad_q_theta(), layout.nt) = -psi_r;
  out.segment(layout.grad_w_beta(), layout.nb) =
      grad_g + cond.grad_beta * (g_f.grad - g_psi.grad) + lambda * grad_q_beta;
  out.segment(layout.grad_w_theta(), layout.nt) =
      -(psi.grad_theta * (g_psi.hess * r)) - lambda * psi_r;
  out.segment(layout.gamma_beta(), layout.nb) = -(cond.grad_beta * g_psi.grad);
  out.segment(layout.gamma_theta(), layout.nt) = gamma * psi_r;
  return out;
}

}  // namespace

PointExpectations point_expectations(const ProblemSpec& problem, const Vector& beta,
                                     const Vector& theta, double lambda, double gamma,
                                     const DiagnosticsMode& mode) {
  validate_state(problem, {beta, theta, 0});
  const Layout layout{problem.dim_beta, problem.dim_theta};
  Vector mean = Vector::Zero(layout.size());
  Vector stderr_ = Vector::Zero(layout.size());

  if (mode.kind == DiagnosticsMode::Kind::kExact) {
    if (!problem.has_support()) {
      throw CapabilityError("exact diagnostics need a support enumeration (problem '" +
                            problem.name + "')");
    }
    for (const ContextAtom& context : context_marginal(problem)) {
      const ConditionalEval cond = conditional_by_enumeration(problem, context, beta);
      mean += context.probability *
              contribution(problem, layout, context.x, cond, theta, lambda, gamma);
    }
  } else {
    if (!problem.has_oracle()) {
      throw CapabilityError("Monte Carlo diagnostics need a conditional oracle (problem '" +
                            problem.name + "')");
    }
    if (mode.sample_size < 2) throw ConfigError("Monte Carlo sample size must be at least 2");
    Rng rng(mode.seed);
    Vector sum_sq = Vector::Zero(layout.size());
    for (int i = 0; i < mode.sample_size; ++i) {
      const Sample s = sample_joint(problem, rng);
      const ConditionalEval cond = conditional_oracle(problem, s.x, beta);
      const Vector c = contribution(problem, layout, s.x, cond, theta, lambda, gamma);
      mean += c;
      sum_sq += c.cwiseAbs2();
    }
    const double n = mode.sample_size;
    mean /= n;
    const Vector var = ((sum_sq - n * mean.cwiseAbs2()) / (n - 1.0)).cwiseMax(0.0);
    stderr_ = (var / n).cwiseSqrt();
  }

  PointExpectations out;
  out.mode = mode;
  out.q = {mean[layout.q()], stderr_[layout.q()]};
  out.g = {mean[layout.g()], stderr_[layout.g()]};
  out.delta = {mean[layout.delta()], stderr_[layout.delta()]};
  out.w = {mean[layout.w()], stderr_[layout.w()]};
  out.grad_g = {mean.segment(layout.grad_g(), layout.nb),
                stderr_.segment(layout.grad_g(), layout.nb)};
  out.grad_q_beta = mean.segment(layout.grad_q_beta(), layout.nb);
  out.grad_q_theta = mean.segment(layout.grad_q_theta(), layout.nt);
  out.grad_w_beta = mean.segment(layout.grad_w_beta(), layout.nb);
  out.grad_w_theta = mean.segment(layout.grad_w_theta(), layout.nt);
  out.gamma_dir.d_beta = mean.segment(layout.gamma_beta(), layout.nb);
  out.gamma_dir.d_theta = mean.segment(layout.gamma_theta(), layout.nt);
  return out;
}

Estimate tracking_error_Q(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                          const DiagnosticsMode& mode) {
  return point_expectations(problem, beta, theta, 0.0, 1.0, mode).q;
}

Vector grad_Q_theta(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                    const DiagnosticsMode& mode) {
  return point_expectations(problem, beta, theta, 0.0, 1.0, mode).grad_q_theta;
}

namespace {

// G and grad G do not depend on theta; any theta of the right length works.
Vector placeholder_theta(const ProblemSpec& problem) { return Vector::Zero(problem.dim_theta); }

}  // namespace

Estimate objective_G(const ProblemSpec& problem, const Vector& beta,
                     const DiagnosticsMode& mode) {
  return point_expectations(problem, beta, placeholder_theta(problem), 0.0, 1.0, mode).g;
}

VectorEstimate grad_G(const ProblemSpec& problem, const Vector& beta,
                      const DiagnosticsMode& mode) {
  return point_expectations(problem, beta, placeholder_theta(problem), 0.0, 1.0, mode).grad_g;
}

double nonoptimality_V(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                       double c1, double c2, const DiagnosticsMode& mode) {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("c1 and c2 must be positive");
  const PointExpectations e = point_expectations(problem, beta, theta, 0.0, 1.0, mode);
  return c1 * e.q.value + c2 * e.grad_g.value.squaredNorm();
}

BregmanW bregman_delta_and_W(const ProblemSpec& problem, const Vector& beta,
                             const Vector& theta, double lambda, const DiagnosticsMode& mode) {
  const PointExpectations e = point_expectations(problem, beta, theta, lambda, 1.0, mode);
  return {e.delta, e.w};
}

Direction expected_direction_Gamma(const ProblemSpec& problem, const Vector& beta,
                                   const Vector& theta, double gamma,
                                   const DiagnosticsMode& mode) {
  return point_expectations(problem, beta, theta, 0.0, gamma, mode).gamma_dir;
}

GradW grad_W(const ProblemSpec& problem, const Vector& beta, const Vector& theta, double lambda,
             const DiagnosticsMode& mode) {
  const PointExpectations e = point_expectations(problem, beta, theta, lambda, 1.0, mode);
  return {e.grad_w_beta, e.grad_w_theta};
}

DirectionMoments direction_moment_stats(const ProblemSpec& problem, const Vector& beta,
                                        const Vector& theta, double gamma, int n, Rng& rng) {
  if (n < 2) throw ConfigError("direction moments need at least 2 samples");
  const IterateState state{beta, theta, 0};
  validate_state(problem, state);
  const Eigen::Index dim = problem.dim_beta + problem.dim_theta;
  Vector sum = Vector::Zero(dim);
  Matrix scatter = Matrix::Zero(dim, dim);
  double sum_sq_norm = 0.0;
  for (int i = 0; i < n; ++i) {
    const Vector d = compute_direction(problem, state, sample_joint(problem, rng), gamma).stacked();
    sum += d;
    scatter.noalias() += d * d.transpose();
    sum_sq_norm += d.squaredNorm();
  }
  const double count = n;
  const Vector mean = sum / count;
  const Matrix cov = (scatter - count * mean * mean.transpose()) / (count - 1.0);

  DirectionMoments out;
  out.samples = n;
  out.mean.d_beta = mean.head(problem.dim_beta);
  out.mean.d_theta = mean.tail(problem.dim_theta);
  out.mean_stderr = (cov.diagonal().cwiseMax(0.0) / count).cwiseSqrt();
  out.second_moment = sum_sq_norm / count;
  out.c_d_sq = mean.squaredNorm();
  out.sigma_sq = std::max(0.0, out.second_moment - out.c_d_sq);
  // Delta method: Var(||m||^2) ~ 4 m' Cov m / n.
  out.c_d_sq_stderr = 2.0 * std::sqrt(std::max(0.0, mean.dot(cov * mean)) / count);
  return out;
}

DescentCheck descent_check(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                           double gamma, double lambda, double c1, double c2) {
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw ConfigError("c1 and c2 must be positive");
  const PointExpectations e =
      point_expectations(problem, beta, theta, lambda, gamma, DiagnosticsMode::exact());
  DescentCheck out;
  out.lhs = e.grad_w_beta.dot(e.gamma_dir.d_beta) + e.grad_w_theta.dot(e.gamma_dir.d_theta);
  out.rhs = -(c1 * e.q.value + c2 * e.grad_g.value.squaredNorm());
  out.pass = out.lhs <= out.rhs + kDescentTolerance;
  return out;
}

RateFit rate_fit(const std::vector<RatePoint>& records) {
  RateFit fit;
  std::vector<RatePoint> used;
  std::set<double> distinct;
  for (const RatePoint& p : records) {
    if (!(p.mean_v > 0.0) || !(p.n > 0.0)) {
      fit.excluded.push_back(p);
      continue;
    }
    used.push_back(p);
    distinct.insert(p.n);
  }
  if (distinct.size() < 4) {
    throw ConfigError("rate fit needs at least 4 distinct N with positive mean V");
  }
  const double m = static_cast<double>(used.size());
  double sx = 0, sy = 0;
  for (const RatePoint& p : used) {
    sx += std::log(p.n);
    sy += std::log(p.mean_v);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (const RatePoint& p : used) {
    const double dx = std::log(p.n) - mx, dy = std::log(p.mean_v) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

DiagnosticsReport diagnose(const ProblemSpec& problem, const IterateState& state,
                           const DiagnosticsSettings& settings) {
  const PointExpectations e = point_expectations(problem, state.beta, state.theta,
                                                 settings.lambda, settings.gamma, settings.mode);
  DiagnosticsReport report;
  report.k = state.k;
  report.q = e.q;
  report.grad_g = e.grad_g;
  report.v_value = settings.c1 * e.q.value + settings.c2 * e.grad_g.value.squaredNorm();
  report.delta_lambda = e.delta.value;
  report.w_value = e.w.value;
  report.gamma_dir = e.gamma_dir;
  report.mode = settings.mode;
  return report;
}

}  // namespace csopt
