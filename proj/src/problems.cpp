#include "csopt/problems.hpp"

#include <cmath>
#include <regex>

#include "csopt/diagnostics.hpp"
#include "csopt/errors.hpp"

namespace csopt {

OuterEval pseudo_huber(const Vector& u) {
  const double s = std::sqrt(1.0 + u.squaredNorm());
  OuterEval out;
  out.value = s - 1.0;
  out.grad = u / s;
  const auto n = u.size();
  out.hess = (Matrix::Identity(n, n) - (u * u.transpose()) / (s * s)) / s;
  return out;
}

namespace {

constexpr double kP0 = 0.2;
constexpr double kP1 = 0.7;

double bt_p(const Vector& x) { return x[0] == 0.0 ? kP0 : kP1; }

Vector scalar(double v) { return Vector::Constant(1, v); }

ProblemSpec bernoulli_spec(OuterFn outer, std::string name) {
  ProblemSpec p;
  p.name = std::move(name);
  p.dim_x = 1;
  p.dim_y = 1;
  p.dim_beta = 1;
  p.dim_theta = 2;
  p.dim_f = 1;
  p.inner = [](const Vector&, const Vector& y, const Vector& beta) {
    const double r = y[0] - beta[0];
    return InnerEval{scalar(r * r), Matrix::Constant(1, 1, -2.0 * r)};
  };
  p.outer = std::move(outer);
  p.model = [](const Vector& x, const Vector& theta) {
    Matrix grad(2, 1);
    grad << 1.0, x[0];
    return ModelEval{scalar(theta[0] + theta[1] * x[0]), grad};
  };
  p.sampler = [](Rng& rng) {
    const double x = uniform01(rng) < 0.5 ? 0.0 : 1.0;
    const double p_x = x == 0.0 ? kP0 : kP1;
    const double y = uniform01(rng) < p_x ? 1.0 : 0.0;
    return Sample{scalar(x), scalar(y)};
  };
  p.conditional_oracle = [](const Vector& x, const Vector& beta) {
    const double q = bt_p(x), b = beta[0];
    return ConditionalEval{scalar(q * (1.0 - b) * (1.0 - b) + (1.0 - q) * b * b),
                           Matrix::Constant(1, 1, 2.0 * b - 2.0 * q)};
  };
  p.support = std::vector<SupportAtom>{
      {scalar(0.0), scalar(0.0), 0.5 * (1.0 - kP0)},
      {scalar(0.0), scalar(1.0), 0.5 * kP0},
      {scalar(1.0), scalar(0.0), 0.5 * (1.0 - kP1)},
      {scalar(1.0), scalar(1.0), 0.5 * kP1},
  };
  return p;
}

ProbeBox bernoulli_box() {
  ProbeBox box;
  box.beta_lo = scalar(0.0);
  box.beta_hi = scalar(1.0);
  box.theta_lo = Vector::Constant(2, -1.0);
  box.theta_hi = Vector::Constant(2, 1.0);
  box.u_lo = scalar(-50.0);
  box.u_hi = scalar(50.0);
  return box;
}

// Moments of the Bernoulli testbed over beta in [0, 1], theta in [-1, 1]^2.
// Each p-th moment below is convex in the parameter, so its supremum over the
// box sits at a vertex.
ConstantLedger bernoulli_ledger(double l_g, double l_hess_g) {
  ConstantLedger ledger;
  ledger.L_g = LedgerEntry::analytic(l_g);
  ledger.L_hess_g = LedgerEntry::analytic(l_hess_g);
  // sup_beta |2 (y - beta)| = 2 for y in {0, 1}.
  ledger.Lbar_f = LedgerEntry::analytic(2.0);
  ledger.Lbar_grad_f = LedgerEntry::analytic(2.0);
  // beta = 1: f = 1 with probability P(Y = 0) = 0.55, else 0.
  ledger.C_f = LedgerEntry::analytic(std::pow(0.55, 0.25));
  // ||(1, x)||: E[.^4] = (1 + 4) / 2.
  ledger.Lbar_psi = LedgerEntry::analytic(std::pow(2.5, 0.25));
  ledger.Lbar_grad_psi = LedgerEntry::analytic(0.0);
  // theta = (1, 1): psi in {1, 2}, E[psi^4] = (1 + 16) / 2.
  ledger.C_psi = LedgerEntry::analytic(std::pow(8.5, 0.25));
  // Q / ||grad_theta Q||^2 = (r0^2 + r1^2) / ((r0 + r1)^2 + r1^2) for the
  // residuals r at x = 0, 1; its supremum is the inverse of the smallest
  // eigenvalue of [[1, 1], [1, 2]].
  ledger.M = LedgerEntry::analytic((3.0 + std::sqrt(5.0)) / 2.0);
  return ledger;
}

}  // namespace

double bisect_minimizer(const ProblemSpec& problem, double lo, double hi, double tol) {
  if (problem.dim_beta != 1) throw ConfigError("bisection needs a scalar beta");
  auto slope = [&](double b) {
    return grad_G(problem, Vector::Constant(1, b), DiagnosticsMode::exact()).value[0];
  };
  if (!(slope(lo) < 0.0) || !(slope(hi) > 0.0)) {
    throw DomainError("bisection bracket does not straddle a sign change of grad G");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (slope(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

BuiltinProblem make_bernoulli_testbed() {
  BuiltinProblem bt;
  bt.spec = bernoulli_spec(pseudo_huber, "BT");
  bt.ledger = bernoulli_ledger(1.0, 1.0);
  bt.box = bernoulli_box();
  const double b = bisect_minimizer(bt.spec, 0.0, 1.0);
  bt.beta_star = scalar(b);
  bt.g_min = objective_G(bt.spec, *bt.beta_star, DiagnosticsMode::exact()).value;
  bt.notes =
      "Bernoulli testbed: X ~ U{0,1}, Y|X=x ~ Bernoulli(p(x)), p(0)=0.2, p(1)=0.7; "
      "f=(y-beta)^2; g=sqrt(1+u^2)-1; psi=theta0+theta1*x";
  return bt;
}

BuiltinProblem make_linear_outer() {
  BuiltinProblem lin;
  lin.spec = bernoulli_spec(
      [](const Vector& u) {
        return OuterEval{u.sum(), Vector::Ones(u.size()), Matrix::Zero(u.size(), u.size())};
      },
      "LIN");
  lin.ledger = bernoulli_ledger(1.0, 0.0);
  lin.box = bernoulli_box();
  // G(beta) = E[(Y - beta)^2] with E[Y] = 0.45: minimizer 0.45.
  const double b = bisect_minimizer(lin.spec, 0.0, 1.0);
  lin.beta_star = scalar(b);
  lin.g_min = objective_G(lin.spec, *lin.beta_star, DiagnosticsMode::exact()).value;
  lin.notes = "Bernoulli testbed with linear outer g(u)=u";
  return lin;
}

BuiltinProblem make_linear_gaussian(int n_x, std::uint64_t seed) {
  if (n_x < 1) throw ConfigError("LG needs n_x >= 1");
  Rng rng = make_stream(seed, StreamId::kProbes, static_cast<std::uint64_t>(n_x));
  std::normal_distribution<double> normal;
  Vector a(n_x);
  do {
    for (int i = 0; i < n_x; ++i) a[i] = normal(rng);
  } while (a.norm() == 0.0);
  a.normalize();

  BuiltinProblem lg;
  ProblemSpec& p = lg.spec;
  p.name = "LG(" + std::to_string(n_x) + ")";
  p.dim_x = n_x;
  p.dim_y = 1;
  p.dim_beta = n_x;
  p.dim_theta = n_x;
  p.dim_f = 1;
  p.inner = [](const Vector& x, const Vector& y, const Vector& beta) {
    return InnerEval{scalar(y[0] - beta.dot(x)), Matrix(-x)};
  };
  p.outer = pseudo_huber;
  p.model = [](const Vector& x, const Vector& theta) {
    return ModelEval{scalar(theta.dot(x)), Matrix(x)};
  };
  p.sampler = [a, n_x](Rng& r) {
    std::normal_distribution<double> nd;
    Vector x(n_x);
    for (int i = 0; i < n_x; ++i) x[i] = nd(r);
    const double y = a.dot(x) + nd(r);
    return Sample{x, scalar(y)};
  };
  p.conditional_oracle = [a](const Vector& x, const Vector& beta) {
    return ConditionalEval{scalar((a - beta).dot(x)), Matrix(-x)};
  };

  const double half = 2.0;
  lg.box = ProbeBox::uniform(p, half, half, 50.0);
  const double n = n_x;
  // ||x||: E[||x||^4] = n (n + 2) dominates E[||x||^2]^2 = n^2.
  const double lx = std::pow(n * (n + 2.0), 0.25);
  // y - beta'x ~ N(0, ||a - beta||^2 + 1); E[Z^4] = 3 s^4.
  const double max_dev_sq = (a.cwiseAbs().array() + half).square().sum();
  ConstantLedger& ledger = lg.ledger;
  ledger.L_g = LedgerEntry::analytic(1.0);
  ledger.L_hess_g = LedgerEntry::analytic(1.0);
  ledger.Lbar_f = LedgerEntry::analytic(lx);
  ledger.Lbar_grad_f = LedgerEntry::analytic(0.0);
  ledger.C_f = LedgerEntry::analytic(std::pow(3.0, 0.25) * std::sqrt(max_dev_sq + 1.0));
  ledger.Lbar_psi = LedgerEntry::analytic(lx);
  ledger.Lbar_grad_psi = LedgerEntry::analytic(0.0);
  ledger.C_psi = LedgerEntry::analytic(std::pow(3.0, 0.25) * half * std::sqrt(n));
  // Q = ||r||^2 / 2 and grad_theta Q = -r for r = a - beta - theta.
  ledger.M = LedgerEntry::analytic(0.5);
  lg.beta_star = a;
  lg.g_min = 0.0;
  lg.notes = "Linear-Gaussian: X ~ N(0,I), Y = a'X + N(0,1), f = y - beta'x, psi = theta'x";
  return lg;
}

BuiltinProblem make_problem(std::string_view name, std::uint64_t lg_seed) {
  if (name == "BT") return make_bernoulli_testbed();
  if (name == "LIN") return make_linear_outer();
  static const std::regex lg_pattern(R"(LG\((\d+)\))");
  std::cmatch m;
  if (std::regex_match(name.begin(), name.end(), m, lg_pattern)) {
    return make_linear_gaussian(std::stoi(m[1].str()), lg_seed);
  }
  throw ConfigError("unknown problem '" + std::string(name) + "' (expected BT, LIN or LG(n))");
}

}  // namespace csopt
