#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "csopt/constants.hpp"
#include "csopt/model.hpp"
#include "csopt/probe.hpp"

namespace csopt {

struct BuiltinProblem {
  ProblemSpec spec;
  ConstantLedger ledger;  // valid inside `box`
  ProbeBox box;
  std::optional<double> g_min;
  std::optional<Vector> beta_star;  // a minimizer of G, when known
  std::string notes;
};

// Pseudo-Huber outer function sqrt(1 + ||u||^2) - 1: convex, ||grad|| < 1 and
// ||hess|| <= 1 everywhere.
OuterEval pseudo_huber(const Vector& u);

// Bernoulli testbed "BT": X uniform on {0, 1}, Y | X = x ~ Bernoulli(p(x))
// with p(0) = 0.2, p(1) = 0.7; f = (y - beta)^2, pseudo-Huber g, affine
// model psi = theta_0 + theta_1 x (exactly realizable). Ships a 4-atom
// support, the conditional oracle and an analytic ledger for
// beta in [0, 1], theta in [-1, 1]^2.
BuiltinProblem make_bernoulli_testbed();

// Linear-Gaussian "LG": X ~ N(0, I_n), Y = a'X + N(0, 1) with a unit `a`
// drawn from `seed`; f = y - beta'x, pseudo-Huber g, psi = theta'x.
// Conditional oracle but no finite support. Ledger valid for
// beta, theta in [-2, 2]^n.
BuiltinProblem make_linear_gaussian(int n_x, std::uint64_t seed = 0);

// "LIN": the Bernoulli testbed with linear outer g(u) = u.
BuiltinProblem make_linear_outer();

// Resolves "BT", "LIN", "LG(n)" (seed from `lg_seed`).
BuiltinProblem make_problem(std::string_view name, std::uint64_t lg_seed = 0);

// Minimizer of a convex scalar-beta objective by bisection on the exact
// gradient over [lo, hi]. Requires grad G(lo) < 0 < grad G(hi) and a
// support enumeration.
double bisect_minimizer(const ProblemSpec& problem, double lo, double hi, double tol = 1e-14);

}  // namespace csopt
