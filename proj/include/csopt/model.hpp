#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "csopt/rng.hpp"

namespace csopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Gradient matrices are transposes of Jacobians: rows index the
// differentiated parameters, columns index the n_f outputs.

struct InnerEval {
  Vector value;      // f(x, y, beta), length n_f
  Matrix grad_beta;  // n_beta x n_f
};

struct OuterEval {
  double value = 0.0;
  Vector grad;  // length n_f
  Matrix hess;  // n_f x n_f
};

struct ModelEval {
  Vector value;       // psi(x, theta), length n_f
  Matrix grad_theta;  // n_theta x n_f
};

// Conditional expectation F(x, beta) = E[f(X, Y, beta) | X = x] and its
// beta-gradient.
struct ConditionalEval {
  Vector value;
  Matrix grad_beta;
};

struct Sample {
  Vector x;
  Vector y;
};

struct SupportAtom {
  Vector x;
  Vector y;
  double probability = 0.0;
};

using InnerFn = std::function<InnerEval(const Vector& x, const Vector& y, const Vector& beta)>;
using OuterFn = std::function<OuterEval(const Vector& u)>;
using ModelFn = std::function<ModelEval(const Vector& x, const Vector& theta)>;
using SamplerFn = std::function<Sample(Rng& rng)>;
using ConditionalFn = std::function<ConditionalEval(const Vector& x, const Vector& beta)>;

// Evaluator bundle for min_beta E[g(E[f(X, Y, beta) | X])] with the
// parametric model psi(x, theta) of the conditional expectation.
//
// Evaluators must be pure: the same inputs give bitwise-identical outputs
// and they may be called concurrently. The optional conditional oracle and
// support enumeration are consumed only by diagnostics.
struct ProblemSpec {
  std::string name;
  int dim_x = 0;
  int dim_y = 0;
  int dim_beta = 0;
  int dim_theta = 0;
  int dim_f = 0;

  InnerFn inner;
  OuterFn outer;
  ModelFn model;
  SamplerFn sampler;
  ConditionalFn conditional_oracle;  // may be empty

  std::optional<std::vector<SupportAtom>> support;

  bool has_oracle() const { return static_cast<bool>(conditional_oracle); }
  bool has_support() const { return support.has_value(); }
};

struct IterateState {
  Vector beta;
  Vector theta;
  long k = 0;
};

// Structural checks: positive dimensions, required evaluators present,
// support atoms shaped correctly with nonnegative probabilities summing to
// one within 1e-12. Throws ConfigError.
void validate(const ProblemSpec& problem);

// Throws ConfigError if the state does not match the problem dimensions.
void validate_state(const ProblemSpec& problem, const IterateState& state);

InnerEval evaluate_inner(const ProblemSpec& problem, const Vector& x, const Vector& y,
                         const Vector& beta);
OuterEval evaluate_outer(const ProblemSpec& problem, const Vector& u);
ModelEval evaluate_model(const ProblemSpec& problem, const Vector& x, const Vector& theta);
Sample sample_joint(const ProblemSpec& problem, Rng& rng);

// Throws CapabilityError when the problem ships no oracle.
ConditionalEval conditional_oracle(const ProblemSpec& problem, const Vector& x,
                                   const Vector& beta);

// Context atoms of the support: distinct x values with their marginal
// probability and the indices of the support atoms sharing that x.
struct ContextAtom {
  Vector x;
  double probability = 0.0;
  std::vector<std::size_t> atoms;
};

std::vector<ContextAtom> context_marginal(const ProblemSpec& problem);

// E[f | X = x] by enumeration over the support atoms of one context.
ConditionalEval conditional_by_enumeration(const ProblemSpec& problem,
                                           const ContextAtom& context, const Vector& beta);

// Largest absolute deviation between the oracle and enumeration over every
// support context at the given beta. Requires both support and oracle.
double oracle_deviation(const ProblemSpec& problem, const Vector& beta);

std::string format_vector(const Vector& v);

}  // namespace csopt
