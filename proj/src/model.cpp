#include "csopt/model.hpp"

#include <cmath>
#include <sstream>

#include "csopt/errors.hpp"

namespace csopt {

namespace {

void require_length(const Vector& v, int n, const char* what) {
  if (v.size() != n) {
    std::ostringstream os;
    os << what << " has length " << v.size() << ", expected " << n;
    throw ConfigError(os.str());
  }
}

void require_shape(const Matrix& m, int rows, int cols, const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << what << " has shape " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
       << cols;
    throw EvaluationError(os.str());
  }
}

bool all_finite(const Vector& v) { return v.allFinite(); }
bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace

std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) os << ", ";
    os << v[i];
  }
  os << ")";
  return os.str();
}

void validate(const ProblemSpec& problem) {
  if (problem.dim_x <= 0 || problem.dim_y <= 0 || problem.dim_beta <= 0 ||
      problem.dim_theta <= 0 || problem.dim_f <= 0) {
    throw ConfigError("problem '" + problem.name + "': all dimensions must be positive");
  }
  if (!problem.inner || !problem.outer || !problem.model || !problem.sampler) {
    throw ConfigError("problem '" + problem.name +
                      "': inner, outer, model and sampler evaluators are required");
  }
  if (problem.support) {
    if (problem.support->empty()) throw ConfigError("support enumeration is empty");
    double total = 0.0;
    for (const SupportAtom& atom : *problem.support) {
      require_length(atom.x, problem.dim_x, "support x");
      require_length(atom.y, problem.dim_y, "support y");
      if (!(atom.probability >= 0.0) || !std::isfinite(atom.probability)) {
        throw ConfigError("support probabilities must be finite and nonnegative");
      }
      total += atom.probability;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream os;
      os.precision(17);
      os << "support probabilities sum to " << total << ", expected 1";
      throw ConfigError(os.str());
    }
  }
}

void validate_state(const ProblemSpec& problem, const IterateState& state) {
  require_length(state.beta, problem.dim_beta, "beta");
  require_length(state.theta, problem.dim_theta, "theta");
}

InnerEval evaluate_inner(const ProblemSpec& problem, const Vector& x, const Vector& y,
                         const Vector& beta) {
  require_length(x, problem.dim_x, "x");
  require_length(y, problem.dim_y, "y");
  require_length(beta, problem.dim_beta, "beta");
  InnerEval out = problem.inner(x, y, beta);
  if (out.value.size() != problem.dim_f) {
    throw EvaluationError("inner value has wrong length");
  }
  require_shape(out.grad_beta, problem.dim_beta, problem.dim_f, "inner grad_beta");
  if (!all_finite(out.value) || !all_finite(out.grad_beta)) {
    throw EvaluationError("non-finite inner evaluation at x=" + format_vector(x) +
                          " y=" + format_vector(y) + " beta=" + format_vector(beta));
  }
  return out;
}

OuterEval evaluate_outer(const ProblemSpec& problem, const Vector& u) {
  require_length(u, problem.dim_f, "u");
  OuterEval out = problem.outer(u);
  if (out.grad.size() != problem.dim_f) throw EvaluationError("outer gradient has wrong length");
  require_shape(out.hess, problem.dim_f, problem.dim_f, "outer hessian");
  if (!std::isfinite(out.value) || !all_finite(out.grad) || !all_finite(out.hess)) {
    throw EvaluationError("non-finite outer evaluation at u=" + format_vector(u));
  }
  return out;
}

ModelEval evaluate_model(const ProblemSpec& problem, const Vector& x, const Vector& theta) {
  require_length(x, problem.dim_x, "x");
  require_length(theta, problem.dim_theta, "theta");
  ModelEval out = problem.model(x, theta);
  if (out.value.size() != problem.dim_f) throw EvaluationError("model value has wrong length");
  require_shape(out.grad_theta, problem.dim_theta, problem.dim_f, "model grad_theta");
  if (!all_finite(out.value) || !all_finite(out.grad_theta)) {
    throw EvaluationError("non-finite model evaluation at x=" + format_vector(x) +
                          " theta=" + format_vector(theta));
  }
  return out;
}

Sample sample_joint(const ProblemSpec& problem, Rng& rng) { return problem.sampler(rng); }

ConditionalEval conditional_oracle(const ProblemSpec& problem, const Vector& x,
                                   const Vector& beta) {
  if (!problem.has_oracle()) {
    throw CapabilityError("problem '" + problem.name + "' has no conditional oracle");
  }
  require_length(x, problem.dim_x, "x");
  require_length(beta, problem.dim_beta, "beta");
  ConditionalEval out = problem.conditional_oracle(x, beta);
  if (out.value.size() != problem.dim_f) throw EvaluationError("oracle value has wrong length");
  require_shape(out.grad_beta, problem.dim_beta, problem.dim_f, "oracle grad_beta");
  if (!all_finite(out.value) || !all_finite(out.grad_beta)) {
    throw EvaluationError("non-finite oracle evaluation at x=" + format_vector(x) +
                          " beta=" + format_vector(beta));
  }
  return out;
}

std::vector<ContextAtom> context_marginal(const ProblemSpec& problem) {
  if (!problem.has_support()) {
    throw CapabilityError("problem '" + problem.name + "' has no support enumeration");
  }
  std::vector<ContextAtom> contexts;
  const auto& atoms = *problem.support;
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    auto it = std::find_if(contexts.begin(), contexts.end(),
                           [&](const ContextAtom& c) { return c.x == atoms[i].x; });
    if (it == contexts.end()) {
      contexts.push_back({atoms[i].x, 0.0, {}});
      it = std::prev(contexts.end());
    }
    it->probability += atoms[i].probability;
    it->atoms.push_back(i);
  }
  // Zero-mass contexts contribute nothing and have no conditional law.
  std::erase_if(contexts, [](const ContextAtom& c) { return c.probability <= 0.0; });
  return contexts;
}

ConditionalEval conditional_by_enumeration(const ProblemSpec& problem,
                                           const ContextAtom& context, const Vector& beta) {
  ConditionalEval out{Vector::Zero(problem.dim_f),
                      Matrix::Zero(problem.dim_beta, problem.dim_f)};
  const auto& atoms = *problem.support;
  for (std::size_t idx : context.atoms) {
    const SupportAtom& atom = atoms[idx];
    if (atom.probability <= 0.0) continue;
    const double w = atom.probability / context.probability;
    InnerEval f = evaluate_inner(problem, atom.x, atom.y, beta);
    out.value += w * f.value;
    out.grad_beta += w * f.grad_beta;
  }
  return out;
}

double oracle_deviation(const ProblemSpec& problem, const Vector& beta) {
  double worst = 0.0;
  for (const ContextAtom& context : context_marginal(problem)) {
    ConditionalEval exact = conditional_by_enumeration(problem, context, beta);
    ConditionalEval oracle = conditional_oracle(problem, context.x, beta);
    worst = std::max(worst, (exact.value - oracle.value).cwiseAbs().maxCoeff());
    worst = std::max(worst, (exact.grad_beta - oracle.grad_beta).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace csopt
