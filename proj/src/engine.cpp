#include "csopt/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "csopt/errors.hpp"

namespace csopt {

Vector Direction::stacked() const {
  Vector out(d_beta.size() + d_theta.size());
  out << d_beta, d_theta;
  return out;
}

std::string_view to_string(Schedule schedule) {
  switch (schedule) {
    case Schedule::kFixedHorizon:
      return "fixed_horizon";
    case Schedule::kAnytime:
      return "anytime";
  }
  return "unknown";
}

Schedule parse_schedule(std::string_view text) {
  if (text == "fixed_horizon" || text == "FixedHorizon") return Schedule::kFixedHorizon;
  if (text == "anytime" || text == "Anytime") return Schedule::kAnytime;
  throw ConfigError("unknown schedule '" + std::string(text) +
                    "' (expected fixed_horizon or anytime)");
}

Direction compute_direction(const ProblemSpec& problem, const IterateState& state,
                            const Sample& sample, double gamma) {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  const InnerEval f = evaluate_inner(problem, sample.x, sample.y, state.beta);
  const ModelEval psi = evaluate_model(problem, sample.x, state.theta);
  const OuterEval g = evaluate_outer(problem, psi.value);
  Direction dir;
  dir.d_beta = -(f.grad_beta * g.grad);
  dir.d_theta = gamma * (psi.grad_theta * (f.value - psi.value));
  return dir;
}

IterateState step(const IterateState& state, const Direction& dir, double tau) {
  if (!(tau > 0.0)) throw ConfigError("stepsize must be positive");
  IterateState next;
  next.beta = state.beta + tau * dir.d_beta;
  next.theta = state.theta + tau * dir.d_theta;
  next.k = state.k + 1;
  return next;
}

double stepsize(Schedule schedule, long k, long n_iters, double alpha) {
  if (k < 0 || k >= n_iters) throw ConfigError("iteration index outside [0, N)");
  switch (schedule) {
    case Schedule::kFixedHorizon:
      return alpha / std::sqrt(static_cast<double>(n_iters));
    case Schedule::kAnytime:
      return alpha / std::sqrt(static_cast<double>(k + 1));
  }
  return 0.0;
}

long draw_stop_index(Schedule schedule, long n_iters, double alpha, Rng& rng) {
  if (n_iters < 1) throw ConfigError("N must be at least 1");
  if (schedule == Schedule::kFixedHorizon) {
    std::uniform_int_distribution<long> uniform(0, n_iters - 1);
    return uniform(rng);
  }
  std::vector<double> cumulative(static_cast<std::size_t>(n_iters));
  double total = 0.0;
  for (long k = 0; k < n_iters; ++k) {
    total += stepsize(schedule, k, n_iters, alpha);
    cumulative[static_cast<std::size_t>(k)] = total;
  }
  const double target = uniform01(rng) * total;
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  return std::min<long>(static_cast<long>(it - cumulative.begin()), n_iters - 1);
}

}  // namespace csopt
