#pragma once

#include <cstdint>
#include <string_view>

#include "csopt/model.hpp"

namespace csopt {

// One stochastic update direction computed from a single observation.
struct Direction {
  Vector d_beta;
  Vector d_theta;

  Vector stacked() const;
  double squared_norm() const { return d_beta.squaredNorm() + d_theta.squaredNorm(); }
};

enum class Schedule {
  kFixedHorizon,  // tau_k = alpha / sqrt(N)
  kAnytime,       // tau_k = alpha / sqrt(k + 1)
};

std::string_view to_string(Schedule schedule);
Schedule parse_schedule(std::string_view text);

// d_beta  = -grad_beta f(x, y, beta) * grad g(psi(x, theta))
// d_theta = gamma * grad_theta psi(x, theta) * (f(x, y, beta) - psi(x, theta))
//
// Exactly one call each to the inner, outer and model evaluators.
Direction compute_direction(const ProblemSpec& problem, const IterateState& state,
                            const Sample& sample, double gamma);

// z_{k+1} = z_k + tau * d, k -> k + 1.
IterateState step(const IterateState& state, const Direction& dir, double tau);

double stepsize(Schedule schedule, long k, long n_iters, double alpha);

// Random output index S in {0, ..., N-1}: uniform for the fixed-horizon
// schedule, P[S = k] proportional to tau_k for the anytime schedule.
long draw_stop_index(Schedule schedule, long n_iters, double alpha, Rng& rng);

}  // namespace csopt
