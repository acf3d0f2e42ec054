#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csopt/engine.hpp"
#include "csopt/model.hpp"

namespace csopt {

// How expectations over X are computed.
//  - exact: enumerate the finite support (requires support);
//  - monte carlo: draw X from the joint sampler and evaluate F with the
//    conditional oracle (requires the oracle). A plug-in of single samples
//    of f would be biased, since F enters nonlinearly.
struct DiagnosticsMode {
  enum class Kind { kExact, kMonteCarlo };
  Kind kind = Kind::kExact;
  int sample_size = 0;
  std::uint64_t seed = 0;

  static DiagnosticsMode exact() { return {}; }
  static DiagnosticsMode monte_carlo(int sample_size, std::uint64_t seed) {
    return {Kind::kMonteCarlo, sample_size, seed};
  }
  // Exact when the problem has a support enumeration, otherwise Monte Carlo.
  static DiagnosticsMode best_for(const ProblemSpec& problem, int sample_size,
                                  std::uint64_t seed);

  std::string describe() const;
};

struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

struct VectorEstimate {
  Vector value;
  Vector stderr_;
};

// Every expectation at one point (beta, theta), computed in a single pass.
struct PointExpectations {
  Estimate q;              // 1/2 E||F - psi||^2
  Estimate g;              // G(beta) = E[g(F)]
  VectorEstimate grad_g;   // E[grad F grad g(F)]
  Vector grad_q_beta;      // E[grad F (F - psi)]
  Vector grad_q_theta;     // -E[grad psi (F - psi)]
  Estimate delta;          // regularized Bregman gap with parameter lambda
  Estimate w;              // G + delta
  Vector grad_w_beta;
  Vector grad_w_theta;
  Direction gamma_dir;     // expected direction at gamma
  DiagnosticsMode mode;
};

PointExpectations point_expectations(const ProblemSpec& problem, const Vector& beta,
                                     const Vector& theta, double lambda, double gamma,
                                     const DiagnosticsMode& mode);

Estimate tracking_error_Q(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                          const DiagnosticsMode& mode);

// grad_theta Q = -E[grad psi (F - psi)].
Vector grad_Q_theta(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                    const DiagnosticsMode& mode);

Estimate objective_G(const ProblemSpec& problem, const Vector& beta,
                     const DiagnosticsMode& mode);

VectorEstimate grad_G(const ProblemSpec& problem, const Vector& beta,
                      const DiagnosticsMode& mode);

// c1 * Q + c2 * ||grad G||^2.
double nonoptimality_V(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                       double c1, double c2, const DiagnosticsMode& mode);

struct BregmanW {
  Estimate delta;
  Estimate w;
};

BregmanW bregman_delta_and_W(const ProblemSpec& problem, const Vector& beta,
                             const Vector& theta, double lambda, const DiagnosticsMode& mode);

Direction expected_direction_Gamma(const ProblemSpec& problem, const Vector& beta,
                                   const Vector& theta, double gamma,
                                   const DiagnosticsMode& mode);

struct GradW {
  Vector grad_beta;
  Vector grad_theta;
};

GradW grad_W(const ProblemSpec& problem, const Vector& beta, const Vector& theta, double lambda,
             const DiagnosticsMode& mode);

// Second moments of the sampled direction at a fixed state:
//   mean ||d||^2 = ||mean d||^2 + mean ||d - mean d||^2.
struct DirectionMoments {
  int samples = 0;
  Direction mean;
  Vector mean_stderr;      // per stacked component
  double c_d_sq = 0.0;     // ||mean d||^2
  double c_d_sq_stderr = 0.0;
  double sigma_sq = 0.0;   // mean ||d - mean d||^2
  double second_moment = 0.0;
};

DirectionMoments direction_moment_stats(const ProblemSpec& problem, const Vector& beta,
                                        const Vector& theta, double gamma, int n, Rng& rng);

struct DescentCheck {
  double lhs = 0.0;  // <grad W, Gamma>
  double rhs = 0.0;  // -V
  bool pass = false;
};

inline constexpr double kDescentTolerance = 1e-9;

// Exact enumeration only.
DescentCheck descent_check(const ProblemSpec& problem, const Vector& beta, const Vector& theta,
                           double gamma, double lambda, double c1, double c2);

struct RatePoint {
  double n = 0.0;
  double mean_v = 0.0;
};

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<RatePoint> excluded;  // nonpositive mean V
};

// Ordinary least squares of log(mean V) on log(N). Needs at least four
// distinct N with positive mean V; throws ConfigError otherwise.
RateFit rate_fit(const std::vector<RatePoint>& records);

struct DiagnosticsSettings {
  double lambda = 1.0;
  double gamma = 1.0;
  double c1 = 1.0;
  double c2 = 1.0;
  DiagnosticsMode mode;
};

struct DiagnosticsReport {
  long k = 0;
  Estimate q;
  VectorEstimate grad_g;
  double v_value = 0.0;
  double delta_lambda = 0.0;
  double w_value = 0.0;
  Direction gamma_dir;
  DiagnosticsMode mode;
};

DiagnosticsReport diagnose(const ProblemSpec& problem, const IterateState& state,
                           const DiagnosticsSettings& settings);

}  // namespace csopt
