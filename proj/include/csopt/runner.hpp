#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "csopt/diagnostics.hpp"
#include "csopt/engine.hpp"
#include "csopt/model.hpp"

namespace csopt {

struct RunConfig {
  double gamma = 1.0;
  double alpha = 1.0;
  long n_iters = 1;
  Schedule schedule = Schedule::kFixedHorizon;
  std::uint64_t seed = 0;
  long diag_every = 0;  // 0: no in-run diagnostics
  std::optional<Vector> init_beta;   // default: zeros
  std::optional<Vector> init_theta;  // default: zeros
  // Required when diag_every > 0. Its gamma is overridden by `gamma` above
  // and Monte Carlo seeds are drawn from the diagnostics stream.
  std::optional<DiagnosticsSettings> diagnostics;

  void validate() const;
};

struct TrajectoryPoint {
  long k = 0;
  double tau = 0.0;  // stepsize used to leave this point; 0 for the final point
  Vector beta;
  Vector theta;
};

struct RunRecord {
  std::vector<TrajectoryPoint> trajectory;  // z^0 ... z^N
  long stop_index = 0;
  IterateState stopped_state;
  std::uint64_t seed = 0;
  std::vector<DiagnosticsReport> diagnostics;
  long trajectory_samples = 0;
  long diagnostics_samples = 0;

  IterateState state_at(long k) const;
  const IterateState final_state() const { return state_at(static_cast<long>(trajectory.size()) - 1); }
};

// Runs N iterations, one fresh joint sample per iteration. The stopping
// index is drawn after the loop from its own stream so the trajectory does
// not depend on it. Identical (problem, config) give identical records.
RunRecord run(const ProblemSpec& problem, const RunConfig& config);

}  // namespace csopt
