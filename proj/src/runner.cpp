#include "csopt/runner.hpp"

#include <string>

#include "csopt/errors.hpp"

namespace csopt {

void RunConfig::validate() const {
  if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (n_iters < 1) throw ConfigError("N must be at least 1");
  if (diag_every < 0) throw ConfigError("diag_every must be nonnegative");
  if (diag_every > 0 && !diagnostics) {
    throw ConfigError("diag_every > 0 needs diagnostics settings (lambda, c1, c2, mode)");
  }
}

IterateState RunRecord::state_at(long k) const {
  const TrajectoryPoint& p = trajectory.at(static_cast<std::size_t>(k));
  return {p.beta, p.theta, p.k};
}

RunRecord run(const ProblemSpec& problem, const RunConfig& config) {
  config.validate();
  validate(problem);

  IterateState state;
  state.beta = config.init_beta.value_or(Vector::Zero(problem.dim_beta));
  state.theta = config.init_theta.value_or(Vector::Zero(problem.dim_theta));
  state.k = 0;
  validate_state(problem, state);

  Rng samples = make_stream(config.seed, StreamId::kTrajectory);
  Rng stopping = make_stream(config.seed, StreamId::kStopIndex);
  Rng diag_rng = make_stream(config.seed, StreamId::kDiagnostics);

  RunRecord record;
  record.seed = config.seed;
  record.trajectory.reserve(static_cast<std::size_t>(config.n_iters) + 1);

  auto attach_diagnostics = [&](const IterateState& s) {
    DiagnosticsSettings settings = *config.diagnostics;
    settings.gamma = config.gamma;
    if (settings.mode.kind == DiagnosticsMode::Kind::kMonteCarlo) {
      settings.mode.seed = diag_rng();
      record.diagnostics_samples += settings.mode.sample_size;
    }
    record.diagnostics.push_back(diagnose(problem, s, settings));
  };

  for (long k = 0; k < config.n_iters; ++k) {
    const double tau = stepsize(config.schedule, k, config.n_iters, config.alpha);
    record.trajectory.push_back({k, tau, state.beta, state.theta});
    if (config.diag_every > 0 && k % config.diag_every == 0) attach_diagnostics(state);
    try {
      const Sample sample = sample_joint(problem, samples);
      ++record.trajectory_samples;
      state = step(state, compute_direction(problem, state, sample, config.gamma), tau);
      if (!state.beta.allFinite() || !state.theta.allFinite()) {
        throw EvaluationError("iterate became non-finite");
      }
    } catch (const EvaluationError& e) {
      throw EvaluationError("iteration " + std::to_string(k) + ": " + e.what());
    }
  }
  record.trajectory.push_back({state.k, 0.0, state.beta, state.theta});
  if (config.diag_every > 0 && config.n_iters % config.diag_every == 0) {
    attach_diagnostics(state);
  }

  record.stop_index = draw_stop_index(config.schedule, config.n_iters, config.alpha, stopping);
  record.stopped_state = record.state_at(record.stop_index);
  return record;
}

}  // namespace csopt
