#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csopt/constants.hpp"
#include "csopt/diagnostics.hpp"
#include "csopt/engine.hpp"
#include "csopt/problems.hpp"

namespace csopt {

// Flat key=value text with dotted section keys; '#' starts a comment.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

// FNV-1a over the canonical (sorted key=value) rendering.
std::uint64_t config_hash(const KeyValues& kv);

enum class LedgerSource { kShipped, kEstimated };

struct ExperimentConfig {
  std::string problem = "BT";
  std::uint64_t problem_seed = 0;

  double gamma = 1.0;
  std::optional<double> alpha;  // empty: theorem-bound minimizer
  Schedule schedule = Schedule::kFixedHorizon;
  std::uint64_t seed = 0;
  long diag_every = 0;
  std::optional<Vector> init_beta;
  std::optional<Vector> init_theta;

  std::vector<long> sweep;
  int replications = 1;

  std::optional<double> lambda;
  std::optional<double> c1;
  std::optional<double> c2;
  int mc_samples = 20000;      // Monte Carlo diagnostics, problems without support
  int moment_samples = 20000;  // direction moments per probe
  int moment_probes = 16;      // 0: moments at z0 only

  LedgerSource ledger_source = LedgerSource::kShipped;
  int estimate_samples = 10000;
  int estimate_probes = 64;
  std::map<std::string, double> ledger_overrides;

  std::filesystem::path output_dir = "results";
  bool record_timing = false;

  KeyValues source;  // the parsed text, for hashing and the manifest

  void validate() const;
};

ExperimentConfig parse_experiment_config(const KeyValues& kv);

// Largest direction moments over z0 and a probe set from the problem box
// (z0 alone when probes is 0).
struct DirectionMomentBound {
  double c_d_sq = 0.0;
  double sigma_sq = 0.0;
};

DirectionMomentBound measure_direction_moments(const ProblemSpec& problem, const ProbeBox& box,
                                               const IterateState& z0, double gamma,
                                               int samples, int probes, std::uint64_t seed);

// Everything fixed before the sweep starts.
struct ExperimentSetup {
  BuiltinProblem problem;
  ConstantLedger ledger;
  std::optional<std::string> lojasiewicz_violation;
  double lambda = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  bool c_derived = false;  // c1, c2 from the constants module
  std::optional<DerivedConstants> derived;  // when (lambda, gamma) is compliant
  std::vector<std::string> violations;
  LipschitzW lipschitz;
  DirectionMomentBound moments;
  double w0 = 0.0;
  double g_min = 0.0;
  double alpha = 0.0;
  bool alpha_tuned = false;
  IterateState z0;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& config);

struct ResultRow {
  long n = 0;
  int replication = 0;
  std::uint64_t seed = 0;
  long stop_index = 0;
  Schedule schedule = Schedule::kFixedHorizon;
  double alpha = 0.0;
  double gamma = 0.0;
  double v_at_s = 0.0;
  double q_at_s = 0.0;
  double norm_grad_g_at_s = 0.0;
  double w_final = 0.0;
  double wall_ms = 0.0;
  long trajectory_samples = 0;
  long diagnostics_samples = 0;
};

struct SummaryRow {
  long n = 0;
  int replications = 0;
  double mean_v = 0.0;
  double stderr_v = 0.0;
};

struct ExperimentResult {
  ExperimentSetup setup;
  std::vector<ResultRow> rows;  // (N, r) order
  std::vector<SummaryRow> summary;
};

// Replication seed: mix_seed(master, N, r).
std::uint64_t replication_seed(std::uint64_t master, long n, int replication);

ExperimentResult run_experiment(const ExperimentConfig& config, int workers);

inline constexpr const char* kResultsHeader =
    "N,replication,seed,S,tau_schedule,alpha,gamma,V_at_S,Q_at_S,normgradG_at_S,W_final,wall_ms";
inline constexpr const char* kSummaryHeader = "N,replications,mean_V,stderr_V";

std::string results_csv(const std::vector<ResultRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::vector<RatePoint> read_summary_csv(const std::filesystem::path& path);

// Writes results.csv, summary.csv and manifest.jsonl into the output dir.
void write_outputs(const ExperimentConfig& config, const ExperimentResult& result);

// Worker count: CSOPT_WORKERS if set, else available parallelism.
int default_workers();

}  // namespace csopt
