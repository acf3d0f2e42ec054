#include "csopt/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "csopt/errors.hpp"
#include "csopt/numfmt.hpp"
#include "csopt/runner.hpp"

namespace csopt {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

long parse_long(const std::string& text, std::string_view what) {
  const double v = parse_double(text, what);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw ConfigError(std::string(what) + " must be an integer, got '" + text + "'");
  }
  return static_cast<long>(v);
}

std::uint64_t parse_u64(const std::string& text, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(std::string(what) + " must be an unsigned integer, got '" + text + "'");
  }
  return v;
}

Vector parse_vector(const std::string& text, std::string_view what) {
  const auto parts = split(text, ',');
  Vector v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], what);
  return v;
}

bool parse_bool(const std::string& text, std::string_view what) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(std::string(what) + " must be true or false");
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
    kv[key] = trim(std::string_view(stripped).substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_key_values(os.str());
}

std::uint64_t config_hash(const KeyValues& kv) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [key, value] : kv) {
    for (char c : key + "=" + value + "\n") {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void ExperimentConfig::validate() const {
  if (sweep.empty()) throw ConfigError("sweep.n must list at least one N");
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    if (sweep[i] < 1) throw ConfigError("sweep values must be at least 1");
    if (i > 0 && sweep[i] <= sweep[i - 1]) {
      throw ConfigError("sweep values must be strictly increasing");
    }
  }
  if (replications < 1) throw ConfigError("sweep.replications must be at least 1");
  if (!(gamma > 0.0)) throw ConfigError("run.gamma must be positive");
  if (alpha && !(*alpha > 0.0)) throw ConfigError("run.alpha must be positive");
  if (diag_every < 0) throw ConfigError("run.diag_every must be nonnegative");
  if (c1.has_value() != c2.has_value()) {
    throw ConfigError("diagnostics.c1 and diagnostics.c2 must be given together");
  }
  if (c1 && (!(*c1 > 0.0) || !(*c2 > 0.0))) throw ConfigError("c1 and c2 must be positive");
  if (mc_samples < 2 || moment_samples < 2) throw ConfigError("sample sizes must be at least 2");
  if (moment_probes < 0) throw ConfigError("diagnostics.moment_probes must be nonnegative");
}

ExperimentConfig parse_experiment_config(const KeyValues& kv) {
  ExperimentConfig c;
  c.source = kv;
  for (const auto& [key, value] : kv) {
    if (key == "problem.name") {
      c.problem = value;
    } else if (key == "problem.seed") {
      c.problem_seed = parse_u64(value, key);
    } else if (key == "run.gamma") {
      c.gamma = parse_double(value, key);
    } else if (key == "run.alpha") {
      if (value != "auto") c.alpha = parse_double(value, key);
    } else if (key == "run.schedule") {
      c.schedule = parse_schedule(value);
    } else if (key == "run.seed") {
      c.seed = parse_u64(value, key);
    } else if (key == "run.diag_every") {
      c.diag_every = parse_long(value, key);
    } else if (key == "run.init_beta") {
      c.init_beta = parse_vector(value, key);
    } else if (key == "run.init_theta") {
      c.init_theta = parse_vector(value, key);
    } else if (key == "sweep.n") {
      for (const std::string& part : split(value, ',')) c.sweep.push_back(parse_long(part, key));
    } else if (key == "sweep.replications") {
      c.replications = static_cast<int>(parse_long(value, key));
    } else if (key == "diagnostics.lambda") {
      if (value != "auto") c.lambda = parse_double(value, key);
    } else if (key == "diagnostics.c1") {
      c.c1 = parse_double(value, key);
    } else if (key == "diagnostics.c2") {
      c.c2 = parse_double(value, key);
    } else if (key == "diagnostics.mc_samples") {
      c.mc_samples = static_cast<int>(parse_long(value, key));
    } else if (key == "diagnostics.moment_samples") {
      c.moment_samples = static_cast<int>(parse_long(value, key));
    } else if (key == "diagnostics.moment_probes") {
      c.moment_probes = static_cast<int>(parse_long(value, key));
    } else if (key == "ledger.source") {
      if (value == "shipped") {
        c.ledger_source = LedgerSource::kShipped;
      } else if (value == "estimated") {
        c.ledger_source = LedgerSource::kEstimated;
      } else {
        throw ConfigError("ledger.source must be shipped or estimated");
      }
    } else if (key == "ledger.estimate_samples") {
      c.estimate_samples = static_cast<int>(parse_long(value, key));
    } else if (key == "ledger.estimate_probes") {
      c.estimate_probes = static_cast<int>(parse_long(value, key));
    } else if (key.rfind("ledger.", 0) == 0) {
      const std::string name = key.substr(7);
      ConstantLedger probe;
      probe.at(name);  // throws on unknown keys
      c.ledger_overrides[name] = parse_double(value, key);
    } else if (key == "output.dir") {
      c.output_dir = value;
    } else if (key == "output.record_timing") {
      c.record_timing = parse_bool(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  c.validate();
  return c;
}

std::uint64_t replication_seed(std::uint64_t master, long n, int replication) {
  return mix_seed(master, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(replication));
}

DirectionMomentBound measure_direction_moments(const ProblemSpec& problem, const ProbeBox& box,
                                               const IterateState& z0, double gamma,
                                               int samples, int probes, std::uint64_t seed) {
  Rng probe_rng = make_stream(seed, StreamId::kProbes);
  std::vector<Vector> betas, thetas;
  if (probes > 0) {
    betas = probe_points(box.beta_lo, box.beta_hi, probes, probe_rng);
    thetas = probe_points(box.theta_lo, box.theta_hi, probes, probe_rng);
  }
  const std::size_t count = std::max(betas.size(), thetas.size());
  DirectionMomentBound bound;
  Rng rng = make_stream(seed, StreamId::kDiagnostics);
  for (std::size_t j = 0; j <= count; ++j) {
    const Vector& beta = j == 0 ? z0.beta : betas[(j - 1) % betas.size()];
    const Vector& theta = j == 0 ? z0.theta : thetas[(j - 1) % thetas.size()];
    const DirectionMoments m = direction_moment_stats(problem, beta, theta, gamma, samples, rng);
    bound.c_d_sq = std::max(bound.c_d_sq, m.c_d_sq);
    bound.sigma_sq = std::max(bound.sigma_sq, m.sigma_sq);
  }
  return bound;
}

ExperimentSetup prepare_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentSetup setup;
  setup.problem = make_problem(config.problem, config.problem_seed);
  const ProblemSpec& spec = setup.problem.spec;

  setup.ledger = setup.problem.ledger;
  if (config.ledger_source == LedgerSource::kEstimated) {
    Rng rng = make_stream(config.seed, StreamId::kProbes, 1);
    LedgerEstimate est = estimate_ledger(spec, setup.problem.box, config.estimate_samples,
                                         config.estimate_probes, rng);
    if (!est.m_estimated) est.ledger.M = setup.problem.ledger.M;
    setup.ledger = est.ledger;
    setup.lojasiewicz_violation = est.lojasiewicz_violation;
  }
  setup.ledger.apply(config.ledger_overrides);
  setup.ledger.validate();

  setup.lambda = config.lambda.value_or(lambda_for_min_gamma(setup.ledger));
  setup.violations = compliance_violations(setup.ledger, setup.lambda, config.gamma);
  if (setup.violations.empty()) {
    setup.derived = derive_constants(setup.ledger, setup.lambda, config.gamma);
  }
  if (config.c1) {
    setup.c1 = *config.c1;
    setup.c2 = *config.c2;
  } else if (setup.derived) {
    setup.c1 = setup.derived->c1;
    setup.c2 = setup.derived->c2;
    setup.c_derived = true;
  } else {
    std::string msg = "cannot derive c1, c2 for gamma=" + format_double(config.gamma) +
                      ", lambda=" + format_double(setup.lambda) + ":";
    for (const std::string& v : setup.violations) msg += " [" + v + "]";
    throw ConfigError(msg + "; set diagnostics.c1 and diagnostics.c2");
  }
  setup.lipschitz = lipschitz_W(setup.ledger, setup.lambda);

  setup.z0.beta = config.init_beta.value_or(Vector::Zero(spec.dim_beta));
  setup.z0.theta = config.init_theta.value_or(Vector::Zero(spec.dim_theta));
  validate_state(spec, setup.z0);

  const DiagnosticsMode mode =
      DiagnosticsMode::best_for(spec, config.mc_samples, mix_seed(config.seed, 0xD1A6));
  setup.w0 = bregman_delta_and_W(spec, setup.z0.beta, setup.z0.theta, setup.lambda, mode).w.value;
  setup.g_min = setup.problem.g_min.value_or(std::nan(""));

  if (config.alpha) {
    setup.alpha = *config.alpha;
  } else {
    if (!setup.problem.g_min) {
      throw ConfigError("run.alpha=auto needs a known G_min for problem " + spec.name);
    }
    setup.moments = measure_direction_moments(spec, setup.problem.box, setup.z0, config.gamma,
                                              config.moment_samples, config.moment_probes,
                                              config.seed);
    setup.alpha = optimal_alpha(setup.lipschitz.total, std::sqrt(setup.moments.c_d_sq),
                                std::sqrt(setup.moments.sigma_sq), setup.w0, setup.g_min);
    setup.alpha_tuned = true;
  }
  return setup;
}

namespace {

ResultRow run_replication(const ExperimentConfig& config, const ExperimentSetup& setup, long n,
                          int r) {
  const auto start = std::chrono::steady_clock::now();
  const ProblemSpec& spec = setup.problem.spec;
  RunConfig rc;
  rc.gamma = config.gamma;
  rc.alpha = setup.alpha;
  rc.n_iters = n;
  rc.schedule = config.schedule;
  rc.seed = replication_seed(config.seed, n, r);
  rc.init_beta = setup.z0.beta;
  rc.init_theta = setup.z0.theta;
  const DiagnosticsMode base_mode = DiagnosticsMode::best_for(spec, config.mc_samples, 0);
  if (config.diag_every > 0) {
    rc.diag_every = config.diag_every;
    rc.diagnostics = DiagnosticsSettings{setup.lambda, config.gamma, setup.c1, setup.c2, base_mode};
  }
  const RunRecord record = run(spec, rc);

  DiagnosticsSettings settings{setup.lambda, config.gamma, setup.c1, setup.c2, base_mode};
  long diag_samples = record.diagnostics_samples;
  auto evaluate = [&](const IterateState& s, std::uint64_t salt) {
    DiagnosticsSettings local = settings;
    if (local.mode.kind == DiagnosticsMode::Kind::kMonteCarlo) {
      local.mode.seed = mix_seed(rc.seed, static_cast<std::uint64_t>(StreamId::kDiagnostics), salt);
      diag_samples += local.mode.sample_size;
    }
    return diagnose(spec, s, local);
  };
  const DiagnosticsReport at_s = evaluate(record.stopped_state, 1);
  const DiagnosticsReport at_end = evaluate(record.final_state(), 2);

  ResultRow row;
  row.n = n;
  row.replication = r;
  row.seed = rc.seed;
  row.stop_index = record.stop_index;
  row.schedule = config.schedule;
  row.alpha = setup.alpha;
  row.gamma = config.gamma;
  row.v_at_s = at_s.v_value;
  row.q_at_s = at_s.q.value;
  row.norm_grad_g_at_s = at_s.grad_g.value.norm();
  row.w_final = at_end.w_value;
  row.trajectory_samples = record.trajectory_samples;
  row.diagnostics_samples = diag_samples;
  if (config.record_timing) {
    row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            start)
                      .count();
  }
  return row;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, int workers) {
  ExperimentResult result;
  result.setup = prepare_experiment(config);

  struct Task {
    long n;
    int r;
  };
  std::vector<Task> tasks;
  for (long n : config.sweep) {
    for (int r = 0; r < config.replications; ++r) tasks.push_back({n, r});
  }
  result.rows.resize(tasks.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        result.rows[i] = run_replication(config, result.setup, tasks[i].n, tasks[i].r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < count; ++w) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  for (long n : config.sweep) {
    SummaryRow s;
    s.n = n;
    double sum = 0.0, sum_sq = 0.0;
    for (const ResultRow& row : result.rows) {
      if (row.n != n) continue;
      ++s.replications;
      sum += row.v_at_s;
      sum_sq += row.v_at_s * row.v_at_s;
    }
    const double m = s.replications;
    s.mean_v = sum / m;
    s.stderr_v = s.replications > 1
                     ? std::sqrt(std::max(0.0, (sum_sq - m * s.mean_v * s.mean_v) / (m - 1.0)) / m)
                     : 0.0;
    result.summary.push_back(s);
  }
  return result;
}

std::string results_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  os << kResultsHeader << "\n";
  for (const ResultRow& r : rows) {
    os << r.n << "," << r.replication << "," << r.seed << "," << r.stop_index << ","
       << to_string(r.schedule) << "," << format_double(r.alpha) << ","
       << format_double(r.gamma) << "," << format_double(r.v_at_s) << ","
       << format_double(r.q_at_s) << "," << format_double(r.norm_grad_g_at_s) << ","
       << format_double(r.w_final) << "," << format_double(r.wall_ms) << "\n";
  }
  return os.str();
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << kSummaryHeader << "\n";
  for (const SummaryRow& s : rows) {
    os << s.n << "," << s.replications << "," << format_double(s.mean_v) << ","
       << format_double(s.stderr_v) << "\n";
  }
  return os.str();
}

std::vector<RatePoint> read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + " is empty");
  const auto header = split(line, ',');
  const auto col = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError(path.string() + " lacks column " + std::string(name));
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t n_col = col("N"), v_col = col("mean_V");
  std::vector<RatePoint> points;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) throw ConfigError("ragged row in " + path.string());
    points.push_back({parse_double(fields[n_col], "N"), parse_double(fields[v_col], "mean_V")});
  }
  return points;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

nlohmann::json ledger_json(const ConstantLedger& ledger) {
  nlohmann::json j;
  for (std::string_view key : ConstantLedger::kKeys) {
    const LedgerEntry& e = ledger.at(key);
    nlohmann::json entry{{"value", e.value}};
    switch (e.provenance) {
      case Provenance::kAnalytic:
        entry["provenance"] = "analytic";
        break;
      case Provenance::kEstimated:
        entry["provenance"] = "estimated";
        entry["sample_size"] = e.sample_size;
        entry["confidence"] = e.confidence;
        break;
      case Provenance::kUnavailable:
        entry["provenance"] = "unavailable";
        break;
    }
    j[std::string(key)] = entry;
  }
  return j;
}

}  // namespace

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
  std::filesystem::create_directories(config.output_dir);
  write_file(config.output_dir / "results.csv", results_csv(result.rows));
  write_file(config.output_dir / "summary.csv", summary_csv(result.summary));

  const ExperimentSetup& s = result.setup;
  std::ostringstream hash;
  hash << std::hex << config_hash(config.source);
  long trajectory_samples = 0, diagnostics_samples = 0;
  for (const ResultRow& row : result.rows) {
    trajectory_samples += row.trajectory_samples;
    diagnostics_samples += row.diagnostics_samples;
  }
  nlohmann::json derived{{"lambda", s.lambda},
                         {"c1", s.c1},
                         {"c2", s.c2},
                         {"c_derived", s.c_derived},
                         {"L_W_beta", s.lipschitz.beta},
                         {"L_W_theta", s.lipschitz.theta},
                         {"L_W", s.lipschitz.total},
                         {"alpha", s.alpha},
                         {"alpha_tuned", s.alpha_tuned},
                         {"W0", s.w0},
                         {"violations", s.violations}};
  if (std::isfinite(s.g_min)) derived["G_min"] = s.g_min;
  if (s.alpha_tuned) {
    derived["C_d_sq"] = s.moments.c_d_sq;
    derived["sigma_sq"] = s.moments.sigma_sq;
  }
  if (s.derived) {
    derived["gamma_min"] = s.derived->gamma_min;
    derived["cap_C"] = s.derived->cap_C;
    derived["epsilon"] = s.derived->epsilon;
  }
  nlohmann::json samples = nlohmann::json::array();
  for (const ResultRow& row : result.rows) {
    samples.push_back({{"N", row.n},
                       {"replication", row.replication},
                       {"trajectory", row.trajectory_samples},
                       {"diagnostics", row.diagnostics_samples}});
  }

  std::ostringstream manifest;
  manifest << nlohmann::json{{"record", "config"},
                             {"hash", hash.str()},
                             {"entries", config.source}}.dump()
           << "\n";
  manifest << nlohmann::json{{"record", "ledger"}, {"entries", ledger_json(s.ledger)}}.dump()
           << "\n";
  if (s.lojasiewicz_violation) {
    manifest << nlohmann::json{{"record", "lojasiewicz_violation"}, {"detail", *s.lojasiewicz_violation}}.dump()
             << "\n";
  }
  manifest << nlohmann::json{{"record", "derived"}, {"entries", derived}}.dump() << "\n";
  manifest << nlohmann::json{{"record", "samples"},
                             {"trajectory_total", trajectory_samples},
                             {"diagnostics_total", diagnostics_samples},
                             {"per_run", samples}}
                  .dump()
           << "\n";
  manifest << nlohmann::json{{"record", "versions"},
                             {"csopt", "1.0.0"},
                             {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                           std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                           std::to_string(EIGEN_MINOR_VERSION)},
                             {"compiler", __VERSION__}}
                  .dump()
           << "\n";
  const auto now = std::chrono::system_clock::now();
  manifest << nlohmann::json{{"record", "timestamp"},
                             {"unix_ms", std::chrono::duration_cast<std::chrono::milliseconds>(
                                             now.time_since_epoch())
                                             .count()}}
                  .dump()
           << "\n";
  write_file(config.output_dir / "manifest.jsonl", manifest.str());
}

int default_workers() {
  if (const char* env = std::getenv("CSOPT_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace csopt
