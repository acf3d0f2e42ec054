#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "csopt/cli.hpp"
#include "csopt/errors.hpp"
#include "csopt/harness.hpp"

using namespace csopt;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("csopt_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string small_config(const fs::path& out_dir, const std::string& extra = "") {
  return "problem.name=BT\n"
         "run.gamma=20\n"
         "run.alpha=0.5\n"
         "run.seed=7\n"
         "sweep.n=16,64\n"
         "sweep.replications=4\n"
         "diagnostics.lambda=3\n"
         "diagnostics.c1=2.24\n"
         "diagnostics.c2=0.21875\n"
         "diagnostics.moment_samples=2000\n"
         "diagnostics.moment_probes=2\n"
         "output.dir=" + out_dir.string() + "\n" + extra;
}

void write_summary(const fs::path& path, const std::vector<std::pair<double, double>>& rows) {
  std::ostringstream s;
  s << kSummaryHeader << "\n";
  for (auto [n, v] : rows) s << static_cast<long>(n) << ",30," << v << ",0\n";
  write(path, s.str());
}

}  // namespace

TEST_CASE("key-value parsing") {
  const KeyValues kv = parse_key_values("# comment\na.b = 1\n\n  c.d=two words  # tail\n");
  CHECK(kv.size() == 2);
  CHECK(kv.at("a.b") == "1");
  CHECK(kv.at("c.d") == "two words");
  CHECK_THROWS_AS(parse_key_values("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_key_values("just text\n"), ConfigError);
  CHECK(config_hash(parse_key_values("a=1\nb=2\n")) == config_hash(parse_key_values("b=2\na=1\n")));
  CHECK(config_hash(parse_key_values("a=1\n")) != config_hash(parse_key_values("a=2\n")));
}

TEST_CASE("experiment config") {
  ExperimentConfig c = parse_experiment_config(parse_key_values(small_config("out")));
  CHECK(c.problem == "BT");
  CHECK(c.gamma == 20.0);
  CHECK(c.alpha == 0.5);
  CHECK(c.sweep == std::vector<long>{16, 64});
  CHECK(c.replications == 4);
  CHECK(c.schedule == Schedule::kFixedHorizon);

  c = parse_experiment_config(parse_key_values(small_config("out", "ledger.M=3\nrun.schedule=anytime\n")));
  CHECK(c.ledger_overrides.at("M") == 3.0);
  CHECK(c.schedule == Schedule::kAnytime);

  auto bad = [](const std::string& text) {
    return parse_experiment_config(parse_key_values(text));
  };
  CHECK_THROWS_AS(bad("sweep.n=64,16\n"), ConfigError);
  CHECK_THROWS_AS(bad("sweep.n=16\nsweep.replications=0\n"), ConfigError);
  CHECK_THROWS_AS(bad("sweep.n=16\nrun.colour=red\n"), ConfigError);
  CHECK_THROWS_AS(bad("sweep.n=16\nledger.Q=1\n"), ConfigError);
  CHECK_THROWS_AS(bad("sweep.n=16\ndiagnostics.c1=1\n"), ConfigError);
  CHECK_THROWS_AS(bad("sweep.n=16\nrun.gamma=abc\n"), ConfigError);
  CHECK_THROWS_AS(bad("sweep.n=16\nrun.schedule=weekly\n"), ConfigError);
  CHECK_THROWS_AS(bad("run.gamma=1\n"), ConfigError);
}

TEST_CASE("replication seeds are distinct") {
  CHECK(replication_seed(1, 64, 0) != replication_seed(1, 64, 1));
  CHECK(replication_seed(1, 64, 0) != replication_seed(1, 128, 0));
  CHECK(replication_seed(1, 64, 0) != replication_seed(2, 64, 0));
  CHECK(replication_seed(1, 64, 0) == replication_seed(1, 64, 0));
}

TEST_CASE("run writes deterministic outputs") {
  const fs::path dir = scratch_dir("determinism");
  const fs::path cfg = dir / "exp.cfg";
  write(cfg, small_config(dir / "a"));
  std::ostringstream out, err;
  REQUIRE(cli_run(cfg, 1, out, err) == kExitOk);
  write(cfg, small_config(dir / "b"));
  REQUIRE(cli_run(cfg, 3, out, err) == kExitOk);

  const std::string a = slurp(dir / "a" / "results.csv");
  CHECK(a == slurp(dir / "b" / "results.csv"));
  CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));

  std::istringstream lines(a);
  std::string header, line;
  std::getline(lines, header);
  CHECK(header == kResultsHeader);
  int rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 8);
  CHECK(a.back() == '\n');

  std::ifstream manifest(dir / "a" / "manifest.jsonl");
  bool saw_config = false, saw_ledger = false, saw_samples = false;
  while (std::getline(manifest, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    const std::string kind = j.at("record");
    saw_config |= kind == "config";
    saw_ledger |= kind == "ledger";
    if (kind == "samples") {
      saw_samples = true;
      CHECK(j.at("trajectory_total").get<long>() == 4 * 16 + 4 * 64);
    }
  }
  CHECK(saw_config);
  CHECK(saw_ledger);
  CHECK(saw_samples);
  fs::remove_all(dir);
}

TEST_CASE("smallest run") {
  const fs::path dir = scratch_dir("smallest");
  ExperimentConfig c = parse_experiment_config(parse_key_values(small_config(dir)));
  c.sweep = {1};
  c.replications = 1;
  const ExperimentResult r = run_experiment(c, 1);
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].stop_index == 0);
  CHECK(r.rows[0].n == 1);
  const double v0 = 2.24 * 0.1325 + 0.21875 * 0.4406468680819666 * 0.4406468680819666;
  CHECK(r.rows[0].v_at_s == doctest::Approx(v0).epsilon(1e-12));
  CHECK(r.rows[0].q_at_s == doctest::Approx(0.1325).epsilon(1e-12));
  REQUIRE(r.summary.size() == 1);
  CHECK(r.summary[0].replications == 1);
  CHECK(r.summary[0].mean_v == r.rows[0].v_at_s);
  fs::remove_all(dir);
}

TEST_CASE("mean V decreases along a sweep") {
  const fs::path dir = scratch_dir("sweep");
  ExperimentConfig c = parse_experiment_config(parse_key_values(small_config(dir)));
  c.sweep = {64, 1024, 16384};
  c.replications = 20;
  c.alpha = 1.0;
  const ExperimentResult r = run_experiment(c, default_workers());
  REQUIRE(r.summary.size() == 3);
  CHECK(r.summary[0].mean_v > r.summary[1].mean_v);
  CHECK(r.summary[1].mean_v > r.summary[2].mean_v);
  fs::remove_all(dir);
}

TEST_CASE("rate subcommand") {
  const fs::path dir = scratch_dir("rate");
  std::vector<std::pair<double, double>> half, full;
  for (int e = 10; e <= 16; e += 2) {
    const double n = std::ldexp(1.0, e);
    half.push_back({n, 2.0 / std::sqrt(n)});
    full.push_back({n, 2.0 / n});
  }
  write_summary(dir / "half.csv", half);
  write_summary(dir / "full.csv", full);
  write_summary(dir / "short.csv", {{1024, 0.1}, {4096, 0.05}});
  std::ostringstream out, err;
  CHECK(cli_rate(dir / "half.csv", out, err) == kExitOk);
  CHECK(out.str().find("slope -0.5") != std::string::npos);
  CHECK(cli_rate(dir / "full.csv", out, err) == kExitFail);
  CHECK(cli_rate(dir / "short.csv", out, err) == kExitError);
  CHECK(cli_rate(dir / "missing.csv", out, err) == kExitError);
  fs::remove_all(dir);
}

TEST_CASE("check subcommand") {
  std::ostringstream out, err;
  CheckOptions o;
  o.unit_ledger = true;
  o.lambda = 3.0;
  o.gamma = 20.0;
  CHECK(cli_check(o, out, err) == kExitOk);
  const std::string text = out.str();
  CHECK(text.find("2.24") != std::string::npos);
  CHECK(text.find("0.21875") != std::string::npos);
  CHECK(text.find("1.5625") != std::string::npos);
  CHECK(text.find("compliant") != std::string::npos);

  std::ostringstream out2;
  o.gamma = 16.5;
  CHECK(cli_check(o, out2, err) == kExitFail);
  CHECK(out2.str().find("gamma threshold") != std::string::npos);

  std::ostringstream out3;
  o.gamma = 20.0;
  o.lambda = 1.0;
  CHECK(cli_check(o, out3, err) == kExitFail);
  CHECK(out3.str().find("lambda floor") != std::string::npos);

  std::ostringstream out4, err4;
  o.problem = "nope";
  CHECK(cli_check(o, out4, err4) == kExitError);
  CHECK_FALSE(err4.str().empty());
}

TEST_CASE("gradcheck subcommand") {
  std::ostringstream out, err;
  CHECK(cli_gradcheck("BT", 20, 1, out, err) == kExitOk);
  CHECK(cli_gradcheck("LG(2)", 20, 1, out, err) == kExitOk);
  CHECK(cli_gradcheck("??", 20, 1, out, err) == kExitError);
}
