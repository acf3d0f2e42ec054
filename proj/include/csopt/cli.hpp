#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>

namespace csopt {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFail = 1;   // check failed / rate out of band
inline constexpr int kExitError = 2;  // config, capability, evaluation or data errors

// Accepted slope band for the rate check.
inline constexpr double kRateSlopeLow = -0.65;
inline constexpr double kRateSlopeHigh = -0.35;

int cli_run(const std::filesystem::path& config_path, int workers, std::ostream& out,
            std::ostream& err);

struct CheckOptions {
  std::string problem = "BT";
  double gamma = 1.0;
  double lambda = 1.0;
  bool unit_ledger = false;  // all-ones stand-in ledger
  bool estimated = false;    // probe-estimated ledger instead of the shipped one
  std::map<std::string, double> overrides;
  std::optional<double> alpha;  // with n_iters: also report the rate bound
  std::optional<long> n_iters;
  std::uint64_t seed = 0;
};

int cli_check(const CheckOptions& options, std::ostream& out, std::ostream& err);

int cli_rate(const std::filesystem::path& summary_path, std::ostream& out, std::ostream& err);

int cli_gradcheck(const std::string& problem, int probes, std::uint64_t seed, std::ostream& out,
                  std::ostream& err);

}  // namespace csopt
