#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csopt/model.hpp"
#include "csopt/probe.hpp"

namespace csopt {

enum class Provenance { kAnalytic, kEstimated, kUnavailable };

struct LedgerEntry {
  double value = 0.0;
  Provenance provenance = Provenance::kAnalytic;
  long sample_size = 0;    // estimated entries only
  double confidence = 0.0;  // estimated entries: probes / (probes + 1)

  static LedgerEntry analytic(double v) { return {v, Provenance::kAnalytic, 0, 0.0}; }
};

// Bound constants of the smoothness/integrability assumptions plus the
// Lojasiewicz constant M of the tracking error:
//   ||grad g|| <= L_g, ||hess g|| <= L_hess_g;
//   p-th moments (p = 2, 4) of the envelopes of ||grad_beta f||, its
//   Lipschitz modulus, and ||f|| bounded by Lbar_f, Lbar_grad_f, C_f;
//   likewise Lbar_psi, Lbar_grad_psi, C_psi for the model;
//   Q(beta, theta) <= M ||grad_theta Q(beta, theta)||^2.
//
// Entries are nonnegative; M must be strictly positive. A zero entry is
// legitimate for affine models (Lbar_grad_psi) or linear outer functions
// (L_hess_g).
struct ConstantLedger {
  LedgerEntry L_g, L_hess_g;
  LedgerEntry Lbar_f, C_f, Lbar_grad_f;
  LedgerEntry Lbar_psi, C_psi, Lbar_grad_psi;
  LedgerEntry M;

  static constexpr std::array<std::string_view, 9> kKeys = {
      "L_g", "L_hess_g", "Lbar_f", "C_f", "Lbar_grad_f", "Lbar_psi", "C_psi", "Lbar_grad_psi", "M"};

  static ConstantLedger all_ones();

  LedgerEntry& at(std::string_view key);
  const LedgerEntry& at(std::string_view key) const;

  // Throws ConfigError naming the first bad entry.
  void validate() const;

  // One `<prefix>key=value` line per entry, in kKeys order.
  std::string to_text(std::string_view prefix = "") const;
  // Applies key=value overrides; overridden entries become analytic.
  void apply(const std::map<std::string, double>& overrides);
};

struct DerivedConstants {
  double lambda = 0.0;
  double gamma = 0.0;
  double gamma_min = 0.0;
  double epsilon = 0.0;
  double cap_C = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double L_W_beta = 0.0;
  double L_W_theta = 0.0;
  double L_W = 0.0;
};

// max(L_hess_g, 2 M Lbar_psi^2 L_hess_g). lambda must exceed the second term
// strictly and be at least the first.
double lambda_floor(const ConstantLedger& ledger);

// Smallest gamma for which 2 (gamma (lambda/M - 2 Lbar_psi^2 L_hess_g)
// - 4 lambda Lbar_f^2 L_hess_g) > lambda^2 Lbar_f^2 holds for every larger gamma.
double gamma_min(const ConstantLedger& ledger, double lambda);

// The lambda minimizing gamma_min, but never below L_hess_g. Falls back to
// max(1, L_hess_g) when the outer Hessian bound is zero (gamma_min is then
// increasing in lambda).
double lambda_for_min_gamma(const ConstantLedger& ledger);

struct DescentCoefficients {
  double cap_C = 0.0;
  double epsilon = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

// C = gamma (lambda/M - 2 Lbar_psi^2 L_hess_g) - 4 lambda Lbar_f^2 L_hess_g,
// epsilon in (lambda^2 Lbar_f^2 / C, 2) (midpoint by default),
// c1 = C - lambda^2 Lbar_f^2 / epsilon, c2 = 1 - epsilon / 2.
DescentCoefficients descent_coefficients(const ConstantLedger& ledger, double lambda,
                                         double gamma,
                                         std::optional<double> epsilon = std::nullopt);

struct LipschitzW {
  double beta = 0.0;
  double theta = 0.0;
  double total = 0.0;
};

// Lipschitz constants of the two blocks of grad W and their Euclidean
// combination.
LipschitzW lipschitz_W(const ConstantLedger& ledger, double lambda);

// ((L_W/2)(C_d^2 + sigma^2) alpha^2 + W0 - G_min) / (alpha sqrt(N)).
double theorem_bound(double L_W, double C_d, double sigma, double alpha, long n_iters, double W0,
                     double G_min);

// Minimizer of theorem_bound over alpha: sqrt(2 (W0 - G_min) / (L_W (C_d^2 + sigma^2))).
double optimal_alpha(double L_W, double C_d, double sigma, double W0, double G_min);

// All derived quantities for (lambda, gamma); throws DomainError when the
// pair violates a strict inequality.
DerivedConstants derive_constants(const ConstantLedger& ledger, double lambda, double gamma,
                                  std::optional<double> epsilon = std::nullopt);

// Names of the violated inequalities, empty when (lambda, gamma) is compliant.
std::vector<std::string> compliance_violations(const ConstantLedger& ledger, double lambda,
                                               double gamma);

struct LedgerEstimate {
  ConstantLedger ledger;
  bool m_estimated = false;
  std::optional<std::string> lojasiewicz_violation;
};

// Probe-based estimate of the ledger inside `box`. Envelope functions are
// maxima over probes per sample; moment bounds take the larger of the p = 2
// and p = 4 empirical moments. M is the largest Q / ||grad_theta Q||^2 over
// probes, refined by a compass search from the best probe, and is estimated
// only for problems with a support enumeration (otherwise left unavailable).
LedgerEstimate estimate_ledger(const ProblemSpec& problem, const ProbeBox& box, int sample_count,
                               int probe_count, Rng& rng);

}  // namespace csopt
