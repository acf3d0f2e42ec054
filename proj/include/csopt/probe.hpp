#pragma once

#include <vector>

#include "csopt/model.hpp"

namespace csopt {

// Axis-aligned box for probing (beta, theta, u). Estimated constants and
// probe-based checks are only meaningful inside the box they were drawn from.
struct ProbeBox {
  Vector beta_lo, beta_hi;
  Vector theta_lo, theta_hi;
  Vector u_lo, u_hi;

  static ProbeBox uniform(const ProblemSpec& problem, double beta_half_width,
                          double theta_half_width, double u_half_width);
};

Vector draw_in_box(const Vector& lo, const Vector& hi, Rng& rng);

// Box corners (when the dimension is at most 10), then the center, then
// uniform draws until `count` points are produced (corners and center are
// always included, even if that exceeds `count`).
std::vector<Vector> probe_points(const Vector& lo, const Vector& hi, int count, Rng& rng);

// Central-difference derivative of a vector-valued map, in gradient layout:
// entry (i, j) is d out_j / d in_i.
template <class Fn>
Matrix central_difference(Fn&& fn, const Vector& at, double h = 1e-5) {
  Vector probe = at;
  Matrix out;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    probe[i] = at[i] + h;
    Vector up = fn(probe);
    probe[i] = at[i] - h;
    Vector down = fn(probe);
    probe[i] = at[i];
    if (i == 0) out.resize(at.size(), up.size());
    out.row(i) = ((up - down) / (2.0 * h)).transpose();
  }
  return out;
}

// ||analytic - numeric|| / max(1, ||analytic||), Frobenius norms.
double relative_error(const Matrix& analytic, const Matrix& numeric);

struct GradCheckReport {
  int probes = 0;
  double inner = 0.0;       // worst relative error of grad_beta f
  double model = 0.0;       // worst relative error of grad_theta psi
  double outer_grad = 0.0;  // worst relative error of grad g
  double outer_hess = 0.0;  // worst relative error of hess g
  double hess_asymmetry = 0.0;

  double worst() const;
  bool pass(double tol = 1e-5) const { return worst() < tol && hess_asymmetry <= 1e-10; }
};

// Compares the analytic gradients of f, psi and g with central differences
// (h = 1e-5) at `probe_count` random (x, y, beta, theta, u) probes.
GradCheckReport gradcheck(const ProblemSpec& problem, const ProbeBox& box, int probe_count,
                          Rng& rng, double h = 1e-5);

}  // namespace csopt
