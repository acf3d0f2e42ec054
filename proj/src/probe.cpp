#include "csopt/probe.hpp"

#include <algorithm>

namespace csopt {

ProbeBox ProbeBox::uniform(const ProblemSpec& problem, double beta_half_width,
                           double theta_half_width, double u_half_width) {
  ProbeBox box;
  box.beta_lo = Vector::Constant(problem.dim_beta, -beta_half_width);
  box.beta_hi = Vector::Constant(problem.dim_beta, beta_half_width);
  box.theta_lo = Vector::Constant(problem.dim_theta, -theta_half_width);
  box.theta_hi = Vector::Constant(problem.dim_theta, theta_half_width);
  box.u_lo = Vector::Constant(problem.dim_f, -u_half_width);
  box.u_hi = Vector::Constant(problem.dim_f, u_half_width);
  return box;
}

Vector draw_in_box(const Vector& lo, const Vector& hi, Rng& rng) {
  Vector v(lo.size());
  for (Eigen::Index i = 0; i < lo.size(); ++i) v[i] = lo[i] + (hi[i] - lo[i]) * uniform01(rng);
  return v;
}

std::vector<Vector> probe_points(const Vector& lo, const Vector& hi, int count, Rng& rng) {
  std::vector<Vector> points;
  const auto n = lo.size();
  if (n <= 10) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      Vector corner(n);
      for (Eigen::Index i = 0; i < n; ++i) corner[i] = (mask >> i) & 1u ? hi[i] : lo[i];
      points.push_back(std::move(corner));
    }
  }
  points.push_back(0.5 * (lo + hi));
  while (static_cast<int>(points.size()) < count) points.push_back(draw_in_box(lo, hi, rng));
  return points;
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  return (analytic - numeric).norm() / std::max(1.0, analytic.norm());
}

double GradCheckReport::worst() const {
  return std::max({inner, model, outer_grad, outer_hess});
}

GradCheckReport gradcheck(const ProblemSpec& problem, const ProbeBox& box, int probe_count,
                          Rng& rng, double h) {
  GradCheckReport report;
  for (int p = 0; p < probe_count; ++p) {
    const Sample s = sample_joint(problem, rng);
    const Vector beta = draw_in_box(box.beta_lo, box.beta_hi, rng);
    const Vector theta = draw_in_box(box.theta_lo, box.theta_hi, rng);
    const Vector u = draw_in_box(box.u_lo, box.u_hi, rng);

    const InnerEval f = evaluate_inner(problem, s.x, s.y, beta);
    const Matrix f_fd = central_difference(
        [&](const Vector& b) { return evaluate_inner(problem, s.x, s.y, b).value; }, beta, h);
    report.inner = std::max(report.inner, relative_error(f.grad_beta, f_fd));

    const ModelEval psi = evaluate_model(problem, s.x, theta);
    const Matrix psi_fd = central_difference(
        [&](const Vector& t) { return evaluate_model(problem, s.x, t).value; }, theta, h);
    report.model = std::max(report.model, relative_error(psi.grad_theta, psi_fd));

    const OuterEval g = evaluate_outer(problem, u);
    const Matrix g_fd = central_difference(
        [&](const Vector& v) {
          return Vector::Constant(1, evaluate_outer(problem, v).value);
        },
        u, h);
    report.outer_grad = std::max(report.outer_grad, relative_error(g.grad, g_fd));
    const Matrix hess_fd = central_difference(
        [&](const Vector& v) { return evaluate_outer(problem, v).grad; }, u, h);
    report.outer_hess = std::max(report.outer_hess, relative_error(g.hess, hess_fd));
    report.hess_asymmetry =
        std::max(report.hess_asymmetry, (g.hess - g.hess.transpose()).cwiseAbs().maxCoeff());
    ++report.probes;
  }
  return report;
}

}  // namespace csopt
