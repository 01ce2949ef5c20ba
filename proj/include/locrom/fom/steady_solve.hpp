#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "locrom/fom/model.hpp"
#include "locrom/linalg/lu.hpp"

namespace locrom::fom {

inline constexpr double default_steady_tol = 1e-10;

struct SteadySolveReport {
  Vector solution;
  std::size_t iterations = 0;
  double final_residual_norm = 0.0;
  bool converged = false;
  std::string branch_id;
};

/// Damped Newton on the steady residual. Each step halves the step length
/// until the residual 2-norm decreases (at most 30 halvings; the last trial
/// is accepted). Convergence means ||residual||_2 <= steady_tol.
inline SteadySolveReport steady_solve(const FullOrderModel& model, double theta, std::span<const double> init,
                                      double steady_tol = default_steady_tol, std::size_t max_iter = 100) {
  model.require_in_domain(theta);
  if (init.size() != model.dim()) throw Error(ErrorKind::invalid_input, "initial guess has wrong dimension");
  if (!(steady_tol > 0.0)) throw Error(ErrorKind::invalid_input, "steady_tol must be positive");

  SteadySolveReport report;
  report.branch_id = model.branch_at(theta).branch_id;
  Vector u(init.begin(), init.end());
  Vector r = model.residual(u, theta);
  double rnorm = norm2(r);

  std::size_t it = 0;
  for (; it < max_iter && rnorm > steady_tol; ++it) {
    Vector step;
    try {
      step = lu_solve(model.jacobian(u, theta), r);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::singular_matrix) throw;
      throw SingularJacobianError("Jacobian singular at iteration " + std::to_string(it) + ": " + e.what(), u);
    }
    double length = 1.0;
    Vector trial(u.size());
    Vector trial_r;
    double trial_norm = 0.0;
    for (int halving = 0; halving <= 30; ++halving) {
      for (std::size_t i = 0; i < u.size(); ++i) trial[i] = u[i] - length * step[i];
      trial_r = model.residual(trial, theta);
      trial_norm = norm2(trial_r);
      if (trial_norm < rnorm || !std::isfinite(rnorm)) break;
      length *= 0.5;
    }
    if (!std::isfinite(trial_norm)) break;
    u.swap(trial);
    r.swap(trial_r);
    rnorm = trial_norm;
  }

  report.solution = std::move(u);
  report.iterations = it;
  report.final_residual_norm = rnorm;
  report.converged = rnorm <= steady_tol;
  return report;
}

}  // namespace locrom::fom
