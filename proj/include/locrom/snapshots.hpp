#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "locrom/core/parallel.hpp"
#include "locrom/core/text.hpp"
#include "locrom/fom/steady_solve.hpp"
#include "locrom/linalg/matrix_io.hpp"
#include "locrom/sampling.hpp"

namespace locrom {

/// Converged steady states, one column per training parameter.
struct SnapshotSet {
  std::string model_name;
  ParameterSet parameters;
  DenseMatrix matrix;  // N x S
  std::vector<std::string> branch_ids;
  std::vector<fom::SteadySolveReport> solve_reports;  // solutions stripped; they live in `matrix`
  double steady_tol = fom::default_steady_tol;
  std::string branch_schedule;

  std::size_t dim() const { return matrix.rows(); }
  std::size_t count() const { return matrix.cols(); }
};

/// Steady state on a named branch. A warm start is tried first; the branch
/// seed defines the branch, so the seeded solve wins whenever the two differ
/// (a small-amplitude state next to a pitchfork lies in the basin of the
/// unstable trivial solution).
inline fom::SteadySolveReport solve_on_branch(const fom::FullOrderModel& model, double theta,
                                              const std::string& branch_id, std::span<const double> warm,
                                              double steady_tol = fom::default_steady_tol,
                                              std::size_t max_iter = 100) {
  const Vector seed = model.branch_seed(theta, branch_id);
  if (warm.empty()) return fom::steady_solve(model, theta, seed, steady_tol, max_iter);
  fom::SteadySolveReport rep;
  try {
    rep = fom::steady_solve(model, theta, warm, steady_tol, max_iter);
  } catch (const SingularJacobianError&) {
    rep.converged = false;
  }
  auto cold = fom::steady_solve(model, theta, seed, steady_tol, max_iter);
  const double scale = std::max(1.0, norm2(cold.solution));
  if (cold.converged && (!rep.converged || norm2(subtract(cold.solution, rep.solution)) > 1e-8 * scale))
    return cold;
  return rep;
}

/// Solves the full-order model at every parameter. Consecutive parameters on
/// the same branch form a continuation chain (warm start from the previous
/// snapshot, guarded by solve_on_branch); each chain starts from the branch
/// seed. Chains run concurrently.
inline SnapshotSet generate_snapshots(const fom::FullOrderModel& model, const ParameterSet& params,
                                      double steady_tol = fom::default_steady_tol, std::size_t max_iter = 100) {
  const auto& pts = params.points;
  if (pts.empty()) throw Error(ErrorKind::invalid_input, "no parameters to sample");
  for (std::size_t s = 1; s < pts.size(); ++s)
    if (!(pts[s] > pts[s - 1])) throw Error(ErrorKind::invalid_input, "parameters must be strictly increasing");

  std::vector<std::string> ids(pts.size());
  for (std::size_t s = 0; s < pts.size(); ++s) ids[s] = model.branch_at(pts[s]).branch_id;
  std::vector<std::size_t> chain_start{0};
  for (std::size_t s = 1; s < pts.size(); ++s)
    if (ids[s] != ids[s - 1]) chain_start.push_back(s);
  chain_start.push_back(pts.size());

  SnapshotSet out;
  out.model_name = model.name();
  out.parameters = params;
  out.matrix = DenseMatrix(model.dim(), pts.size());
  out.branch_ids = ids;
  out.solve_reports.resize(pts.size());
  out.steady_tol = steady_tol;
  out.branch_schedule = model.schedule_string();

  parallel_for(chain_start.size() - 1, [&](std::size_t c) {
    Vector init;
    for (std::size_t s = chain_start[c]; s < chain_start[c + 1]; ++s) {
      fom::SteadySolveReport rep;
      try {
        rep = solve_on_branch(model, pts[s], ids[s], init, steady_tol, max_iter);
      } catch (const Error& e) {
        throw Error(ErrorKind::snapshot_generation, "solve failed at theta = " + text::format(pts[s]) + ": " + e.what());
      }
      if (!rep.converged)
        throw Error(ErrorKind::snapshot_generation, "no convergence at theta = " + text::format(pts[s]) +
                                                        " (residual " + text::format(rep.final_residual_norm) + ")");
      std::copy(rep.solution.begin(), rep.solution.end(), out.matrix.col(s).begin());
      init = std::move(rep.solution);
      rep.solution.clear();
      out.solve_reports[s] = std::move(rep);
    }
  });
  return out;
}

/// Largest steady residual norm over the stored snapshots.
inline double max_snapshot_residual(const fom::FullOrderModel& model, const SnapshotSet& set) {
  double worst = 0.0;
  for (std::size_t s = 0; s < set.count(); ++s)
    worst = std::max(worst, norm2(model.residual(set.matrix.col(s), set.parameters.points[s])));
  return worst;
}

// Store layout: <dir>/meta.txt (key = value) and <dir>/snapshots.mat (LROMMAT1).
inline void save_snapshots(const SnapshotSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::size_t> iterations;
  std::vector<double> residuals;
  for (const auto& r : set.solve_reports) {
    iterations.push_back(r.iterations);
    residuals.push_back(r.final_residual_norm);
  }
  std::ostringstream meta;
  meta << "# locrom snapshot store\n"
       << "format = 1\n"
       << "model = " << set.model_name << '\n'
       << "N = " << set.dim() << '\n'
       << "S = " << set.count() << '\n'
       << "steady_tol = " << text::format(set.steady_tol) << '\n'
       << "branch_schedule = " << set.branch_schedule << '\n'
       << "parameters = " << text::join(set.parameters.points) << '\n'
       << "branch_ids = " << text::join(set.branch_ids) << '\n'
       << "iterations = " << text::join(iterations) << '\n'
       << "residual_norms = " << text::join(residuals) << '\n';
  text::write_text(dir / "meta.txt", meta.str());
  write_matrix(dir / "snapshots.mat", set.matrix);
}

inline SnapshotSet load_snapshots(const std::filesystem::path& dir) {
  constexpr auto bad = ErrorKind::corrupt_store;
  const auto kv = text::read_key_values(dir / "meta.txt", bad);
  const std::string where = (dir / "meta.txt").string();
  if (text::require(kv, "format", bad, where) != "1") throw Error(bad, where + ": unsupported format version");

  SnapshotSet set;
  set.model_name = text::require(kv, "model", bad, where);
  const std::size_t n = text::to_count(text::require(kv, "N", bad, where), bad, "N");
  const std::size_t s = text::to_count(text::require(kv, "S", bad, where), bad, "S");
  set.steady_tol = text::to_double(text::require(kv, "steady_tol", bad, where), bad, "steady_tol");
  set.branch_schedule = text::require(kv, "branch_schedule", bad, where);
  set.parameters.points = text::to_doubles(text::require(kv, "parameters", bad, where), bad, "parameters");
  set.parameters.provenance.kind = SamplingKind::explicit_list;
  set.parameters.provenance.explicit_points = set.parameters.points;
  set.branch_ids = text::split(text::require(kv, "branch_ids", bad, where), ',');
  const auto iterations = text::split(text::require(kv, "iterations", bad, where), ',');
  const auto residuals = text::to_doubles(text::require(kv, "residual_norms", bad, where), bad, "residual_norms");

  set.matrix = read_matrix(dir / "snapshots.mat");
  if (set.matrix.rows() != n || set.matrix.cols() != s)
    throw Error(bad, where + ": header says " + std::to_string(n) + "x" + std::to_string(s) + " but matrix is " +
                         std::to_string(set.matrix.rows()) + "x" + std::to_string(set.matrix.cols()));
  if (set.parameters.points.size() != s || set.branch_ids.size() != s || iterations.size() != s ||
      residuals.size() != s)
    throw Error(bad, where + ": per-snapshot lists do not have S entries");
  if (!set.matrix.all_finite()) throw Error(bad, where + ": snapshot matrix has non-finite entries");
  for (std::size_t i = 0; i < s; ++i) {
    fom::SteadySolveReport r;
    r.iterations = text::to_count(iterations[i], bad, "iterations");
    r.final_residual_norm = residuals[i];
    r.converged = residuals[i] <= set.steady_tol;
    r.branch_id = set.branch_ids[i];
    set.solve_reports.push_back(std::move(r));
  }
  if (!set.parameters.points.empty()) {
    set.parameters.provenance.theta_min = set.parameters.points.front();
    set.parameters.provenance.theta_max = set.parameters.points.back();
    set.parameters.provenance.count = s;
  }
  return set;
}

}  // namespace locrom
