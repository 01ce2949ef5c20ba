#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "locrom/assignment.hpp"
#include "locrom/clustering.hpp"
#include "locrom/core/parallel.hpp"
#include "locrom/core/text.hpp"
#include "locrom/fom/steady_solve.hpp"
#include "locrom/pipeline/config.hpp"
#include "locrom/podbasis.hpp"
#include "locrom/rom.hpp"
#include "locrom/snapshots.hpp"

namespace locrom::pipeline {

namespace fs = std::filesystem;

/// Runs `body`, tagging any failure with the stage name.
template <typename Body>
auto run_stage(const std::string& stage, Body&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const fs::filesystem_error& e) {
    throw StageError(stage, Error(ErrorKind::invalid_input, e.what()));
  }
}

/// A basis with its reduced model and the projected training snapshots used
/// as initial guesses.
struct RomBundle {
  std::string tag;
  LocalBasis basis;
  ReducedModel rom;
  std::vector<double> init_thetas;
  DenseMatrix init_coeffs;  // L x (number of init thetas)

  /// Projected snapshot whose parameter is nearest to theta (lowest index on ties).
  Vector initial_guess(double theta) const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < init_thetas.size(); ++i)
      if (std::abs(init_thetas[i] - theta) < std::abs(init_thetas[best] - theta)) best = i;
    return init_coeffs.column(best);
  }

  /// Observable from one row of the basis: no full-length vector is formed.
  double observable(std::span<const double> coeffs, std::size_t index) const {
    double v = basis.centred() ? basis.offset[index] : 0.0;
    for (std::size_t l = 0; l < basis.L; ++l) v += basis.basis(index, l) * coeffs[l];
    return v;
  }
};

inline RomBundle make_bundle(const std::string& tag, LocalBasis basis, const fom::FullOrderModel& model,
                             const SnapshotSet& snaps, std::span<const std::size_t> members) {
  RomBundle b;
  b.tag = tag;
  b.rom = project_model(model, basis);
  b.init_coeffs = DenseMatrix(basis.L, members.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    b.init_thetas.push_back(snaps.parameters.points[members[j]]);
    const Vector a = project_coeffs(basis, snaps.matrix.col(members[j]));
    std::copy(a.begin(), a.end(), b.init_coeffs.col(j).begin());
  }
  b.basis = std::move(basis);
  return b;
}

inline void save_bundle(const fs::path& dir, const RomBundle& b) {
  save_basis(dir, b.tag, b.basis);
  save_reduced_model(dir, b.tag, b.rom);
  DenseMatrix init(b.basis.L + 1, b.init_thetas.size());
  for (std::size_t j = 0; j < b.init_thetas.size(); ++j) {
    init(0, j) = b.init_thetas[j];
    for (std::size_t l = 0; l < b.basis.L; ++l) init(l + 1, j) = b.init_coeffs(l, j);
  }
  write_matrix(dir / ("init_" + b.tag + ".mat"), init);
}

inline RomBundle load_bundle(const fs::path& dir, const std::string& tag) {
  constexpr auto bad = ErrorKind::corrupt_store;
  RomBundle b;
  b.tag = tag;
  b.basis = load_basis(dir, tag);
  b.rom = load_reduced_model(dir, tag);
  if (b.rom.L != b.basis.L || b.rom.augmented() != b.basis.centred())
    throw Error(bad, "rom_" + tag + " does not match basis_" + tag);
  const DenseMatrix init = read_matrix(dir / ("init_" + tag + ".mat"));
  if (init.rows() != b.basis.L + 1 || init.cols() == 0 || !init.all_finite())
    throw Error(bad, "init_" + tag + ".mat has the wrong shape");
  b.init_coeffs = DenseMatrix(b.basis.L, init.cols());
  for (std::size_t j = 0; j < init.cols(); ++j) {
    b.init_thetas.push_back(init(0, j));
    for (std::size_t l = 0; l < b.basis.L; ++l) b.init_coeffs(l, j) = init(l + 1, j);
  }
  return b;
}

struct OfflineSummary {
  fs::path directory;
  std::size_t k = 0;
  std::vector<std::size_t> local_sizes;
  std::size_t global1_size = 0;
  std::size_t global2_size = 0;
  std::vector<double> switch_points_midrange;
  std::vector<double> switch_points_mean;
  std::optional<ElbowScan> elbow;
  std::vector<std::string> warnings;
};

namespace detail {

inline bool looks_like_artifacts(const fs::path& dir) {
  return fs::is_directory(dir) && (fs::is_empty(dir) || fs::exists(dir / "offline_report.txt"));
}

inline void write_clusters(const fs::path& dir, const ClusterModel& cm) {
  std::ostringstream os;
  os << "format = 1\nK = " << cm.k << "\nseed = " << cm.seed << "\nrestarts = " << cm.restarts_used
     << "\nvariance = " << text::format(cm.variance) << "\nassignment = " << text::join(cm.assignment) << '\n';
  text::write_text(dir / "clusters.txt", os.str());
  write_matrix(dir / "means.mat", cm.means);
}

}  // namespace detail

/// Offline stage: sample, solve, cluster, build bases and reduced models.
/// Everything is written to a sibling staging directory that replaces
/// `out_dir` only when all stages succeed.
inline OfflineSummary run_offline(const PipelineConfig& config, const fs::path& out_dir) {
  if (out_dir.empty()) throw StageError("config", Error(ErrorKind::config, "no output directory given"));
  const fs::path target = fs::absolute(out_dir).lexically_normal();
  if (fs::exists(target) && !detail::looks_like_artifacts(target))
    throw StageError("config", Error(ErrorKind::config, target.string() +
                                                            " exists and is not a locrom artifact directory"));
  const fs::path staging = target.parent_path() / ("." + target.filename().string() + ".partial");
  fs::remove_all(staging);
  fs::create_directories(staging);

  try {
    OfflineSummary sum;
    sum.directory = target;
    const auto model = run_stage("config", [&] { return build_model(config); });
    const auto plan = run_stage("config", [&] { return resolved_sampling(config, model); });
    text::write_text(staging / "config.txt", to_text(config));

    const ParameterSet params = run_stage("sampling", [&] { return generate_samples(plan); });
    const SnapshotSet snaps = run_stage("snapshots", [&] {
      auto s = generate_snapshots(model, params, config.steady_tol, config.steady_max_iter);
      save_snapshots(s, staging);
      return s;
    });

    const ClusterModel clusters = run_stage("clustering", [&] {
      const std::size_t s = snaps.count();
      const std::size_t k_max = std::min(config.k_max, s);
      std::optional<ElbowScan> scan;
      if (k_max >= 3 && (!config.k || *config.k <= s)) {
        try {
          scan = elbow_select(snaps, {k_max, config.alpha, config.restarts, config.kmeans_max_iter, config.seed});
        } catch (const Error& e) {
          if (!config.k) throw;
          sum.warnings.push_back(std::string("elbow scan skipped: ") + e.what());
        }
      } else if (!config.k) {
        throw Error(ErrorKind::invalid_k, "elbow selection needs at least 3 snapshots and k_max >= 3");
      }
      if (scan) {
        write_elbow_csv(staging / "elbow.csv", *scan);
        if (k_max < config.k_max)
          sum.warnings.push_back("k_max lowered to the snapshot count " + std::to_string(k_max));
        if (scan->no_elbow && !config.k)
          sum.warnings.push_back("no elbow found up to k_max; using K = " + std::to_string(scan->chosen_k));
      }
      ClusterModel cm = config.k ? kmeans(snaps, {*config.k, config.restarts, config.kmeans_max_iter, config.seed})
                                 : scan->model_at(scan->chosen_k);
      cm.seed = config.seed;
      sum.elbow = std::move(scan);
      detail::write_clusters(staging, cm);
      return cm;
    });
    sum.k = clusters.k;

    const auto pc = run_stage("assignment", [&] {
      auto p = induce_parameter_clusters(params, clusters);
      save_parameter_clustering(staging / "parameter_clusters.txt", p);
      sum.switch_points_midrange = switch_points(p, AssignmentCriterion::midrange_radius);
      sum.switch_points_mean = switch_points(p, AssignmentCriterion::parameter_mean);
      return p;
    });

    const auto local = run_stage("basis", [&] {
      auto bases = build_local_bases(snaps, clusters, config.rule, config.mean_center);
      save_local_bases(staging, bases);
      for (const auto& b : bases) sum.local_sizes.push_back(b.L);
      return bases;
    });

    run_stage("rom", [&] {
      std::vector<RomBundle> bundles(local.size());
      parallel_for(local.size(), [&](std::size_t k) {
        const auto members = clusters.members(k);
        bundles[k] = make_bundle(std::to_string(k), local[k], model, snaps, members);
      });
      for (const auto& b : bundles) save_bundle(staging, b);

      GlobalBases g = build_global_bases(snaps.matrix, local, config.mean_center);
      for (auto& w : g.warnings) sum.warnings.push_back(std::move(w));
      std::vector<std::size_t> all(snaps.count());
      for (std::size_t s = 0; s < all.size(); ++s) all[s] = s;
      sum.global1_size = g.global1.L;
      sum.global2_size = g.global2.L;
      save_bundle(staging, make_bundle("global1", std::move(g.global1), model, snaps, all));
      save_bundle(staging, make_bundle("global2", std::move(g.global2), model, snaps, all));
      return 0;
    });

    run_stage("report", [&] {
      std::ostringstream os;
      os << "# locrom offline report\nformat = 1\nmodel = " << model.name() << "\nN = " << model.dim()
         << "\nobservable_index = " << model.observable_index() << "\nS = " << snaps.count() << "\nK = " << sum.k
         << "\nk_selection = " << (config.k ? "fixed" : "elbow") << "\nL = " << text::join(sum.local_sizes)
         << "\nglobal1_L = " << sum.global1_size << "\nglobal2_L = " << sum.global2_size
         << "\nswitch_points_midrange = " << text::join(sum.switch_points_midrange)
         << "\nswitch_points_mean = " << text::join(sum.switch_points_mean)
         << "\nmax_snapshot_residual = " << text::format(max_snapshot_residual(model, snaps))
         << "\nwarnings = " << text::join(sum.warnings, " | ") << '\n';
      text::write_text(staging / "offline_report.txt", os.str());
      (void)pc;
      return 0;
    });

    run_stage("finalize", [&] {
      fs::remove_all(target);
      fs::rename(staging, target);
      return 0;
    });
    return sum;
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

/// Everything the online stage needs, validated on load.
struct Artifacts {
  fs::path directory;
  PipelineConfig config;
  std::string model_name;
  std::size_t dim = 0;
  std::size_t observable_index = 0;
  ParameterClustering clusters;
  std::vector<RomBundle> local;
  RomBundle global1;
  RomBundle global2;
};

inline Artifacts load_artifacts(const fs::path& dir) {
  return run_stage("load", [&] {
    constexpr auto bad = ErrorKind::corrupt_store;
    if (!fs::is_directory(dir)) throw Error(bad, dir.string() + " is not a directory");
    Artifacts a;
    a.directory = dir;
    const auto report = text::read_key_values(dir / "offline_report.txt", bad);
    const std::string where = (dir / "offline_report.txt").string();
    a.model_name = text::require(report, "model", bad, where);
    a.dim = text::to_count(text::require(report, "N", bad, where), bad, "N");
    a.observable_index = text::to_count(text::require(report, "observable_index", bad, where), bad, "observable_index");
    const std::size_t k = text::to_count(text::require(report, "K", bad, where), bad, "K");
    try {
      a.config = load_config(dir / "config.txt");
    } catch (const Error& e) {
      throw Error(bad, std::string("config.txt: ") + e.what());
    }
    a.clusters = load_parameter_clustering(dir / "parameter_clusters.txt");
    if (a.clusters.k != k) throw Error(bad, where + ": K disagrees with parameter_clusters.txt");
    for (std::size_t c = 0; c < k; ++c) a.local.push_back(load_bundle(dir, std::to_string(c)));
    a.global1 = load_bundle(dir, "global1");
    a.global2 = load_bundle(dir, "global2");
    for (const RomBundle* b : {&a.global1, &a.global2}) {
      if (b->basis.dim() != a.dim) throw Error(bad, "basis_" + b->tag + " has the wrong dimension");
    }
    for (const auto& b : a.local)
      if (b.basis.dim() != a.dim) throw Error(bad, "basis_" + b.tag + " has the wrong dimension");
    if (a.observable_index >= a.dim) throw Error(bad, where + ": observable index out of range");
    return a;
  });
}

struct DiagramRow {
  double theta = 0.0;
  double observable = 0.0;
  std::size_t basis_used = 0;
  bool converged = false;
  bool extrapolation = false;
  std::size_t iterations = 0;
};

struct BifurcationDiagram {
  std::vector<DiagramRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "theta,observable,basis_used,converged,extrapolation\n";
    for (const auto& r : rows)
      os << text::format(r.theta) << ',' << text::format(r.observable) << ',' << r.basis_used << ','
         << (r.converged ? 1 : 0) << ',' << (r.extrapolation ? 1 : 0) << '\n';
    return os.str();
  }
};

/// Online stage: assign, solve the reduced model, evaluate the observable.
/// Touches only reduced quantities and one basis row per query.
inline BifurcationDiagram run_online(const Artifacts& art, std::span<const double> thetas, AssignmentCriterion crit,
                                     const RomSolveOptions& opt) {
  return run_stage("online", [&] {
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      if (!std::isfinite(thetas[i])) throw Error(ErrorKind::invalid_input, "non-finite parameter in sweep");
      if (i > 0 && !(thetas[i] > thetas[i - 1]))
        throw Error(ErrorKind::invalid_input, "sweep parameters must be strictly increasing");
    }
    BifurcationDiagram d;
    d.rows.resize(thetas.size());
    parallel_for(thetas.size(), [&](std::size_t i) {
      const auto a = assign(thetas[i], art.clusters, crit);
      const RomBundle& b = art.local[a.cluster];
      const auto rep = solve_rom(b.rom, thetas[i], b.initial_guess(thetas[i]), opt);
      d.rows[i] = {thetas[i], b.observable(rep.coeffs, art.observable_index), a.cluster, rep.converged,
                   a.extrapolation, rep.iterations};
    });
    return d;
  });
}

inline BifurcationDiagram run_online(const Artifacts& art, std::span<const double> thetas, AssignmentCriterion crit) {
  return run_online(art, thetas, crit, art.config.rom);
}

struct ErrorCell {
  ErrorValue error;
  bool converged = false;
  std::size_t iterations = 0;
};

struct ErrorRow {
  double theta = 0.0;
  std::size_t cluster = 0;
  bool fom_converged = false;
  ErrorCell local, global1, global2;
};

struct ErrorAggregate {
  double mean = 0.0;
  double max = 0.0;
  std::size_t count = 0;  // rows contributing (full-order converged, relative error defined)
};

struct ErrorReport {
  std::vector<ErrorRow> rows;
  ErrorAggregate local, global1, global2;
  std::vector<std::string> notes;

  static ErrorAggregate aggregate(const std::vector<ErrorRow>& rows, ErrorCell ErrorRow::*cell) {
    ErrorAggregate a;
    for (const auto& r : rows) {
      const auto& c = r.*cell;
      if (!r.fom_converged || c.error.kind != ErrorValue::Kind::relative) continue;
      a.mean += c.error.value;
      a.max = std::max(a.max, c.error.value);
      ++a.count;
    }
    if (a.count > 0) a.mean /= static_cast<double>(a.count);
    return a;
  }

  void recompute_aggregates() {
    local = aggregate(rows, &ErrorRow::local);
    global1 = aggregate(rows, &ErrorRow::global1);
    global2 = aggregate(rows, &ErrorRow::global2);
  }

  std::string to_csv() const {
    std::ostringstream os;
    os << "theta,cluster,fom_converged,local_error,local_kind,local_converged,global1_error,global1_kind,"
          "global1_converged,global2_error,global2_kind,global2_converged\n";
    auto cell = [&](const ErrorCell& c) {
      os << ',' << text::format(c.error.value) << ','
         << (c.error.kind == ErrorValue::Kind::relative ? "relative" : "absolute") << ',' << (c.converged ? 1 : 0);
    };
    for (const auto& r : rows) {
      os << text::format(r.theta) << ',' << r.cluster << ',' << (r.fom_converged ? 1 : 0);
      cell(r.local);
      cell(r.global1);
      cell(r.global2);
      os << '\n';
    }
    auto agg = [&](const char* name, double ErrorAggregate::*field) {
      os << name << ",,";
      for (const ErrorAggregate* a : {&local, &global1, &global2}) os << ',' << text::format(a->*field) << ",relative,";
      os << '\n';
    };
    agg("mean", &ErrorAggregate::mean);
    agg("max", &ErrorAggregate::max);
    return os.str();
  }
};

/// Ten evenly spaced parameters at the midpoints of a uniform grid over the
/// sampled range, nudged off any training sample they coincide with.
inline std::vector<double> default_held_out(const std::vector<double>& training, std::size_t count = 10) {
  if (training.size() < 2) throw Error(ErrorKind::invalid_input, "need at least two training samples");
  const double lo = training.front(), hi = training.back();
  const double step = (hi - lo) / static_cast<double>(count);
  const double tol = 1e-9 * std::max(1.0, hi - lo);
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) {
    double t = lo + (static_cast<double>(i) + 0.5) * step;
    for (double s : training)
      if (std::abs(s - t) <= tol) t += 0.25 * step;
    out.push_back(t);
  }
  return out;
}

/// Local vs Global-1 vs Global-2 accuracy against full-order solves.
inline ErrorReport run_errors(const Artifacts& art, std::span<const double> held_out) {
  if (held_out.empty()) throw StageError("errors", Error(ErrorKind::empty_report, "no held-out parameters"));
  const auto model = run_stage("errors", [&] { return build_model(art.config); });
  const SnapshotSet snaps = run_stage("errors", [&] { return load_snapshots(art.directory); });
  return run_stage("errors", [&] {
    const double tol = 1e-12 * std::max(1.0, snaps.parameters.points.back() - snaps.parameters.points.front());
    for (double t : held_out) {
      model.require_in_domain(t);
      for (double s : snaps.parameters.points)
        if (std::abs(s - t) <= tol)
          throw Error(ErrorKind::duplicate_point, "held-out parameter " + text::format(t) + " is a training sample");
    }
    ErrorReport rep;
    rep.rows.resize(held_out.size());
    const auto& opt = art.config.rom;
    parallel_for(held_out.size(), [&](std::size_t i) {
      const double theta = held_out[i];
      ErrorRow row;
      row.theta = theta;
      const std::string branch = model.branch_at(theta).branch_id;
      std::optional<std::size_t> warm;
      for (std::size_t s = 0; s < snaps.count(); ++s)
        if (snaps.branch_ids[s] == branch &&
            (!warm || std::abs(snaps.parameters.points[s] - theta) < std::abs(snaps.parameters.points[*warm] - theta)))
          warm = s;
      fom::SteadySolveReport full;
      try {
        full = solve_on_branch(model, theta, branch, warm ? snaps.matrix.col(*warm) : std::span<const double>{},
                               art.config.steady_tol, art.config.steady_max_iter);
      } catch (const Error&) {
        full.converged = false;
      }
      row.fom_converged = full.converged;

      const auto a = assign(theta, art.clusters, art.config.criterion);
      row.cluster = a.cluster;
      auto evaluate = [&](const RomBundle& b) {
        ErrorCell c;
        const auto r = solve_rom(b.rom, theta, b.initial_guess(theta), opt);
        c.converged = r.converged;
        c.iterations = r.iterations;
        if (full.converged) c.error = relative_error(full.solution, lift(b.basis, r.coeffs));
        else c.error.value = std::numeric_limits<double>::quiet_NaN();
        return c;
      };
      row.local = evaluate(art.local[a.cluster]);
      row.global1 = evaluate(art.global1);
      row.global2 = evaluate(art.global2);
      rep.rows[i] = row;
    });
    for (const auto& r : rep.rows)
      if (!r.fom_converged)
        rep.notes.push_back("full-order solve did not converge at theta = " + text::format(r.theta) +
                            "; row excluded from aggregates");
    for (const auto& r : rep.rows)
      if (r.fom_converged && r.local.error.kind == ErrorValue::Kind::absolute)
        rep.notes.push_back("zero full-order state at theta = " + text::format(r.theta) +
                            "; absolute errors reported, row excluded from aggregates");
    rep.recompute_aggregates();
    return rep;
  });
}

inline ElbowScan run_elbow(const Artifacts& art, std::size_t k_max, double alpha) {
  const SnapshotSet snaps = run_stage("elbow", [&] { return load_snapshots(art.directory); });
  return run_stage("elbow", [&] {
    return elbow_select(snaps, {k_max, alpha, art.config.restarts, art.config.kmeans_max_iter, art.config.seed});
  });
}

}  // namespace locrom::pipeline
