#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "locrom/core/parallel.hpp"
#include "locrom/core/text.hpp"
#include "locrom/linalg/dense_matrix.hpp"
#include "locrom/snapshots.hpp"

namespace locrom {

struct KmeansOptions {
  std::size_t k = 2;
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  std::uint64_t seed = 20220401;
};

/// Partition of the data columns into k nonempty clusters.
struct ClusterModel {
  std::size_t k = 0;
  std::vector<std::size_t> assignment;  // one cluster index per column
  DenseMatrix means;                    // N x k
  double variance = 0.0;
  std::uint64_t seed = 0;
  std::size_t restarts_used = 0;
  std::vector<double> variance_history;  // after each Lloyd iteration of the winning run

  std::vector<std::size_t> members(std::size_t cluster) const {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < assignment.size(); ++s)
      if (assignment[s] == cluster) out.push_back(s);
    return out;
  }
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

inline DenseMatrix cluster_means(const DenseMatrix& data, std::span<const std::size_t> assignment, std::size_t k) {
  DenseMatrix means(data.rows(), k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t s = 0; s < assignment.size(); ++s) {
    axpy(1.0, data.col(s), means.col(assignment[s]));
    ++counts[assignment[s]];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] > 0)
      for (double& v : means.col(c)) v /= static_cast<double>(counts[c]);
  return means;
}

// Nearest mean for every column; exact ties go to the lowest index.
inline std::vector<std::size_t> nearest_assignment(const DenseMatrix& data, const DenseMatrix& means) {
  std::vector<std::size_t> out(data.cols());
  for (std::size_t s = 0; s < data.cols(); ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means.cols(); ++c) {
      const double d = squared_distance(data.col(s), means.col(c));
      if (d < best) {
        best = d;
        out[s] = c;
      }
    }
  }
  return out;
}

// Every empty cluster takes the point farthest from its current centre,
// drawn from clusters that keep at least one member.
inline void repair_empty_clusters(const DenseMatrix& data, const DenseMatrix& centres,
                                  std::vector<std::size_t>& assignment, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (auto a : assignment) ++counts[a];
  for (std::size_t empty = 0; empty < k; ++empty) {
    if (counts[empty] > 0) continue;
    std::size_t pick = assignment.size();
    double far = -1.0;
    for (std::size_t s = 0; s < assignment.size(); ++s) {
      if (counts[assignment[s]] < 2) continue;
      const double d = squared_distance(data.col(s), centres.col(assignment[s]));
      if (d > far) {
        far = d;
        pick = s;
      }
    }
    if (pick == assignment.size()) throw Error(ErrorKind::invalid_k, "more clusters than points");
    --counts[assignment[pick]];
    assignment[pick] = empty;
    ++counts[empty];
  }
}

inline std::mt19937_64 restart_rng(std::uint64_t seed, std::size_t k, std::size_t restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(restart)};
  return std::mt19937_64(seq);
}

// k-means++ seeding: first centre uniform, then proportional to the squared
// distance to the nearest chosen centre.
inline DenseMatrix kmeanspp_centres(const DenseMatrix& data, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = data.cols();
  DenseMatrix centres(data.rows(), k);
  std::uniform_int_distribution<std::size_t> pick_any(0, n - 1);
  std::size_t first = pick_any(rng);
  std::copy_n(data.col(first).begin(), data.rows(), centres.col(0).begin());
  std::vector<double> d2(n);
  for (std::size_t s = 0; s < n; ++s) d2[s] = squared_distance(data.col(s), centres.col(0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (std::size_t s = 0; s < n; ++s) {
        acc += d2[s];
        if (acc > target && d2[s] > 0.0) {
          chosen = s;
          break;
        }
      }
    } else {
      chosen = pick_any(rng);
    }
    std::copy_n(data.col(chosen).begin(), data.rows(), centres.col(c).begin());
    for (std::size_t s = 0; s < n; ++s) d2[s] = std::min(d2[s], squared_distance(data.col(s), centres.col(c)));
  }
  return centres;
}

}  // namespace detail

/// Sum over clusters of squared Euclidean distances to the cluster mean.
inline double variance(const DenseMatrix& data, std::span<const std::size_t> assignment, const DenseMatrix& means) {
  if (assignment.size() != data.cols() || means.rows() != data.rows())
    throw Error(ErrorKind::invalid_assignment, "assignment/means shapes do not match the data");
  double v = 0.0;
  for (std::size_t s = 0; s < assignment.size(); ++s) {
    if (assignment[s] >= means.cols())
      throw Error(ErrorKind::invalid_assignment, "cluster index " + std::to_string(assignment[s]) + " out of range");
    v += detail::squared_distance(data.col(s), means.col(assignment[s]));
  }
  return v;
}

/// Builds a ClusterModel for a given partition (means and variance recomputed).
inline ClusterModel cluster_model_from_assignment(const DenseMatrix& data, std::vector<std::size_t> assignment,
                                                  std::size_t k) {
  if (assignment.size() != data.cols()) throw Error(ErrorKind::invalid_assignment, "assignment length != S");
  std::vector<std::size_t> counts(k, 0);
  for (auto a : assignment) {
    if (a >= k) throw Error(ErrorKind::invalid_assignment, "cluster index out of range");
    ++counts[a];
  }
  for (std::size_t c = 0; c < k; ++c)
    if (counts[c] == 0) throw Error(ErrorKind::invalid_assignment, "cluster " + std::to_string(c) + " is empty");
  ClusterModel m;
  m.k = k;
  m.means = detail::cluster_means(data, assignment, k);
  m.variance = variance(data, assignment, m.means);
  m.assignment = std::move(assignment);
  return m;
}

/// Lloyd iterations from the given centres until the assignment repeats or
/// max_iter is reached.
inline ClusterModel lloyd(const DenseMatrix& data, DenseMatrix centres, std::size_t max_iter) {
  const std::size_t k = centres.cols();
  ClusterModel m;
  m.k = k;
  m.assignment = detail::nearest_assignment(data, centres);
  detail::repair_empty_clusters(data, centres, m.assignment, k);
  m.means = detail::cluster_means(data, m.assignment, k);
  m.variance_history.push_back(variance(data, m.assignment, m.means));
  for (std::size_t it = 1; it < max_iter; ++it) {
    auto next = detail::nearest_assignment(data, m.means);
    detail::repair_empty_clusters(data, m.means, next, k);
    if (next == m.assignment) break;
    m.assignment = std::move(next);
    m.means = detail::cluster_means(data, m.assignment, k);
    m.variance_history.push_back(variance(data, m.assignment, m.means));
  }
  m.variance = m.variance_history.back();
  return m;
}

/// Best-of-restarts k-means with k-means++ seeding. Restart r draws from an
/// RNG stream derived from (seed, k, r), so the result does not depend on how
/// restarts are scheduled.
inline ClusterModel kmeans(const DenseMatrix& data, const KmeansOptions& opt) {
  const std::size_t n = data.cols();
  if (opt.k < 2) throw Error(ErrorKind::invalid_k, "k must be at least 2 (k = 1 is the unclustered set)");
  if (opt.k > n)
    throw Error(ErrorKind::invalid_k, "k = " + std::to_string(opt.k) + " exceeds the " + std::to_string(n) + " snapshots");
  if (!data.all_finite()) throw Error(ErrorKind::invalid_input, "clustering input has non-finite entries");
  const std::size_t restarts = std::max<std::size_t>(1, opt.restarts);
  const std::size_t max_iter = std::max<std::size_t>(1, opt.max_iter);

  std::vector<ClusterModel> runs(restarts);
  parallel_for(restarts, [&](std::size_t r) {
    auto rng = detail::restart_rng(opt.seed, opt.k, r);
    runs[r] = lloyd(data, detail::kmeanspp_centres(data, opt.k, rng), max_iter);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r)
    if (runs[r].variance < runs[best].variance) best = r;
  ClusterModel out = std::move(runs[best]);
  out.seed = opt.seed;
  out.restarts_used = restarts;
  return out;
}

inline ClusterModel kmeans(const SnapshotSet& snapshots, const KmeansOptions& opt) {
  return kmeans(snapshots.matrix, opt);
}

struct ElbowOptions {
  std::size_t k_max = 10;
  double alpha = 0.05;
  std::size_t restarts = 10;
  std::size_t max_iter = 300;
  std::uint64_t seed = 20220401;
};

struct ElbowScan {
  std::vector<std::size_t> k_values;  // 2..k_max
  std::vector<double> variances;
  std::size_t chosen_k = 0;
  double alpha = 0.0;
  bool no_elbow = false;  // no K met the threshold; chosen_k = k_max
  std::vector<ClusterModel> models;

  double variance_at(std::size_t k) const { return variances.at(k - 2); }
  const ClusterModel& model_at(std::size_t k) const { return models.at(k - 2); }
};

/// Variance scan over k = 2..k_max. K is the smallest K >= 3 whose drop
/// V(K-1) - V(K) is at most alpha * (V(2) - V(3)).
///
/// For k > 2 the restarts compete with one extra run warm-started from the
/// (k-1)-means plus the point farthest from its centre, which keeps the
/// scanned variance non-increasing in k.
inline ElbowScan elbow_select(const DenseMatrix& data, const ElbowOptions& opt) {
  if (opt.k_max < 3) throw Error(ErrorKind::invalid_k, "elbow scan needs k_max >= 3");
  if (opt.k_max > data.cols()) throw Error(ErrorKind::invalid_k, "k_max exceeds the number of snapshots");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw Error(ErrorKind::invalid_input, "alpha must lie in (0, 1)");

  ElbowScan scan;
  scan.alpha = opt.alpha;
  for (std::size_t k = 2; k <= opt.k_max; ++k) {
    ClusterModel m = kmeans(data, {k, opt.restarts, opt.max_iter, opt.seed});
    if (k > 2) {
      const ClusterModel& prev = scan.models.back();
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t s = 0; s < data.cols(); ++s) {
        const double d = detail::squared_distance(data.col(s), prev.means.col(prev.assignment[s]));
        if (d > far_d) {
          far_d = d;
          far = s;
        }
      }
      DenseMatrix centres(data.rows(), k);
      for (std::size_t c = 0; c + 1 < k; ++c) std::copy_n(prev.means.col(c).begin(), data.rows(), centres.col(c).begin());
      std::copy_n(data.col(far).begin(), data.rows(), centres.col(k - 1).begin());
      ClusterModel warm = lloyd(data, std::move(centres), opt.max_iter);
      if (warm.variance < m.variance) {
        warm.seed = m.seed;
        warm.restarts_used = m.restarts_used;
        m = std::move(warm);
      }
    }
    scan.k_values.push_back(k);
    scan.variances.push_back(m.variance);
    scan.models.push_back(std::move(m));
  }

  const double v2 = scan.variance_at(2);
  const double first_drop = v2 - scan.variance_at(3);
  if (!(first_drop > 1e-12 * v2) || v2 == 0.0)
    throw Error(ErrorKind::elbow_undefined,
                "V(2) and V(3) coincide, so the variance curve has no elbow; choose K manually");
  for (std::size_t k = 3; k <= opt.k_max; ++k) {
    if (scan.variance_at(k - 1) - scan.variance_at(k) <= opt.alpha * first_drop) {
      scan.chosen_k = k;
      return scan;
    }
  }
  scan.chosen_k = opt.k_max;
  scan.no_elbow = true;
  return scan;
}

inline ElbowScan elbow_select(const SnapshotSet& snapshots, const ElbowOptions& opt) {
  return elbow_select(snapshots.matrix, opt);
}

inline void write_elbow_csv(const std::filesystem::path& path, const ElbowScan& scan) {
  std::ostringstream os;
  os << "k,variance,chosen\n";
  for (std::size_t i = 0; i < scan.k_values.size(); ++i)
    os << scan.k_values[i] << ',' << text::format(scan.variances[i]) << ','
       << (scan.k_values[i] == scan.chosen_k ? 1 : 0) << '\n';
  text::write_text(path, os.str());
}

}  // namespace locrom
