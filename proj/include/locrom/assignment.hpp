#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "locrom/clustering.hpp"
#include "locrom/core/text.hpp"
#include "locrom/sampling.hpp"

namespace locrom {

enum class AssignmentCriterion { parameter_mean, midrange_radius };

inline std::string to_string(AssignmentCriterion c) {
  return c == AssignmentCriterion::parameter_mean ? "mean" : "midrange";
}

inline AssignmentCriterion parse_criterion(const std::string& s) {
  if (s == "mean") return AssignmentCriterion::parameter_mean;
  if (s == "midrange") return AssignmentCriterion::midrange_radius;
  throw Error(ErrorKind::invalid_input, "unknown criterion '" + s + "' (expected mean or midrange)");
}

/// Parameter samples grouped by the cluster of their snapshots.
struct ParameterClustering {
  std::size_t k = 0;
  std::vector<std::vector<double>> cluster_params;
  std::vector<double> means;
  std::vector<double> midranges;
  std::vector<double> radii;
  double hull_lo = 0.0;
  double hull_hi = 0.0;
};

inline ParameterClustering induce_parameter_clusters(std::span<const double> points,
                                                     std::span<const std::size_t> assignment, std::size_t k) {
  if (points.size() != assignment.size())
    throw Error(ErrorKind::invalid_assignment, "parameter count does not match the assignment length");
  if (points.empty()) throw Error(ErrorKind::invalid_input, "no parameter samples");
  ParameterClustering pc;
  pc.k = k;
  pc.cluster_params.resize(k);
  for (std::size_t s = 0; s < points.size(); ++s) {
    if (assignment[s] >= k) throw Error(ErrorKind::invalid_assignment, "cluster index out of range");
    pc.cluster_params[assignment[s]].push_back(points[s]);
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto& p = pc.cluster_params[c];
    if (p.empty()) throw Error(ErrorKind::invalid_assignment, "cluster " + std::to_string(c) + " has no parameters");
    std::sort(p.begin(), p.end());
    pc.means.push_back(std::accumulate(p.begin(), p.end(), 0.0) / static_cast<double>(p.size()));
    const double mid = 0.5 * (p.front() + p.back());
    pc.midranges.push_back(mid);
    pc.radii.push_back(mid - p.front());
  }
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end());
  pc.hull_lo = *lo;
  pc.hull_hi = *hi;
  return pc;
}

inline ParameterClustering induce_parameter_clusters(const ParameterSet& params, const ClusterModel& clusters) {
  return induce_parameter_clusters(params.points, clusters.assignment, clusters.k);
}

/// Score of cluster k for theta; the assigned cluster minimises it. The
/// midrange score is negative inside the cluster's parameter range.
inline double assignment_score(const ParameterClustering& pc, std::size_t k, double theta, AssignmentCriterion crit) {
  if (crit == AssignmentCriterion::parameter_mean) return std::abs(theta - pc.means[k]);
  return std::abs(theta - pc.midranges[k]) - pc.radii[k];
}

struct AssignmentResult {
  std::size_t cluster = 0;
  bool extrapolation = false;  // theta was outside the sampled hull and got clamped
};

inline AssignmentResult assign(double theta, const ParameterClustering& pc, AssignmentCriterion crit) {
  if (!std::isfinite(theta)) throw Error(ErrorKind::invalid_input, "parameter is not finite");
  AssignmentResult r;
  r.extrapolation = theta < pc.hull_lo || theta > pc.hull_hi;
  const double t = std::clamp(theta, pc.hull_lo, pc.hull_hi);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < pc.k; ++c) {
    const double s = assignment_score(pc, c, t, crit);
    if (s < best) {
      best = s;
      r.cluster = c;
    }
  }
  return r;
}

/// Parameters in [lo, hi] where the assigned cluster changes, located by a
/// grid scan and refined by bisection to `tol`.
inline std::vector<double> switch_points(const ParameterClustering& pc, AssignmentCriterion crit, double lo, double hi,
                                         std::size_t grid = 2000, double tol = 1e-6) {
  std::vector<double> out;
  if (!(lo < hi) || grid < 1) return out;
  auto cluster_at = [&](double t) { return assign(t, pc, crit).cluster; };
  double prev_t = lo;
  std::size_t prev_c = cluster_at(lo);
  for (std::size_t i = 1; i <= grid; ++i) {
    const double t = i == grid ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid);
    const std::size_t c = cluster_at(t);
    if (c != prev_c) {
      double a = prev_t, b = t;
      while (b - a > tol) {
        const double m = 0.5 * (a + b);
        (cluster_at(m) == prev_c ? a : b) = m;
      }
      out.push_back(0.5 * (a + b));
    }
    prev_t = t;
    prev_c = c;
  }
  return out;
}

inline std::vector<double> switch_points(const ParameterClustering& pc, AssignmentCriterion crit) {
  return switch_points(pc, crit, pc.hull_lo, pc.hull_hi);
}

/// Vector-valued parameters: per-component midranges, with the radius taken
/// as the largest per-component radius.
struct MultiParameterClustering {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> midranges;
  std::vector<double> radii;
  std::vector<double> hull_lo;
  std::vector<double> hull_hi;
};

inline MultiParameterClustering induce_parameter_clusters(const std::vector<std::vector<double>>& points,
                                                          std::span<const std::size_t> assignment, std::size_t k) {
  if (points.size() != assignment.size() || points.empty())
    throw Error(ErrorKind::invalid_assignment, "parameter count does not match the assignment length");
  MultiParameterClustering pc;
  pc.k = k;
  pc.dim = points.front().size();
  std::vector<std::vector<double>> lo(k, std::vector<double>(pc.dim, std::numeric_limits<double>::infinity()));
  std::vector<std::vector<double>> hi(k, std::vector<double>(pc.dim, -std::numeric_limits<double>::infinity()));
  pc.means.assign(k, std::vector<double>(pc.dim, 0.0));
  std::vector<std::size_t> counts(k, 0);
  pc.hull_lo.assign(pc.dim, std::numeric_limits<double>::infinity());
  pc.hull_hi.assign(pc.dim, -std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < points.size(); ++s) {
    const auto c = assignment[s];
    if (c >= k) throw Error(ErrorKind::invalid_assignment, "cluster index out of range");
    if (points[s].size() != pc.dim) throw Error(ErrorKind::invalid_input, "parameter points differ in dimension");
    ++counts[c];
    for (std::size_t d = 0; d < pc.dim; ++d) {
      const double v = points[s][d];
      pc.means[c][d] += v;
      lo[c][d] = std::min(lo[c][d], v);
      hi[c][d] = std::max(hi[c][d], v);
      pc.hull_lo[d] = std::min(pc.hull_lo[d], v);
      pc.hull_hi[d] = std::max(pc.hull_hi[d], v);
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) throw Error(ErrorKind::invalid_assignment, "cluster " + std::to_string(c) + " has no parameters");
    std::vector<double> mid(pc.dim);
    double radius = 0.0;
    for (std::size_t d = 0; d < pc.dim; ++d) {
      pc.means[c][d] /= static_cast<double>(counts[c]);
      mid[d] = 0.5 * (lo[c][d] + hi[c][d]);
      radius = std::max(radius, mid[d] - lo[c][d]);
    }
    pc.midranges.push_back(std::move(mid));
    pc.radii.push_back(radius);
  }
  return pc;
}

inline AssignmentResult assign(std::span<const double> theta, const MultiParameterClustering& pc,
                               AssignmentCriterion crit) {
  if (theta.size() != pc.dim) throw Error(ErrorKind::invalid_input, "parameter has the wrong dimension");
  AssignmentResult r;
  std::vector<double> t(theta.begin(), theta.end());
  for (std::size_t d = 0; d < pc.dim; ++d) {
    if (t[d] < pc.hull_lo[d] || t[d] > pc.hull_hi[d]) r.extrapolation = true;
    t[d] = std::clamp(t[d], pc.hull_lo[d], pc.hull_hi[d]);
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < pc.k; ++c) {
    const auto& centre = crit == AssignmentCriterion::parameter_mean ? pc.means[c] : pc.midranges[c];
    double d2 = 0.0;
    for (std::size_t d = 0; d < pc.dim; ++d) d2 += (t[d] - centre[d]) * (t[d] - centre[d]);
    const double s = std::sqrt(d2) - (crit == AssignmentCriterion::midrange_radius ? pc.radii[c] : 0.0);
    if (s < best) {
      best = s;
      r.cluster = c;
    }
  }
  return r;
}

// parameter_clusters.txt: K and one `cluster_<k> = θ list` line per cluster.
inline void save_parameter_clustering(const std::filesystem::path& path, const ParameterClustering& pc) {
  std::ostringstream os;
  os << "format = 1\nK = " << pc.k << '\n';
  for (std::size_t c = 0; c < pc.k; ++c) {
    os << "cluster_" << c << " = " << text::join(pc.cluster_params[c]) << '\n';
    os << "mean_" << c << " = " << text::format(pc.means[c]) << '\n';
    os << "midrange_" << c << " = " << text::format(pc.midranges[c]) << '\n';
    os << "radius_" << c << " = " << text::format(pc.radii[c]) << '\n';
  }
  text::write_text(path, os.str());
}

inline ParameterClustering load_parameter_clustering(const std::filesystem::path& path) {
  constexpr auto bad = ErrorKind::corrupt_store;
  const auto kv = text::read_key_values(path, bad);
  const std::string where = path.string();
  const std::size_t k = text::to_count(text::require(kv, "K", bad, where), bad, "K");
  std::vector<double> points;
  std::vector<std::size_t> assignment;
  for (std::size_t c = 0; c < k; ++c) {
    for (double p : text::to_doubles(text::require(kv, "cluster_" + std::to_string(c), bad, where), bad, "cluster")) {
      points.push_back(p);
      assignment.push_back(c);
    }
  }
  try {
    return induce_parameter_clusters(points, assignment, k);
  } catch (const Error& e) {
    throw Error(bad, where + ": " + e.what());
  }
}

}  // namespace locrom
