#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "locrom/core/error.hpp"

namespace locrom {

enum class SamplingKind { uniform, packed, explicit_list };

/// How the training parameters are chosen. Packed plans place
/// round(pack_fraction * count) points symmetrically inside
/// [c - w, c + w] around each centre c, with w = pack_half_width * range,
/// and spread the remaining points uniformly over the range.
struct SamplingPlan {
  SamplingKind kind = SamplingKind::uniform;
  double theta_min = 0.0;
  double theta_max = 1.0;
  std::size_t count = 2;
  std::vector<double> pack_centers;
  double pack_fraction = 0.4;
  double pack_half_width = 0.02;
  std::vector<double> explicit_points;
};

/// Sorted, strictly increasing parameter samples.
struct ParameterSet {
  std::vector<double> points;
  SamplingPlan provenance;

  std::size_t size() const { return points.size(); }
};

namespace detail {

inline std::string format_list(const std::vector<double>& values) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? ", " : "") << values[i];
  return os.str();
}

inline double duplicate_tolerance(const SamplingPlan& plan) {
  return 1e-12 * std::max(1.0, std::abs(plan.theta_max - plan.theta_min));
}

}  // namespace detail

inline std::vector<double> uniform_points(double lo, double hi, std::size_t count) {
  std::vector<double> pts(count);
  if (count == 1) {
    pts[0] = 0.5 * (lo + hi);
    return pts;
  }
  for (std::size_t i = 0; i < count; ++i)
    pts[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  pts.back() = hi;
  return pts;
}

inline ParameterSet generate_samples(const SamplingPlan& plan) {
  if (!(plan.theta_min < plan.theta_max)) throw Error(ErrorKind::invalid_input, "sampling range is empty");
  const double tol = detail::duplicate_tolerance(plan);
  ParameterSet out{{}, plan};

  if (plan.kind == SamplingKind::explicit_list) {
    std::vector<double> pts = plan.explicit_points;
    if (pts.size() < 2) throw Error(ErrorKind::invalid_input, "explicit sampling needs at least 2 points");
    std::vector<double> outside;
    for (double p : pts)
      if (!(p >= plan.theta_min && p <= plan.theta_max)) outside.push_back(p);
    if (!outside.empty())
      throw Error(ErrorKind::out_of_domain, "explicit points outside range: " + detail::format_list(outside));
    std::sort(pts.begin(), pts.end());
    for (std::size_t i = 1; i < pts.size(); ++i)
      if (pts[i] - pts[i - 1] <= tol)
        throw Error(ErrorKind::duplicate_point, "explicit point listed twice: " + detail::format_list({pts[i]}));
    out.points = std::move(pts);
    return out;
  }

  if (plan.count < 2) throw Error(ErrorKind::invalid_input, "sampling needs count >= 2");
  if (plan.kind == SamplingKind::uniform) {
    out.points = uniform_points(plan.theta_min, plan.theta_max, plan.count);
    return out;
  }

  if (plan.pack_centers.empty()) throw Error(ErrorKind::invalid_input, "packed sampling needs pack centers");
  if (!(plan.pack_fraction > 0.0 && plan.pack_fraction < 1.0))
    throw Error(ErrorKind::invalid_input, "pack_fraction must lie in (0, 1)");
  if (!(plan.pack_half_width > 0.0 && plan.pack_half_width < 0.5))
    throw Error(ErrorKind::invalid_input, "pack_half_width must lie in (0, 0.5)");
  std::vector<double> outside;
  for (double c : plan.pack_centers)
    if (!(c >= plan.theta_min && c <= plan.theta_max)) outside.push_back(c);
  if (!outside.empty())
    throw Error(ErrorKind::out_of_domain, "pack centers outside range: " + detail::format_list(outside));

  const auto packed = static_cast<std::size_t>(std::lround(plan.pack_fraction * static_cast<double>(plan.count)));
  const std::size_t uniform = plan.count - packed;
  std::vector<double> pts = uniform_points(plan.theta_min, plan.theta_max, uniform);
  const std::size_t centers = plan.pack_centers.size();
  const double half = plan.pack_half_width * (plan.theta_max - plan.theta_min);
  for (std::size_t c = 0; c < centers; ++c) {
    const std::size_t m = packed / centers + (c < packed % centers ? 1 : 0);
    const double lo = plan.pack_centers[c] - half;
    for (std::size_t j = 0; j < m; ++j) {
      const double p = lo + (static_cast<double>(j) + 0.5) * (2.0 * half / static_cast<double>(m));
      pts.push_back(std::clamp(p, plan.theta_min, plan.theta_max));
    }
  }
  std::sort(pts.begin(), pts.end());
  std::vector<double> dedup;
  for (double p : pts)
    if (dedup.empty() || p - dedup.back() > tol) dedup.push_back(p);
  out.points = std::move(dedup);
  return out;
}

/// One value per line; blank lines and lines starting with '#' are skipped.
inline std::vector<double> load_points_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::invalid_input, "cannot open points file " + path.string());
  std::vector<double> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      std::size_t used = 0;
      pts.push_back(std::stod(line.substr(first), &used));
      if (line.find_first_not_of(" \t\r", first + used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw Error(ErrorKind::invalid_input, path.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
  return pts;
}

}  // namespace locrom
