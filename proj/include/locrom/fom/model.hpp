#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "locrom/fom/operators.hpp"

namespace locrom::fom {

struct ParameterInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double theta) const { return theta >= lo && theta <= hi; }
};

/// A parameter range [theta_lo, theta_hi) on which snapshots follow one
/// solution branch. The last segment of a schedule is closed on the right.
struct BranchSegment {
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  std::string branch_id;
};

/// Initial guess that selects a solution branch at a parameter value.
using SeedFunction = std::function<Vector(double theta, const std::string& branch_id)>;

/// A steady parameterized full-order model: affine operators, a branch
/// protocol (schedule + seeds) and a point-value observable.
class FullOrderModel {
 public:
  FullOrderModel(std::string name, OperatorDecomposition operators, ParameterInterval domain,
                 std::vector<BranchSegment> schedule, SeedFunction seed, std::size_t observable_index)
      : name_(std::move(name)),
        operators_(std::move(operators)),
        domain_(domain),
        schedule_(std::move(schedule)),
        seed_(std::move(seed)),
        observable_index_(observable_index) {
    operators_.validate();
    if (!(domain_.lo < domain_.hi)) throw Error(ErrorKind::invalid_input, "empty parameter domain");
    if (observable_index_ >= operators_.dim) throw Error(ErrorKind::invalid_input, "observable index out of range");
    if (schedule_.empty()) throw Error(ErrorKind::invalid_schedule, "model needs at least one branch segment");
    for (std::size_t s = 0; s < schedule_.size(); ++s) {
      if (!(schedule_[s].theta_lo < schedule_[s].theta_hi))
        throw Error(ErrorKind::invalid_schedule, "segment " + std::to_string(s) + " is empty");
      if (s > 0 && schedule_[s].theta_lo < schedule_[s - 1].theta_hi)
        throw Error(ErrorKind::invalid_schedule, "segments overlap or are out of order");
    }
  }

  const std::string& name() const { return name_; }
  std::size_t dim() const { return operators_.dim; }
  const ParameterInterval& parameter_domain() const { return domain_; }
  const OperatorDecomposition& operators() const { return operators_; }
  const std::vector<BranchSegment>& schedule() const { return schedule_; }
  std::size_t observable_index() const { return observable_index_; }

  Vector residual(std::span<const double> u, double theta) const { return operators_.residual(u, theta); }
  DenseMatrix jacobian(std::span<const double> u, double theta) const { return operators_.jacobian(u, theta); }

  double observable(std::span<const double> u) const {
    if (u.size() != dim()) throw Error(ErrorKind::invalid_input, "observable: state has wrong dimension");
    return u[observable_index_];
  }

  void require_in_domain(double theta) const {
    if (!domain_.contains(theta)) {
      std::ostringstream os;
      os << std::setprecision(17) << "theta " << theta << " outside [" << domain_.lo << ", " << domain_.hi << "]";
      throw Error(ErrorKind::out_of_domain, os.str());
    }
  }

  const BranchSegment& branch_at(double theta) const {
    require_in_domain(theta);
    for (std::size_t s = 0; s < schedule_.size(); ++s) {
      const auto& seg = schedule_[s];
      const bool last = s + 1 == schedule_.size();
      if (theta >= seg.theta_lo && (theta < seg.theta_hi || (last && theta <= seg.theta_hi))) return seg;
    }
    std::ostringstream os;
    os << std::setprecision(17) << "no branch scheduled at theta " << theta;
    throw Error(ErrorKind::out_of_domain, os.str());
  }

  Vector branch_seed(double theta, const std::string& branch_id) const {
    Vector seed = seed_(theta, branch_id);
    if (seed.size() != dim()) throw Error(ErrorKind::invalid_input, "seed has wrong dimension");
    return seed;
  }

  /// Interior segment boundaries, where the selected branch changes.
  std::vector<double> branch_boundaries() const {
    std::vector<double> out;
    for (std::size_t s = 1; s < schedule_.size(); ++s) out.push_back(schedule_[s].theta_lo);
    return out;
  }

  std::string schedule_string() const {
    std::ostringstream os;
    os << std::setprecision(17);
    for (std::size_t s = 0; s < schedule_.size(); ++s)
      os << (s ? "; " : "") << schedule_[s].branch_id << ":" << schedule_[s].theta_lo << ":"
         << schedule_[s].theta_hi;
    return os.str();
  }

 private:
  std::string name_;
  OperatorDecomposition operators_;
  ParameterInterval domain_;
  std::vector<BranchSegment> schedule_;
  SeedFunction seed_;
  std::size_t observable_index_;
};

// Steady Chafee-Infante problem u'' + theta (u - u^3) = 0 on (0, length),
// u = 0 at both ends, centered differences on n interior nodes.
namespace chafee_infante {

inline double spacing(std::size_t n, double length) { return length / static_cast<double>(n + 1); }

/// k-th eigenvalue of the negative discrete Dirichlet Laplacian.
inline double laplacian_eigenvalue(std::size_t n, double length, int k) {
  const double h = spacing(n, length);
  return 2.0 / (h * h) * (1.0 - std::cos(k * std::numbers::pi * h / length));
}

inline OperatorDecomposition operators(std::size_t n, double length) {
  const double h = spacing(n, length);
  const double inv_h2 = 1.0 / (h * h);
  OperatorDecomposition ops;
  ops.dim = n;
  ops.linear_const = DenseMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    ops.linear_const(i, i) = -2.0 * inv_h2;
    if (i > 0) ops.linear_const(i, i - 1) = inv_h2;
    if (i + 1 < n) ops.linear_const(i, i + 1) = inv_h2;
  }
  ops.linear_param = DenseMatrix::identity(n);
  ops.load_const = Vector(n, 0.0);
  ops.load_param = Vector(n, 0.0);
  SparseTensor4 cubic;
  cubic.entries.reserve(n);
  for (std::size_t i = 0; i < n; ++i) cubic.entries.push_back({i, i, i, i, -1.0});
  ops.cubic_param = std::move(cubic);
  return ops;
}

inline std::size_t nearest_node(std::size_t n, double length, double x) {
  const double h = spacing(n, length);
  const long idx = std::lround(x / h) - 1;
  return static_cast<std::size_t>(std::clamp<long>(idx, 0, static_cast<long>(n) - 1));
}

/// sign * a * sin(k pi x / length), where a is the larger of `floor_amplitude`
/// and the single-mode Galerkin amplitude sqrt(4 (theta - lambda_k) / (3 theta)).
inline Vector mode_seed(std::size_t n, double length, int k, double sign, double theta, double floor_amplitude) {
  const double lambda = laplacian_eigenvalue(n, length, k);
  double amplitude = floor_amplitude;
  if (theta > lambda) amplitude = std::max(amplitude, std::sqrt(4.0 * (theta - lambda) / (3.0 * theta)));
  const double h = spacing(n, length);
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = sign * amplitude * std::sin(k * std::numbers::pi * static_cast<double>(i + 1) * h / length);
  return v;
}

}  // namespace chafee_infante

struct PitchforkOptions {
  std::string branch = "lower";  // "lower" or "upper"
  ParameterInterval domain{0.0, 100.0};
  double seed_amplitude = 0.1;
};

/// Chafee-Infante model with a supercritical pitchfork at the first discrete
/// Laplacian eigenvalue. Below it every seed decays to the trivial state;
/// above it the configured branch ("lower": observable < 0) is followed.
inline FullOrderModel make_pitchfork_model(std::size_t n_interior, double domain_length,
                                           const PitchforkOptions& options = {}) {
  if (n_interior < 8) throw Error(ErrorKind::invalid_input, "pitchfork model needs n_interior >= 8");
  if (!(domain_length > 0.0)) throw Error(ErrorKind::invalid_input, "domain length must be positive");
  if (options.branch != "lower" && options.branch != "upper")
    throw Error(ErrorKind::invalid_input, "pitchfork branch must be lower or upper");
  const double critical = chafee_infante::laplacian_eigenvalue(n_interior, domain_length, 1);
  const auto& dom = options.domain;
  std::vector<BranchSegment> schedule;
  if (critical > dom.lo && critical < dom.hi) {
    schedule.push_back({dom.lo, critical, "subcritical"});
    schedule.push_back({critical, dom.hi, options.branch});
  } else if (critical >= dom.hi) {
    schedule.push_back({dom.lo, dom.hi, "subcritical"});
  } else {
    schedule.push_back({dom.lo, dom.hi, options.branch});
  }
  const double branch_sign = options.branch == "lower" ? -1.0 : 1.0;
  const double eps = options.seed_amplitude;
  SeedFunction seed = [=](double theta, const std::string& id) -> Vector {
    if (id == "trivial") return Vector(n_interior, 0.0);
    double sign = branch_sign;
    if (id == "lower") sign = -1.0;
    else if (id == "upper") sign = 1.0;
    else if (id != "subcritical") throw Error(ErrorKind::invalid_input, "unknown pitchfork branch '" + id + "'");
    return chafee_infante::mode_seed(n_interior, domain_length, 1, sign, theta, eps);
  };
  return FullOrderModel("pitchfork", chafee_infante::operators(n_interior, domain_length), dom, std::move(schedule),
                        std::move(seed), chafee_infante::nearest_node(n_interior, domain_length, 0.3 * domain_length));
}

struct ModalInterval {
  double theta_lo;
  double theta_hi;
  int mode;
};

inline std::vector<ModalInterval> default_modal_schedule() { return {{12, 45, 1}, {45, 95, 2}, {95, 120, 3}}; }

/// Chafee-Infante model whose selected steady state switches between
/// k-hump solutions at schedule boundaries, giving a discontinuous snapshot
/// family in theta.
inline FullOrderModel make_modal_model(std::size_t n_interior, const std::vector<ModalInterval>& schedule,
                                       double domain_length = 1.0, double seed_amplitude = 0.1) {
  if (n_interior < 8) throw Error(ErrorKind::invalid_input, "modal model needs n_interior >= 8");
  if (schedule.empty()) throw Error(ErrorKind::invalid_schedule, "empty branch schedule");
  std::vector<BranchSegment> segments;
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const auto& iv = schedule[s];
    if (iv.mode < 1) throw Error(ErrorKind::invalid_schedule, "mode numbers start at 1");
    if (!(iv.theta_lo < iv.theta_hi)) throw Error(ErrorKind::invalid_schedule, "empty interval in schedule");
    if (s > 0 && iv.theta_lo < schedule[s - 1].theta_hi)
      throw Error(ErrorKind::invalid_schedule, "schedule intervals overlap or are out of order");
    const double threshold = std::pow(iv.mode * std::numbers::pi / domain_length, 2);
    if (!(threshold < iv.theta_lo)) {
      std::ostringstream os;
      os << "mode " << iv.mode << " does not exist on [" << iv.theta_lo << ", " << iv.theta_hi
         << "): needs theta > " << threshold;
      throw Error(ErrorKind::invalid_schedule, os.str());
    }
    segments.push_back({iv.theta_lo, iv.theta_hi, "mode" + std::to_string(iv.mode)});
  }
  const ParameterInterval domain{schedule.front().theta_lo, schedule.back().theta_hi};
  SeedFunction seed = [=](double theta, const std::string& id) -> Vector {
    if (id == "trivial") return Vector(n_interior, 0.0);
    if (id.rfind("mode", 0) != 0) throw Error(ErrorKind::invalid_input, "unknown modal branch '" + id + "'");
    const int k = std::stoi(id.substr(4));
    return chafee_infante::mode_seed(n_interior, domain_length, k, 1.0, theta, seed_amplitude);
  };
  return FullOrderModel("modal", chafee_infante::operators(n_interior, domain_length), domain, std::move(segments),
                        std::move(seed), chafee_infante::nearest_node(n_interior, domain_length, 0.7 * domain_length));
}

}  // namespace locrom::fom
