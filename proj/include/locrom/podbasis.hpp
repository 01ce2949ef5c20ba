#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "locrom/clustering.hpp"
#include "locrom/core/parallel.hpp"
#include "locrom/core/text.hpp"
#include "locrom/linalg/matrix_io.hpp"
#include "locrom/linalg/svd.hpp"

namespace locrom {

struct TruncationRule {
  enum class Kind { fixed, energy };
  Kind kind = Kind::energy;
  std::size_t fixed_L = 1;
  double energy_tol = 1e-8;

  static TruncationRule fixed(std::size_t l) { return {Kind::fixed, l, 1e-8}; }
  static TruncationRule energy(double tol) { return {Kind::energy, 1, tol}; }

  void validate() const {
    if (kind == Kind::fixed && fixed_L < 1) throw Error(ErrorKind::invalid_input, "fixed_L must be at least 1");
    if (kind == Kind::energy && !(energy_tol >= 0.0 && energy_tol < 1.0))
      throw Error(ErrorKind::invalid_input, "energy_tol must lie in [0, 1)");
  }

  std::string describe() const {
    return kind == Kind::fixed ? "fixed:" + std::to_string(fixed_L) : "energy:" + text::format(energy_tol);
  }
};

/// Orthonormal POD basis of one snapshot cluster. When `offset` is nonempty
/// the basis spans the cluster snapshots minus that offset (the cluster mean).
struct LocalBasis {
  std::size_t cluster_id = 0;
  DenseMatrix basis;      // N x L
  Vector singular_values;  // full spectrum of the (possibly centred) cluster matrix
  std::size_t L = 0;
  TruncationRule rule;
  Vector offset;

  std::size_t dim() const { return basis.rows(); }
  bool centred() const { return !offset.empty(); }
};

/// Smallest L >= 1 allowed by the rule, never above the numerical rank.
inline std::size_t truncation_size(const ThinSvd& svd, const TruncationRule& rule) {
  const std::size_t rank = std::max<std::size_t>(1, svd.numerical_rank());
  if (rule.kind == TruncationRule::Kind::fixed) return std::clamp<std::size_t>(rule.fixed_L, 1, rank);
  const auto& s = svd.singular_values;
  // Tails summed smallest-first so tiny remainders are not lost to cancellation.
  Vector tail(s.size() + 1, 0.0);
  for (std::size_t j = s.size(); j-- > 0;) tail[j] = tail[j + 1] + s[j] * s[j];
  const double total = tail[0];
  for (std::size_t l = 1; l <= s.size(); ++l)
    if (tail[l] <= rule.energy_tol * total) return std::min(l, rank);
  return rank;
}

namespace detail {

inline void fix_column_signs(DenseMatrix& q) {
  for (std::size_t c = 0; c < q.cols(); ++c) {
    auto col = q.col(c);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < col.size(); ++i)
      if (std::abs(col[i]) > std::abs(col[arg])) arg = i;
    if (col[arg] < 0.0)
      for (double& v : col) v = -v;
  }
}

}  // namespace detail

/// POD of the columns of `snapshots`: the leading left singular vectors.
inline LocalBasis build_pod_basis(const DenseMatrix& snapshots, const TruncationRule& rule, std::size_t cluster_id = 0,
                                  bool centre = false) {
  rule.validate();
  if (snapshots.cols() == 0) throw Error(ErrorKind::invalid_input, "POD of an empty snapshot set");
  const bool all_zero = std::all_of(snapshots.data().begin(), snapshots.data().end(), [](double v) { return v == 0.0; });
  if (all_zero)
    throw Error(ErrorKind::degenerate_cluster,
                "cluster " + std::to_string(cluster_id) + " has only zero snapshots; no basis direction exists");

  LocalBasis out;
  out.cluster_id = cluster_id;
  out.rule = rule;
  DenseMatrix work = snapshots;
  if (centre) {
    Vector mean(snapshots.rows(), 0.0);
    for (std::size_t s = 0; s < snapshots.cols(); ++s) axpy(1.0 / static_cast<double>(snapshots.cols()), snapshots.col(s), mean);
    DenseMatrix centred = snapshots;
    for (std::size_t s = 0; s < centred.cols(); ++s) axpy(-1.0, mean, centred.col(s));
    // A cluster whose snapshots coincide has nothing left after centring; keep it uncentred.
    if (frobenius_norm(centred) > 1e-12 * frobenius_norm(snapshots)) {
      work = std::move(centred);
      out.offset = std::move(mean);
    }
  }
  ThinSvd svd = thin_svd(work);
  out.L = truncation_size(svd, rule);
  out.singular_values = svd.singular_values;
  out.basis = leading_columns(svd.left, out.L);
  detail::fix_column_signs(out.basis);
  return out;
}

/// One basis per cluster, built concurrently.
inline std::vector<LocalBasis> build_local_bases(const DenseMatrix& snapshots, const ClusterModel& clusters,
                                                 const TruncationRule& rule, bool centre = false) {
  if (clusters.assignment.size() != snapshots.cols())
    throw Error(ErrorKind::invalid_assignment, "cluster model does not match the snapshot count");
  std::vector<LocalBasis> out(clusters.k);
  parallel_for(clusters.k, [&](std::size_t k) {
    const auto members = clusters.members(k);
    if (members.empty()) throw Error(ErrorKind::invalid_assignment, "cluster " + std::to_string(k) + " is empty");
    out[k] = build_pod_basis(select_columns(snapshots, members), rule, k, centre);
  });
  return out;
}

inline std::vector<LocalBasis> build_local_bases(const SnapshotSet& set, const ClusterModel& clusters,
                                                 const TruncationRule& rule, bool centre = false) {
  return build_local_bases(set.matrix, clusters, rule, centre);
}

/// Coefficients of the orthogonal projection of u (minus the offset).
inline Vector project_coeffs(const LocalBasis& b, std::span<const double> u) {
  if (u.size() != b.dim())
    throw Error(ErrorKind::invalid_input,
                "vector of length " + std::to_string(u.size()) + " against basis of dimension " + std::to_string(b.dim()));
  if (!b.centred()) return tmatvec(b.basis, u);
  return tmatvec(b.basis, subtract(u, b.offset));
}

inline Vector lift(const LocalBasis& b, std::span<const double> a) {
  if (a.size() != b.L)
    throw Error(ErrorKind::invalid_input,
                "coefficient vector of length " + std::to_string(a.size()) + " for a basis of size " + std::to_string(b.L));
  Vector u = matvec(b.basis, a);
  if (b.centred()) axpy(1.0, b.offset, u);
  return u;
}

/// Sum over columns of |u - lift(project(u))|^2.
inline double projection_error(const LocalBasis& b, const DenseMatrix& snapshots) {
  double e = 0.0;
  for (std::size_t s = 0; s < snapshots.cols(); ++s) {
    const Vector r = subtract(snapshots.col(s), lift(b, project_coeffs(b, snapshots.col(s))));
    const double n = norm2(r);
    e += n * n;
  }
  return e;
}

// Basis store: basis_<tag>.mat, spectrum_<tag>.csv, offset_<tag>.mat (centred only).
inline void save_basis(const std::filesystem::path& dir, const std::string& tag, const LocalBasis& b) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / ("basis_" + tag + ".mat"), b.basis);
  std::ostringstream os;
  os << "index,singular_value,retained\n";
  for (std::size_t i = 0; i < b.singular_values.size(); ++i)
    os << i + 1 << ',' << text::format(b.singular_values[i]) << ',' << (i < b.L ? 1 : 0) << '\n';
  text::write_text(dir / ("spectrum_" + tag + ".csv"), os.str());
  if (b.centred()) write_matrix(dir / ("offset_" + tag + ".mat"), DenseMatrix(b.offset.size(), 1, b.offset));
}

inline LocalBasis load_basis(const std::filesystem::path& dir, const std::string& tag) {
  constexpr auto bad = ErrorKind::corrupt_store;
  LocalBasis b;
  b.basis = read_matrix(dir / ("basis_" + tag + ".mat"));
  b.L = b.basis.cols();
  if (b.L == 0 || !b.basis.all_finite()) throw Error(bad, "basis_" + tag + ".mat is empty or non-finite");
  const auto offset_path = dir / ("offset_" + tag + ".mat");
  if (std::filesystem::exists(offset_path)) {
    const DenseMatrix off = read_matrix(offset_path);
    if (off.rows() != b.basis.rows() || off.cols() != 1) throw Error(bad, "offset_" + tag + ".mat has the wrong shape");
    b.offset = off.column(0);
  }
  std::ifstream in(dir / ("spectrum_" + tag + ".csv"));
  if (!in) throw Error(bad, "missing spectrum_" + tag + ".csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto f = text::split(line, ',');
    if (f.size() != 3) throw Error(bad, "spectrum_" + tag + ".csv: malformed row");
    b.singular_values.push_back(text::to_double(f[1], bad, "singular value"));
  }
  return b;
}

inline void save_local_bases(const std::filesystem::path& dir, const std::vector<LocalBasis>& bases) {
  std::vector<std::size_t> sizes;
  for (std::size_t k = 0; k < bases.size(); ++k) {
    save_basis(dir, std::to_string(k), bases[k]);
    sizes.push_back(bases[k].L);
  }
  std::ostringstream os;
  os << "format = 1\n"
     << "K = " << bases.size() << '\n'
     << "rule = " << (bases.empty() ? std::string("none") : bases.front().rule.describe()) << '\n'
     << "centred = " << (!bases.empty() && bases.front().centred() ? 1 : 0) << '\n'
     << "L = " << text::join(sizes) << '\n';
  text::write_text(dir / "bases_meta.txt", os.str());
}

inline TruncationRule parse_rule(const std::string& s, ErrorKind kind) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw Error(kind, "truncation rule '" + s + "' is not kind:value");
  const std::string k = s.substr(0, colon);
  const std::string v = s.substr(colon + 1);
  if (k == "fixed") return TruncationRule::fixed(text::to_count(v, kind, "fixed_L"));
  if (k == "energy") return TruncationRule::energy(text::to_double(v, kind, "energy_tol"));
  throw Error(kind, "unknown truncation rule '" + k + "'");
}

inline std::vector<LocalBasis> load_local_bases(const std::filesystem::path& dir) {
  constexpr auto bad = ErrorKind::corrupt_store;
  const auto kv = text::read_key_values(dir / "bases_meta.txt", bad);
  const std::string where = (dir / "bases_meta.txt").string();
  const std::size_t k = text::to_count(text::require(kv, "K", bad, where), bad, "K");
  const auto sizes = text::split(text::require(kv, "L", bad, where), ',');
  if (sizes.size() != k) throw Error(bad, where + ": L list does not have K entries");
  const TruncationRule rule = parse_rule(text::require(kv, "rule", bad, where), bad);
  std::vector<LocalBasis> out;
  for (std::size_t c = 0; c < k; ++c) {
    LocalBasis b = load_basis(dir, std::to_string(c));
    if (b.L != text::to_count(sizes[c], bad, "L")) throw Error(bad, where + ": L mismatch for cluster " + std::to_string(c));
    b.cluster_id = c;
    b.rule = rule;
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace locrom
