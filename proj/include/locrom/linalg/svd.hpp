#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "locrom/linalg/dense_matrix.hpp"

namespace locrom {

/// Thin SVD A = left * diag(singular_values) * right^T with r = min(rows, cols).
struct ThinSvd {
  /// Singular values below this fraction of the largest are reported as
  /// computed but count as zero for rank decisions.
  static constexpr double rank_tolerance = 1e-12;

  DenseMatrix left;       // rows x r
  Vector singular_values;  // non-increasing
  DenseMatrix right;      // cols x r

  std::size_t numerical_rank() const {
    if (singular_values.empty() || singular_values.front() == 0.0) return 0;
    const double cut = rank_tolerance * singular_values.front();
    return static_cast<std::size_t>(std::count_if(singular_values.begin(), singular_values.end(),
                                                  [cut](double s) { return s > cut; }));
  }

  bool is_numerically_zero(std::size_t index) const { return index >= numerical_rank(); }
};

namespace detail {

// Two passes of modified Gram-Schmidt over the columns in order. Columns
// whose direction is lost (near-zero after projection) are replaced by the
// first canonical vector that is still independent.
inline void reorthonormalize(DenseMatrix& q) {
  const std::size_t m = q.rows();
  const std::size_t r = q.cols();
  std::size_t next_canonical = 0;
  for (std::size_t j = 0; j < r; ++j) {
    auto cj = q.col(j);
    const double original = norm2(cj);
    bool usable = original > 0.0 && std::isfinite(original);
    if (usable) {
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < j; ++i) axpy(-dot(q.col(i), cj), q.col(i), cj);
      usable = norm2(cj) > 1e-8 * original;
    }
    while (!usable) {
      if (next_canonical >= m) throw Error(ErrorKind::numerical_failure, "cannot complete orthonormal basis");
      std::fill(cj.begin(), cj.end(), 0.0);
      cj[next_canonical++] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < j; ++i) axpy(-dot(q.col(i), cj), q.col(i), cj);
      usable = norm2(cj) > 1e-3;
    }
    const double nrm = norm2(cj);
    for (double& x : cj) x /= nrm;
  }
}

// One-sided (Hestenes) Jacobi on a matrix with rows >= cols.
inline ThinSvd one_sided_jacobi(const DenseMatrix& a, int max_sweeps) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  DenseMatrix w = a;
  DenseMatrix v = DenseMatrix::identity(n);
  const double eps = std::max(1e-15, static_cast<double>(m) * 2.220446049250313e-16);
  const double frob2 = std::pow(frobenius_norm(a), 2);
  // Columns this small carry singular values at roundoff level; rotating them
  // against each other only chases noise.
  const double negligible = eps * eps * frob2;

  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        auto wp = w.col(p);
        auto wq = w.col(q);
        const double alpha = dot(wp, wp);
        const double beta = dot(wq, wq);
        const double gamma = dot(wp, wq);
        if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
        if (std::min(alpha, beta) <= negligible) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t k = 0; k < m; ++k) {
          const double xp = wp[k], xq = wq[k];
          wp[k] = c * xp - s * xq;
          wq[k] = s * xp + c * xq;
        }
        auto vp = v.col(p);
        auto vq = v.col(q);
        for (std::size_t k = 0; k < n; ++k) {
          const double xp = vp[k], xq = vq[k];
          vp[k] = c * xp - s * xq;
          vq[k] = s * xp + c * xq;
        }
      }
    }
    converged = !rotated;
  }
  if (!converged)
    throw Error(ErrorKind::numerical_failure,
                "one-sided Jacobi SVD did not converge in " + std::to_string(max_sweeps) + " sweeps");

  Vector sigma(n);
  for (std::size_t j = 0; j < n; ++j) sigma[j] = norm2(w.col(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

  ThinSvd out{DenseMatrix(m, n), Vector(n), DenseMatrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.singular_values[j] = sigma[src];
    auto uj = out.left.col(j);
    if (sigma[src] > 0.0) {
      auto wj = w.col(src);
      for (std::size_t k = 0; k < m; ++k) uj[k] = wj[k] / sigma[src];
    }
    std::copy_n(v.col(src).begin(), n, out.right.col(j).begin());
  }
  reorthonormalize(out.left);
  return out;
}

}  // namespace detail

/// Thin SVD by one-sided Jacobi rotations applied on the narrow side.
inline ThinSvd thin_svd(const DenseMatrix& a, int max_sweeps = 80) {
  if (a.rows() == 0 || a.cols() == 0) throw Error(ErrorKind::invalid_input, "thin_svd of an empty matrix");
  if (!a.all_finite()) throw Error(ErrorKind::invalid_input, "thin_svd input has non-finite entries");
  if (a.rows() >= a.cols()) return detail::one_sided_jacobi(a, max_sweeps);
  ThinSvd t = detail::one_sided_jacobi(transpose(a), max_sweeps);
  return {std::move(t.right), std::move(t.singular_values), std::move(t.left)};
}

/// left * diag(sigma) * right^T, optionally truncated to the leading `rank` terms.
inline DenseMatrix reconstruct(const ThinSvd& svd, std::size_t rank = static_cast<std::size_t>(-1)) {
  const std::size_t r = std::min(rank, svd.singular_values.size());
  DenseMatrix out(svd.left.rows(), svd.right.rows());
  for (std::size_t l = 0; l < r; ++l) {
    const double s = svd.singular_values[l];
    for (std::size_t c = 0; c < out.cols(); ++c) {
      const double f = s * svd.right(c, l);
      if (f != 0.0) axpy(f, svd.left.col(l), out.col(c));
    }
  }
  return out;
}

}  // namespace locrom
