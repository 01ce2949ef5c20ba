#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "locrom/linalg/dense_matrix.hpp"

namespace locrom {

/// LU factorization with partial pivoting, P A = L U. A pivot smaller than
/// 1e-14 * ||A||_F is treated as singular.
class LuFactorization {
 public:
  static constexpr double pivot_tolerance = 1e-14;

  explicit LuFactorization(DenseMatrix a) : lu_(std::move(a)), perm_(lu_.rows()) {
    const std::size_t n = lu_.rows();
    if (lu_.cols() != n) throw Error(ErrorKind::invalid_input, "LU requires a square matrix");
    if (!lu_.all_finite()) throw Error(ErrorKind::invalid_input, "LU input has non-finite entries");
    const double threshold = pivot_tolerance * frobenius_norm(lu_);
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;

    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      if (best <= threshold || best == 0.0) {
        throw Error(ErrorKind::singular_matrix,
                    "pivot " + std::to_string(best) + " at column " + std::to_string(k) +
                        " below tolerance " + std::to_string(threshold));
      }
      if (p != k) {
        for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(p, c));
        std::swap(perm_[k], perm_[p]);
      }
      const double pivot = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) lu_(i, k) /= pivot;
      for (std::size_t c = k + 1; c < n; ++c) {
        const double ukc = lu_(k, c);
        if (ukc == 0.0) continue;
        for (std::size_t i = k + 1; i < n; ++i) lu_(i, c) -= lu_(i, k) * ukc;
      }
    }
  }

  std::size_t size() const noexcept { return lu_.rows(); }

  Vector solve(std::span<const double> b) const {
    const std::size_t n = lu_.rows();
    if (b.size() != n) throw Error(ErrorKind::invalid_input, "LU right-hand side has wrong length");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
    for (std::size_t c = 0; c < n; ++c) {
      const double xc = x[c];
      if (xc == 0.0) continue;
      for (std::size_t i = c + 1; i < n; ++i) x[i] -= lu_(i, c) * xc;
    }
    for (std::size_t c = n; c-- > 0;) {
      x[c] /= lu_(c, c);
      const double xc = x[c];
      if (xc == 0.0) continue;
      for (std::size_t i = 0; i < c; ++i) x[i] -= lu_(i, c) * xc;
    }
    return x;
  }

 private:
  DenseMatrix lu_;
  std::vector<std::size_t> perm_;
};

inline Vector lu_solve(const DenseMatrix& a, std::span<const double> b) {
  if (a.rows() != b.size()) throw Error(ErrorKind::invalid_input, "lu_solve: b length != rows");
  return LuFactorization(a).solve(b);
}

}  // namespace locrom
