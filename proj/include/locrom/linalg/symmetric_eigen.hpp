#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include "locrom/linalg/dense_matrix.hpp"

namespace locrom {

struct SymmetricEigen {
  Vector values;        // ascending
  DenseMatrix vectors;  // column j pairs with values[j]
};

/// Cyclic two-sided Jacobi eigensolver for symmetric matrices.
inline SymmetricEigen symmetric_eigen(const DenseMatrix& input, int max_sweeps = 100) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw Error(ErrorKind::invalid_input, "eigensolver needs a square matrix");
  if (!input.all_finite()) throw Error(ErrorKind::invalid_input, "eigensolver input is not finite");
  const double scale = std::max(frobenius_norm(input), 1e-300);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j + 1; i < n; ++i)
      if (std::abs(input(i, j) - input(j, i)) > 1e-12 * scale)
        throw Error(ErrorKind::invalid_input, "matrix is not symmetric");

  DenseMatrix a = input;
  DenseMatrix v = DenseMatrix::identity(n);
  bool converged = n < 2;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t q = 1; q < n; ++q)
      for (std::size_t p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(off) <= 1e-14 * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (std::size_t q = 1; q < n; ++q)
      for (std::size_t p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    if (std::sqrt(off) > 1e-12 * scale)
      throw Error(ErrorKind::numerical_failure, "Jacobi eigensolver did not converge");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  SymmetricEigen out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    std::copy_n(v.col(order[j]).begin(), n, out.vectors.col(j).begin());
  }
  return out;
}

/// Algebraically smallest eigenvalue and its unit eigenvector; the sign makes
/// the first non-negligible component positive.
inline std::pair<double, Vector> smallest_eigenpair(const DenseMatrix& a) {
  if (a.rows() == 0) throw Error(ErrorKind::invalid_input, "empty matrix");
  SymmetricEigen eig = symmetric_eigen(a);
  Vector v = eig.vectors.column(0);
  const double vmax = std::abs(*std::max_element(v.begin(), v.end(), [](double x, double y) {
    return std::abs(x) < std::abs(y);
  }));
  for (double x : v) {
    if (std::abs(x) > 1e-8 * vmax) {
      if (x < 0)
        for (double& y : v) y = -y;
      break;
    }
  }
  return {eig.values[0], std::move(v)};
}

}  // namespace locrom
