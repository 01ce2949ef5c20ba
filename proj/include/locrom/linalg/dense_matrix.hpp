#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "locrom/core/error.hpp"

namespace locrom {

using Vector = std::vector<double>;

/// Dense real matrix stored column-major: entry (r, c) lives at r + c * rows.
/// This is the only layout; persistence writes the buffer as-is.
class DenseMatrix {
 public:
  DenseMatrix() = default;

  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> column_major)
      : rows_(rows), cols_(cols), data_(std::move(column_major)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorKind::invalid_input,
                  "matrix buffer has " + std::to_string(data_.size()) + " entries, expected " +
                      std::to_string(rows_ * cols_));
    }
  }

  /// Row-wise literal, for tests and small fixtures.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw Error(ErrorKind::invalid_input, "ragged matrix literal");
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static DenseMatrix diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    assert(r < rows_ && c < cols_);
    return data_[r + c * rows_];
  }
  double operator()(std::size_t r, std::size_t c) const {
    assert(r < rows_ && c < cols_);
    return data_[r + c * rows_];
  }

  std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
  std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

  Vector column(std::size_t c) const {
    auto s = col(c);
    return {s.begin(), s.end()};
  }
  Vector row(std::size_t r) const {
    Vector out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
    return out;
  }

  const std::vector<double>& data() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) {
  // Scaled accumulation guards against overflow for large entries.
  double scale = 0.0;
  double ssq = 1.0;
  for (double v : a) {
    if (v == 0.0) continue;
    const double av = std::abs(v);
    if (scale < av) {
      ssq = 1.0 + ssq * (scale / av) * (scale / av);
      scale = av;
    } else {
      ssq += (av / scale) * (av / scale);
    }
  }
  return scale * std::sqrt(ssq);
}

inline double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

/// y = A x
inline Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw Error(ErrorKind::invalid_input, "matvec dimension mismatch");
  Vector y(a.rows(), 0.0);
  for (std::size_t c = 0; c < a.cols(); ++c) {
    if (x[c] != 0.0) axpy(x[c], a.col(c), y);
  }
  return y;
}

/// y = A^T x
inline Vector tmatvec(const DenseMatrix& a, std::span<const double> x) {
  if (x.size() != a.rows()) throw Error(ErrorKind::invalid_input, "tmatvec dimension mismatch");
  Vector y(a.cols());
  for (std::size_t c = 0; c < a.cols(); ++c) y[c] = dot(a.col(c), x);
  return y;
}

inline DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t c = 0; c < a.cols(); ++c)
    for (std::size_t r = 0; r < a.rows(); ++r) t(c, r) = a(r, c);
  return t;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(ErrorKind::invalid_input, "matmul dimension mismatch");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto oc = out.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      if (bkj != 0.0) axpy(bkj, a.col(k), oc);
    }
  }
  return out;
}

/// A^T B without forming the transpose.
inline DenseMatrix tmatmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw Error(ErrorKind::invalid_input, "tmatmul dimension mismatch");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j)
    for (std::size_t i = 0; i < a.cols(); ++i) out(i, j) = dot(a.col(i), b.col(j));
  return out;
}

inline DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::invalid_input, "subtract dimension mismatch");
  std::vector<double> d(a.data().size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.data()[i] - b.data()[i];
  return {a.rows(), a.cols(), std::move(d)};
}

inline DenseMatrix select_columns(const DenseMatrix& a, std::span<const std::size_t> columns) {
  DenseMatrix out(a.rows(), columns.size());
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] >= a.cols()) throw Error(ErrorKind::invalid_input, "column index out of range");
    std::copy_n(a.col(columns[j]).begin(), a.rows(), out.col(j).begin());
  }
  return out;
}

inline DenseMatrix leading_columns(const DenseMatrix& a, std::size_t count) {
  std::vector<std::size_t> idx(std::min(count, a.cols()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return select_columns(a, idx);
}

/// Largest |entry| of (A^T A - I); the orthonormality residual used in checks.
inline double orthonormality_defect(const DenseMatrix& a) {
  const DenseMatrix g = tmatmul(a, a);
  double worst = 0.0;
  for (std::size_t j = 0; j < g.cols(); ++j)
    for (std::size_t i = 0; i < g.rows(); ++i)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace locrom
