#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "locrom/linalg/dense_matrix.hpp"

namespace locrom::fom {

/// Counts full-order residual and Jacobian evaluations process-wide. The
/// online stage must leave it untouched.
inline std::atomic<std::uint64_t>& evaluation_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

struct QuadraticEntry {
  std::size_t i, j, k;
  double value;
};

struct CubicEntry {
  std::size_t i, j, k, l;
  double value;
};

/// Sparse 3-index array; contracts as out[i] += Q[i,j,k] x[j] y[k].
struct SparseTensor3 {
  std::vector<QuadraticEntry> entries;

  void apply(std::span<const double> x, std::span<const double> y, double scale, std::span<double> out) const {
    for (const auto& e : entries) out[e.i] += scale * e.value * x[e.j] * y[e.k];
  }
};

/// Sparse 4-index array; contracts as out[i] += C[i,j,k,l] x[j] y[k] z[l].
struct SparseTensor4 {
  std::vector<CubicEntry> entries;

  void apply(std::span<const double> x, std::span<const double> y, std::span<const double> z, double scale,
             std::span<double> out) const {
    for (const auto& e : entries) out[e.i] += scale * e.value * x[e.j] * y[e.k] * z[e.l];
  }
};

/// Full-order operators, each affine in the scalar parameter theta:
///   residual(u, theta) = (A0 + theta A1) u + (Q0 + theta Q1)(u, u)
///                        + (C0 + theta C1)(u, u, u) - (f0 + theta f1)
struct OperatorDecomposition {
  std::size_t dim = 0;
  DenseMatrix linear_const;
  DenseMatrix linear_param;
  Vector load_const;
  Vector load_param;
  std::optional<SparseTensor3> quad_const;
  std::optional<SparseTensor3> quad_param;
  std::optional<SparseTensor4> cubic_const;
  std::optional<SparseTensor4> cubic_param;

  bool has_quadratic() const { return quad_const.has_value() || quad_param.has_value(); }
  bool has_cubic() const { return cubic_const.has_value() || cubic_param.has_value(); }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::inconsistent_decomposition, what); };
    if (linear_const.rows() != dim || linear_const.cols() != dim) fail("A0 shape");
    if (linear_param.rows() != dim || linear_param.cols() != dim) fail("A1 shape");
    if (load_const.size() != dim || load_param.size() != dim) fail("load length");
    for (const auto* q : {&quad_const, &quad_param})
      if (*q)
        for (const auto& e : (*q)->entries)
          if (e.i >= dim || e.j >= dim || e.k >= dim) fail("quadratic tensor index out of bounds");
    for (const auto* c : {&cubic_const, &cubic_param})
      if (*c)
        for (const auto& e : (*c)->entries)
          if (e.i >= dim || e.j >= dim || e.k >= dim || e.l >= dim) fail("cubic tensor index out of bounds");
  }

  Vector residual(std::span<const double> u, double theta) const {
    if (u.size() != dim) throw Error(ErrorKind::invalid_input, "state has wrong dimension");
    ++evaluation_counter();
    Vector r = matvec(linear_const, u);
    if (theta != 0.0) axpy(theta, matvec(linear_param, u), r);
    if (quad_const) quad_const->apply(u, u, 1.0, r);
    if (quad_param) quad_param->apply(u, u, theta, r);
    if (cubic_const) cubic_const->apply(u, u, u, 1.0, r);
    if (cubic_param) cubic_param->apply(u, u, u, theta, r);
    for (std::size_t i = 0; i < dim; ++i) r[i] -= load_const[i] + theta * load_param[i];
    return r;
  }

  DenseMatrix jacobian(std::span<const double> u, double theta) const {
    if (u.size() != dim) throw Error(ErrorKind::invalid_input, "state has wrong dimension");
    ++evaluation_counter();
    std::vector<double> buf(dim * dim);
    for (std::size_t n = 0; n < buf.size(); ++n)
      buf[n] = linear_const.data()[n] + theta * linear_param.data()[n];
    DenseMatrix jac(dim, dim, std::move(buf));
    auto add_quad = [&](const SparseTensor3& q, double s) {
      for (const auto& e : q.entries) {
        jac(e.i, e.j) += s * e.value * u[e.k];
        jac(e.i, e.k) += s * e.value * u[e.j];
      }
    };
    auto add_cubic = [&](const SparseTensor4& c, double s) {
      for (const auto& e : c.entries) {
        jac(e.i, e.j) += s * e.value * u[e.k] * u[e.l];
        jac(e.i, e.k) += s * e.value * u[e.j] * u[e.l];
        jac(e.i, e.l) += s * e.value * u[e.j] * u[e.k];
      }
    };
    if (quad_const) add_quad(*quad_const, 1.0);
    if (quad_param) add_quad(*quad_param, theta);
    if (cubic_const) add_cubic(*cubic_const, 1.0);
    if (cubic_param) add_cubic(*cubic_param, theta);
    return jac;
  }
};

}  // namespace locrom::fom
