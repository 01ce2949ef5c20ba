#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "locrom/fom/model.hpp"
#include "locrom/linalg/lu.hpp"
#include "locrom/linalg/matrix_io.hpp"
#include "locrom/podbasis.hpp"

namespace locrom {

/// Galerkin-projected operators. Trial coordinates are the L basis
/// coefficients, extended by a constant 1 when the basis carries an offset
/// (m = L + 1); test functions are the L basis columns.
///   r(a, theta) = (A0 + theta A1) x + (Q0 + theta Q1)(x, x)
///                 + (C0 + theta C1)(x, x, x) - (f0 + theta f1),   x = (a, 1)
struct ReducedModel {
  std::size_t L = 0;
  std::size_t m = 0;
  DenseMatrix A0, A1;  // L x m
  Vector f0, f1;       // L
  std::optional<DenseTensor> Q0, Q1;  // L x m x m
  std::optional<DenseTensor> C0, C1;  // L x m x m x m

  bool augmented() const { return m > L; }
  bool nonlinear() const { return Q0 || Q1 || C0 || C1; }
  bool homogeneous() const {
    auto zero = [](const Vector& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }); };
    return zero(f0) && zero(f1);
  }

  Vector extend(std::span<const double> a) const {
    Vector x(a.begin(), a.end());
    if (augmented()) x.push_back(1.0);
    return x;
  }
};

namespace detail {

inline DenseMatrix augmented_basis(const LocalBasis& b) {
  if (!b.centred()) return b.basis;
  DenseMatrix phi(b.dim(), b.L + 1);
  for (std::size_t c = 0; c < b.L; ++c) std::copy_n(b.basis.col(c).begin(), b.dim(), phi.col(c).begin());
  std::copy(b.offset.begin(), b.offset.end(), phi.col(b.L).begin());
  return phi;
}

inline DenseTensor project_quadratic(const fom::SparseTensor3& q, const DenseMatrix& psi, const DenseMatrix& phi) {
  const std::size_t l = psi.cols(), m = phi.cols();
  DenseTensor t{{l, m, m}, std::vector<double>(l * m * m, 0.0)};
  std::vector<double> w(l);
  for (const auto& e : q.entries) {
    for (std::size_t a = 0; a < l; ++a) w[a] = e.value * psi(e.i, a);
    for (std::size_t c = 0; c < m; ++c) {
      const double pc = phi(e.k, c);
      if (pc == 0.0) continue;
      for (std::size_t b = 0; b < m; ++b) {
        const double pbc = phi(e.j, b) * pc;
        if (pbc == 0.0) continue;
        double* out = t.values.data() + l * (b + m * c);
        for (std::size_t a = 0; a < l; ++a) out[a] += w[a] * pbc;
      }
    }
  }
  return t;
}

inline DenseTensor project_cubic(const fom::SparseTensor4& cten, const DenseMatrix& psi, const DenseMatrix& phi) {
  const std::size_t l = psi.cols(), m = phi.cols();
  DenseTensor t{{l, m, m, m}, std::vector<double>(l * m * m * m, 0.0)};
  std::vector<double> w(l);
  for (const auto& e : cten.entries) {
    for (std::size_t a = 0; a < l; ++a) w[a] = e.value * psi(e.i, a);
    for (std::size_t d = 0; d < m; ++d) {
      const double pd = phi(e.l, d);
      if (pd == 0.0) continue;
      for (std::size_t c = 0; c < m; ++c) {
        const double pcd = phi(e.k, c) * pd;
        if (pcd == 0.0) continue;
        for (std::size_t b = 0; b < m; ++b) {
          const double pbcd = phi(e.j, b) * pcd;
          if (pbcd == 0.0) continue;
          double* out = t.values.data() + l * (b + m * (c + m * d));
          for (std::size_t a = 0; a < l; ++a) out[a] += w[a] * pbcd;
        }
      }
    }
  }
  return t;
}

// out[a] += s * sum_{b,c} Q[a,b,c] x_b y_c
inline void contract2(const DenseTensor& q, std::span<const double> x, std::span<const double> y, double s,
                      std::span<double> out) {
  const std::size_t l = q.dims[0], m = q.dims[1];
  for (std::size_t c = 0; c < m; ++c) {
    if (y[c] == 0.0) continue;
    for (std::size_t b = 0; b < m; ++b) {
      const double f = s * x[b] * y[c];
      if (f == 0.0) continue;
      const double* col = q.values.data() + l * (b + m * c);
      for (std::size_t a = 0; a < l; ++a) out[a] += f * col[a];
    }
  }
}

// out[a] += s * sum_{b,c,d} C[a,b,c,d] x_b y_c z_d
inline void contract3(const DenseTensor& t, std::span<const double> x, std::span<const double> y,
                      std::span<const double> z, double s, std::span<double> out) {
  const std::size_t l = t.dims[0], m = t.dims[1];
  for (std::size_t d = 0; d < m; ++d) {
    if (z[d] == 0.0) continue;
    for (std::size_t c = 0; c < m; ++c) {
      const double fcd = s * y[c] * z[d];
      if (fcd == 0.0) continue;
      for (std::size_t b = 0; b < m; ++b) {
        const double f = fcd * x[b];
        if (f == 0.0) continue;
        const double* col = t.values.data() + l * (b + m * (c + m * d));
        for (std::size_t a = 0; a < l; ++a) out[a] += f * col[a];
      }
    }
  }
}

// M[a, e] += s * dQ(x, x)[a] / dx_e restricted to the slots listed, L x m.
// Slot 1 frozen means Q(x, .), i.e. M[a, c] = sum_b Q[a,b,c] x_b.
inline void add_frozen_quadratic(const DenseTensor& q, std::span<const double> x, double s, DenseMatrix& m_out,
                                 bool full_derivative) {
  const std::size_t l = q.dims[0], m = q.dims[1];
  for (std::size_t c = 0; c < m; ++c)
    for (std::size_t b = 0; b < m; ++b) {
      const double* col = q.values.data() + l * (b + m * c);
      const double fb = s * x[b];
      const double fc = s * x[c];
      for (std::size_t a = 0; a < l; ++a) {
        m_out(a, c) += fb * col[a];
        if (full_derivative) m_out(a, b) += fc * col[a];
      }
    }
}

// Cubic analogue; the frozen form keeps the last slot free: M[a, d] = sum C[a,b,c,d] x_b x_c.
inline void add_frozen_cubic(const DenseTensor& t, std::span<const double> x, double s, DenseMatrix& m_out,
                             bool full_derivative) {
  const std::size_t l = t.dims[0], m = t.dims[1];
  for (std::size_t d = 0; d < m; ++d)
    for (std::size_t c = 0; c < m; ++c)
      for (std::size_t b = 0; b < m; ++b) {
        const double* col = t.values.data() + l * (b + m * (c + m * d));
        const double fbc = s * x[b] * x[c];
        const double fbd = s * x[b] * x[d];
        const double fcd = s * x[c] * x[d];
        if (fbc == 0.0 && (!full_derivative || (fbd == 0.0 && fcd == 0.0))) continue;
        for (std::size_t a = 0; a < l; ++a) {
          m_out(a, d) += fbc * col[a];
          if (full_derivative) {
            m_out(a, c) += fbd * col[a];
            m_out(a, b) += fcd * col[a];
          }
        }
      }
}

}  // namespace detail

inline ReducedModel project_model(const fom::OperatorDecomposition& ops, const LocalBasis& basis) {
  ops.validate();
  if (basis.dim() != ops.dim)
    throw Error(ErrorKind::inconsistent_decomposition, "basis dimension " + std::to_string(basis.dim()) +
                                                           " does not match the operators (" + std::to_string(ops.dim) + ")");
  const DenseMatrix& psi = basis.basis;
  const DenseMatrix phi = detail::augmented_basis(basis);
  ReducedModel rm;
  rm.L = basis.L;
  rm.m = phi.cols();
  rm.A0 = tmatmul(psi, matmul(ops.linear_const, phi));
  rm.A1 = tmatmul(psi, matmul(ops.linear_param, phi));
  rm.f0 = tmatvec(psi, ops.load_const);
  rm.f1 = tmatvec(psi, ops.load_param);
  if (ops.quad_const) rm.Q0 = detail::project_quadratic(*ops.quad_const, psi, phi);
  if (ops.quad_param) rm.Q1 = detail::project_quadratic(*ops.quad_param, psi, phi);
  if (ops.cubic_const) rm.C0 = detail::project_cubic(*ops.cubic_const, psi, phi);
  if (ops.cubic_param) rm.C1 = detail::project_cubic(*ops.cubic_param, psi, phi);
  return rm;
}

inline ReducedModel project_model(const fom::FullOrderModel& model, const LocalBasis& basis) {
  return project_model(model.operators(), basis);
}

inline Vector reduced_residual(const ReducedModel& rm, std::span<const double> a, double theta) {
  if (a.size() != rm.L) throw Error(ErrorKind::invalid_input, "coefficient vector has the wrong length");
  const Vector x = rm.extend(a);
  Vector r = matvec(rm.A0, x);
  axpy(theta, matvec(rm.A1, x), r);
  if (rm.Q0) detail::contract2(*rm.Q0, x, x, 1.0, r);
  if (rm.Q1) detail::contract2(*rm.Q1, x, x, theta, r);
  if (rm.C0) detail::contract3(*rm.C0, x, x, x, 1.0, r);
  if (rm.C1) detail::contract3(*rm.C1, x, x, x, theta, r);
  for (std::size_t i = 0; i < rm.L; ++i) r[i] -= rm.f0[i] + theta * rm.f1[i];
  return r;
}

/// Jacobian of the reduced residual with respect to the L coefficients.
inline DenseMatrix reduced_jacobian(const ReducedModel& rm, std::span<const double> a, double theta) {
  const Vector x = rm.extend(a);
  DenseMatrix j(rm.L, rm.m);
  for (std::size_t n = 0; n < rm.L * rm.m; ++n) {
    const std::size_t r = n % rm.L, c = n / rm.L;
    j(r, c) = rm.A0(r, c) + theta * rm.A1(r, c);
  }
  if (rm.Q0) detail::add_frozen_quadratic(*rm.Q0, x, 1.0, j, true);
  if (rm.Q1) detail::add_frozen_quadratic(*rm.Q1, x, theta, j, true);
  if (rm.C0) detail::add_frozen_cubic(*rm.C0, x, 1.0, j, true);
  if (rm.C1) detail::add_frozen_cubic(*rm.C1, x, theta, j, true);
  return leading_columns(j, rm.L);
}

enum class RomMethod { picard, newton };

struct RomSolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 3000;
  RomMethod method = RomMethod::picard;
  /// Move theta*A1 x to the right-hand side (evaluated at the previous
  /// iterate). Without it a homogeneous nonlinear problem has the frozen
  /// system's only solution at zero. Default: on exactly for homogeneous
  /// nonlinear models.
  std::optional<bool> lag_linear_param;
};

struct RomSolveReport {
  Vector coeffs;
  std::size_t iterations = 0;
  bool converged = false;
  double final_increment = 0.0;  // |a_next - a| / max(|a_next|, 1)
  std::string basis_used;
  std::string diagnostic;
};

/// Solves r(a, theta) = 0. Picard freezes the quadratic factor Q(x, .) and
/// the cubic factor C(x, x, .) at the previous iterate and solves the linear
/// system by LU. Stops once the increment is at most tol relative to the
/// iterate (absolute for iterates of norm below one). Non-convergence is
/// reported, not thrown.
inline RomSolveReport solve_rom(const ReducedModel& rm, double theta, std::span<const double> init,
                                const RomSolveOptions& opt = {}) {
  if (init.size() != rm.L) throw Error(ErrorKind::invalid_input, "initial coefficients have the wrong length");
  if (!std::isfinite(theta)) throw Error(ErrorKind::invalid_input, "parameter is not finite");
  RomSolveReport rep;
  Vector a(init.begin(), init.end());

  auto rhs_base = [&] {
    Vector f(rm.L);
    for (std::size_t i = 0; i < rm.L; ++i) f[i] = rm.f0[i] + theta * rm.f1[i];
    return f;
  };

  if (!rm.nonlinear()) {
    DenseMatrix k(rm.L, rm.m);
    for (std::size_t n = 0; n < rm.L * rm.m; ++n) {
      const std::size_t r = n % rm.L, c = n / rm.L;
      k(r, c) = rm.A0(r, c) + theta * rm.A1(r, c);
    }
    Vector f = rhs_base();
    if (rm.augmented()) axpy(-1.0, k.col(rm.L), f);
    try {
      rep.coeffs = lu_solve(leading_columns(k, rm.L), f);
      rep.converged = true;
    } catch (const Error& e) {
      rep.coeffs = a;
      rep.diagnostic = e.what();
    }
    rep.iterations = 1;
    return rep;
  }

  const bool lag = opt.lag_linear_param.value_or(rm.homogeneous());
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    rep.iterations = it;
    const Vector x = rm.extend(a);
    Vector next;
    try {
      if (opt.method == RomMethod::newton) {
        const Vector r = reduced_residual(rm, a, theta);
        next = a;
        axpy(-1.0, lu_solve(reduced_jacobian(rm, a, theta), r), next);
      } else {
        DenseMatrix k(rm.L, rm.m);
        for (std::size_t n = 0; n < rm.L * rm.m; ++n) {
          const std::size_t r = n % rm.L, c = n / rm.L;
          k(r, c) = rm.A0(r, c) + (lag ? 0.0 : theta * rm.A1(r, c));
        }
        if (rm.Q0) detail::add_frozen_quadratic(*rm.Q0, x, 1.0, k, false);
        if (rm.Q1) detail::add_frozen_quadratic(*rm.Q1, x, theta, k, false);
        if (rm.C0) detail::add_frozen_cubic(*rm.C0, x, 1.0, k, false);
        if (rm.C1) detail::add_frozen_cubic(*rm.C1, x, theta, k, false);
        Vector f = rhs_base();
        if (rm.augmented()) axpy(-1.0, k.col(rm.L), f);
        if (lag) axpy(-theta, matvec(rm.A1, x), f);
        next = lu_solve(leading_columns(k, rm.L), f);
      }
    } catch (const Error& e) {
      rep.diagnostic = std::string("iteration ") + std::to_string(it) + ": " + e.what();
      break;
    }
    const double inc = norm2(subtract(next, a)) / std::max(norm2(next), 1.0);
    a = std::move(next);
    rep.final_increment = inc;
    if (!std::isfinite(inc)) {
      rep.diagnostic = "iteration diverged";
      break;
    }
    if (inc <= opt.tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged && rep.diagnostic.empty())
    rep.diagnostic = "no convergence in " + std::to_string(opt.max_iter) + " iterations";
  rep.coeffs = std::move(a);
  return rep;
}

struct ErrorValue {
  enum class Kind { relative, absolute };
  double value = 0.0;
  Kind kind = Kind::relative;
};

/// Full-order norms at or below this count as zero, leaving the relative
/// error undefined; the absolute error is reported instead.
inline constexpr double zero_state_threshold = 1e-8;

inline ErrorValue relative_error(std::span<const double> u_full, std::span<const double> u_rom) {
  if (u_full.size() != u_rom.size()) throw Error(ErrorKind::invalid_input, "error vectors differ in length");
  const double diff = norm2(subtract(u_full, u_rom));
  const double ref = norm2(u_full);
  if (ref <= zero_state_threshold) return {diff, ErrorValue::Kind::absolute};
  return {diff / ref, ErrorValue::Kind::relative};
}

struct GlobalBases {
  LocalBasis global1;  // L = sum of local sizes
  LocalBasis global2;  // L = largest local size
  std::vector<std::string> warnings;
};

/// POD of all snapshots at the two comparison sizes, truncated to the
/// numerical rank when a requested size exceeds it.
inline GlobalBases build_global_bases(const DenseMatrix& snapshots, const std::vector<LocalBasis>& local,
                                      bool centre = false) {
  if (local.empty()) throw Error(ErrorKind::invalid_input, "no local bases");
  std::size_t sum = 0, largest = 0;
  for (const auto& b : local) {
    sum += b.L;
    largest = std::max(largest, b.L);
  }
  GlobalBases g;
  g.global1 = build_pod_basis(snapshots, TruncationRule::fixed(sum), 0, centre);
  g.global2 = build_pod_basis(snapshots, TruncationRule::fixed(largest), 0, centre);
  if (g.global1.L < sum)
    g.warnings.push_back("Global-1 size " + std::to_string(sum) + " exceeds the snapshot rank; truncated to " +
                         std::to_string(g.global1.L));
  if (g.global2.L < largest)
    g.warnings.push_back("Global-2 size " + std::to_string(largest) + " exceeds the snapshot rank; truncated to " +
                         std::to_string(g.global2.L));
  return g;
}

struct GlobalRoms {
  ReducedModel global1;
  ReducedModel global2;
};

inline GlobalRoms build_global_roms(const fom::FullOrderModel& model, const GlobalBases& g) {
  return {project_model(model, g.global1), project_model(model, g.global2)};
}

// rom_<tag>.mat holds [A0 | A1 | f0 | f1] (L x (2m + 2)); tensors go to
// rom_<tag>_{Q0,Q1,C0,C1}.ten when present.
inline void save_reduced_model(const std::filesystem::path& dir, const std::string& tag, const ReducedModel& rm) {
  DenseMatrix block(rm.L, 2 * rm.m + 2);
  for (std::size_t c = 0; c < rm.m; ++c) {
    std::copy_n(rm.A0.col(c).begin(), rm.L, block.col(c).begin());
    std::copy_n(rm.A1.col(c).begin(), rm.L, block.col(rm.m + c).begin());
  }
  std::copy(rm.f0.begin(), rm.f0.end(), block.col(2 * rm.m).begin());
  std::copy(rm.f1.begin(), rm.f1.end(), block.col(2 * rm.m + 1).begin());
  write_matrix(dir / ("rom_" + tag + ".mat"), block);
  const std::pair<const char*, const std::optional<DenseTensor>*> slots[] = {
      {"Q0", &rm.Q0}, {"Q1", &rm.Q1}, {"C0", &rm.C0}, {"C1", &rm.C1}};
  for (const auto& [name, t] : slots)
    if (*t) write_tensor(dir / ("rom_" + tag + "_" + name + ".ten"), **t);
}

inline ReducedModel load_reduced_model(const std::filesystem::path& dir, const std::string& tag) {
  constexpr auto bad = ErrorKind::corrupt_store;
  const DenseMatrix block = read_matrix(dir / ("rom_" + tag + ".mat"));
  if (block.cols() < 4 || block.cols() % 2 != 0) throw Error(bad, "rom_" + tag + ".mat has an invalid shape");
  ReducedModel rm;
  rm.L = block.rows();
  rm.m = (block.cols() - 2) / 2;
  if (rm.m != rm.L && rm.m != rm.L + 1) throw Error(bad, "rom_" + tag + ".mat has an invalid shape");
  rm.A0 = DenseMatrix(rm.L, rm.m);
  rm.A1 = DenseMatrix(rm.L, rm.m);
  for (std::size_t c = 0; c < rm.m; ++c) {
    std::copy_n(block.col(c).begin(), rm.L, rm.A0.col(c).begin());
    std::copy_n(block.col(rm.m + c).begin(), rm.L, rm.A1.col(c).begin());
  }
  rm.f0 = block.column(2 * rm.m);
  rm.f1 = block.column(2 * rm.m + 1);
  auto load = [&](const char* name, std::size_t order, std::optional<DenseTensor>& slot) {
    const auto path = dir / ("rom_" + tag + "_" + name + ".ten");
    if (!std::filesystem::exists(path)) return;
    DenseTensor t = read_tensor(path);
    std::vector<std::size_t> expect(order, rm.m);
    expect[0] = rm.L;
    if (t.dims != expect) throw Error(bad, path.string() + ": tensor dimensions do not match the model");
    slot = std::move(t);
  };
  load("Q0", 3, rm.Q0);
  load("Q1", 3, rm.Q1);
  load("C0", 4, rm.C0);
  load("C1", 4, rm.C1);
  if (!block.all_finite()) throw Error(bad, "rom_" + tag + ".mat has non-finite entries");
  return rm;
}

}  // namespace locrom
