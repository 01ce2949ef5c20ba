#pragma once

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "locrom/linalg/dense_matrix.hpp"

namespace locrom::test_support {

inline DenseMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  DenseMatrix m(rows, cols);
  for (std::size_t c = 0; c < cols; ++c)
    for (double& v : m.col(c)) v = g(rng);
  return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

/// Random n x l matrix with orthonormal columns (Gram-Schmidt twice).
inline DenseMatrix random_orthonormal(std::size_t n, std::size_t l, std::mt19937_64& rng) {
  DenseMatrix q = random_matrix(n, l, rng);
  for (std::size_t j = 0; j < l; ++j) {
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t i = 0; i < j; ++i) axpy(-dot(q.col(i), q.col(j)), q.col(i), q.col(j));
    const double nrm = norm2(q.col(j));
    for (double& v : q.col(j)) v /= nrm;
  }
  return q;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("locrom_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace locrom::test_support

#define EXPECT_THROW_KIND(stmt, expected_kind)                                              \
  do {                                                                                      \
    try {                                                                                   \
      stmt;                                                                                 \
      ADD_FAILURE() << "expected " << ::locrom::to_string(expected_kind) << " error";      \
    } catch (const ::locrom::Error& e_) {                                                   \
      EXPECT_EQ(e_.kind(), expected_kind) << e_.what();                                     \
    }                                                                                       \
  } while (0)
