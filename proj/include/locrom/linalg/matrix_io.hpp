#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "locrom/linalg/dense_matrix.hpp"

namespace locrom {

// Binary layout (all integers/doubles little-endian):
//   "LROMMAT1" | rows:u64 | cols:u64 | rows*cols f64 column-major
//   "LROMTEN1" | order:u64 | dims:u64[order] | prod(dims) f64, first index fastest
inline constexpr std::string_view matrix_magic = "LROMMAT1";
inline constexpr std::string_view tensor_magic = "LROMTEN1";

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::corrupt_store, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::invalid_input, "write failed for " + path.string());
}

inline std::string encode_block(std::string_view magic, const std::vector<std::uint64_t>& header,
                                const std::vector<double>& values) {
  std::string out(magic);
  out.reserve(magic.size() + 8 * (header.size() + values.size()));
  for (auto h : header) put_u64(out, h);
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

inline std::vector<double> decode_values(const std::string& bytes, std::size_t offset, std::uint64_t count,
                                         const std::string& what) {
  if (bytes.size() != offset + 8 * count)
    throw Error(ErrorKind::corrupt_store, what + ": payload size does not match header");
  std::vector<double> values(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + offset;
  for (std::uint64_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(get_u64(p + 8 * i));
  return values;
}

}  // namespace detail

inline std::string encode_matrix(const DenseMatrix& m) {
  return detail::encode_block(matrix_magic, {m.rows(), m.cols()}, m.data());
}

inline DenseMatrix decode_matrix(const std::string& bytes, const std::string& what = "matrix") {
  if (bytes.size() < 24 || std::string_view(bytes).substr(0, 8) != matrix_magic)
    throw Error(ErrorKind::corrupt_store, what + ": bad magic or truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t rows = detail::get_u64(p + 8);
  const std::uint64_t cols = detail::get_u64(p + 16);
  if (cols != 0 && rows > (bytes.size() / 8) / cols)
    throw Error(ErrorKind::corrupt_store, what + ": dimensions exceed file size");
  return {rows, cols, detail::decode_values(bytes, 24, rows * cols, what)};
}

inline void write_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  detail::write_file(path, encode_matrix(m));
}

inline DenseMatrix read_matrix(const std::filesystem::path& path) {
  return decode_matrix(detail::read_file(path), path.string());
}

/// Human-readable mirror of a matrix: one row per line, 17 significant digits.
inline void write_matrix_csv(const std::filesystem::path& path, const DenseMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path.string());
  out << std::setprecision(17);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

/// Dense tensor of arbitrary order, first index fastest.
struct DenseTensor {
  std::vector<std::size_t> dims;
  std::vector<double> values;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;
};

inline void write_tensor(const std::filesystem::path& path, const DenseTensor& t) {
  std::vector<std::uint64_t> header{t.dims.size()};
  for (auto d : t.dims) header.push_back(d);
  detail::write_file(path, detail::encode_block(tensor_magic, header, t.values));
}

inline DenseTensor read_tensor(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  const std::string what = path.string();
  if (bytes.size() < 16 || std::string_view(bytes).substr(0, 8) != tensor_magic)
    throw Error(ErrorKind::corrupt_store, what + ": bad magic or truncated header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t order = detail::get_u64(p + 8);
  if (order > 8 || bytes.size() < 16 + 8 * order)
    throw Error(ErrorKind::corrupt_store, what + ": implausible tensor order");
  DenseTensor t;
  std::uint64_t count = 1;
  for (std::uint64_t i = 0; i < order; ++i) {
    t.dims.push_back(detail::get_u64(p + 16 + 8 * i));
    if (t.dims.back() != 0 && count > (bytes.size() / 8) / t.dims.back())
      throw Error(ErrorKind::corrupt_store, what + ": dimensions exceed file size");
    count *= t.dims.back();
  }
  t.values = detail::decode_values(bytes, 16 + 8 * order, count, what);
  return t;
}

}  // namespace locrom
