#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "locrom/core/error.hpp"

namespace locrom::text {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(const std::string& s, ErrorKind kind, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(kind, what + ": '" + s + "' is not a number");
}

inline std::size_t to_count(const std::string& s, ErrorKind kind, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size() && v >= 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw Error(kind, what + ": '" + s + "' is not a non-negative integer");
}

inline std::vector<double> to_doubles(const std::string& s, ErrorKind kind, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split(s, ',')) out.push_back(to_double(item, kind, what));
  return out;
}

inline std::string format(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <typename Range>
std::string join(const Range& values, std::string_view sep = ", ") {
  std::ostringstream os;
  os << std::setprecision(17);
  bool first = true;
  for (const auto& v : values) {
    if (!first) os << sep;
    os << v;
    first = false;
  }
  return os.str();
}

/// Flat `key = value` file without sections ('#' starts a comment line).
/// Duplicate keys are rejected.
inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path, ErrorKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(kind, "cannot open " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(kind, path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (!kv.emplace(key, trim(std::string_view(t).substr(eq + 1))).second)
      throw Error(kind, path.string() + ":" + std::to_string(lineno) + ": duplicate key " + key);
  }
  return kv;
}

inline const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                                  ErrorKind kind, const std::string& where) {
  const auto it = kv.find(key);
  if (it == kv.end()) throw Error(kind, where + ": missing key '" + key + "'");
  return it->second;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::invalid_input, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(ErrorKind::invalid_input, "write failed for " + path.string());
}

}  // namespace locrom::text
