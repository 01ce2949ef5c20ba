#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "locrom/assignment.hpp"
#include "locrom/core/text.hpp"
#include "locrom/fom/model.hpp"
#include "locrom/podbasis.hpp"
#include "locrom/rom.hpp"
#include "locrom/sampling.hpp"

namespace locrom::pipeline {

struct ModelConfig {
  std::string name = "pitchfork";  // pitchfork | modal
  std::size_t n_interior = 64;
  double domain_length = 1.0;
  std::string branch = "lower";            // pitchfork only
  std::optional<double> theta_min, theta_max;  // pitchfork domain; defaults to the sampling range
  std::vector<fom::ModalInterval> schedule = fom::default_modal_schedule();  // modal only
  double seed_amplitude = 0.1;
};

struct PipelineConfig {
  ModelConfig model;
  SamplingPlan sampling;
  bool pack_at_boundaries = false;  // pack centres resolved to the model's branch boundaries
  double steady_tol = fom::default_steady_tol;
  std::size_t steady_max_iter = 100;
  bool mean_center = false;
  std::optional<std::size_t> k;  // empty: elbow selection
  std::size_t k_max = 10;
  double alpha = 0.05;
  std::size_t restarts = 10;
  std::size_t kmeans_max_iter = 300;
  std::uint64_t seed = 20220401;
  TruncationRule rule;
  RomSolveOptions rom;
  AssignmentCriterion criterion = AssignmentCriterion::midrange_radius;
  std::string output;
};

inline fom::FullOrderModel build_model(const ModelConfig& m, double sampling_lo, double sampling_hi) {
  if (m.name == "pitchfork") {
    fom::PitchforkOptions opt;
    opt.branch = m.branch;
    opt.domain = {m.theta_min.value_or(sampling_lo), m.theta_max.value_or(sampling_hi)};
    opt.seed_amplitude = m.seed_amplitude;
    return fom::make_pitchfork_model(m.n_interior, m.domain_length, opt);
  }
  if (m.name == "modal") return fom::make_modal_model(m.n_interior, m.schedule, m.domain_length, m.seed_amplitude);
  throw Error(ErrorKind::config, "unknown model '" + m.name + "' (expected pitchfork or modal)");
}

inline fom::FullOrderModel build_model(const PipelineConfig& c) {
  return build_model(c.model, c.sampling.theta_min, c.sampling.theta_max);
}

/// Sampling plan with "boundaries" pack centres filled in from the model.
inline SamplingPlan resolved_sampling(const PipelineConfig& c, const fom::FullOrderModel& model) {
  SamplingPlan plan = c.sampling;
  if (c.pack_at_boundaries) {
    plan.pack_centers = model.branch_boundaries();
    if (plan.pack_centers.empty())
      throw Error(ErrorKind::config, "pack_centers = boundaries, but model '" + model.name() + "' has no branch boundary");
  }
  return plan;
}

namespace detail {

inline const std::map<std::string, std::set<std::string>>& config_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"model", {"name", "n_interior", "domain_length", "branch", "theta_min", "theta_max", "schedule", "seed_amplitude"}},
      {"sampling",
       {"kind", "theta_min", "theta_max", "count", "pack_centers", "pack_fraction", "pack_half_width", "points",
        "points_file"}},
      {"snapshots", {"steady_tol", "max_iter", "mean_center"}},
      {"clustering", {"k", "k_max", "alpha", "restarts", "max_iter", "seed"}},
      {"basis", {"rule", "energy_tol", "fixed_L"}},
      {"rom", {"tol", "max_iter", "solver", "criterion"}},
      {"output", {"directory"}},
  };
  return keys;
}

inline bool parse_bool(const std::string& v, const std::string& what) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::config, what + ": '" + v + "' is not a boolean");
}

inline std::vector<fom::ModalInterval> parse_schedule(const std::string& v) {
  std::vector<fom::ModalInterval> out;
  for (const auto& item : text::split(v, ',')) {
    const auto f = text::split(item, ':');
    if (f.size() != 3) throw Error(ErrorKind::config, "schedule entry '" + item + "' is not lo:hi:mode");
    const auto mode = text::to_count(f[2], ErrorKind::config, "schedule mode");
    out.push_back({text::to_double(f[0], ErrorKind::config, "schedule lo"),
                   text::to_double(f[1], ErrorKind::config, "schedule hi"), static_cast<int>(mode)});
  }
  if (out.empty()) throw Error(ErrorKind::config, "empty schedule");
  return out;
}

}  // namespace detail

/// Parses the sectioned `key = value` format. `base_dir` resolves a relative
/// points_file.
inline PipelineConfig parse_config(const std::string& content, const std::string& origin = "<config>",
                                   const std::filesystem::path& base_dir = {}) {
  constexpr auto bad = ErrorKind::config;
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::istringstream in(content);
  std::string line, section;
  std::size_t lineno = 0;
  auto where = [&] { return origin + ":" + std::to_string(lineno); };
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = text::trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw Error(bad, where() + ": malformed section header");
      section = text::trim(std::string_view(t).substr(1, t.size() - 2));
      if (!detail::config_keys().contains(section)) throw Error(bad, where() + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(bad, where() + ": expected key = value");
    if (section.empty()) throw Error(bad, where() + ": key outside any section");
    const std::string key = text::trim(std::string_view(t).substr(0, eq));
    if (!detail::config_keys().at(section).contains(key))
      throw Error(bad, where() + ": unknown key '" + key + "' in [" + section + "]");
    if (!raw[section].emplace(key, text::trim(std::string_view(t).substr(eq + 1))).second)
      throw Error(bad, where() + ": duplicate key '" + key + "'");
  }

  auto get = [&](const std::string& s, const std::string& k) -> const std::string* {
    const auto sec = raw.find(s);
    if (sec == raw.end()) return nullptr;
    const auto it = sec->second.find(k);
    return it == sec->second.end() ? nullptr : &it->second;
  };
  auto num = [&](const std::string& s, const std::string& k, double& out) {
    if (const auto* v = get(s, k)) out = text::to_double(*v, bad, s + "." + k);
  };
  auto count = [&](const std::string& s, const std::string& k, std::size_t& out) {
    if (const auto* v = get(s, k)) out = text::to_count(*v, bad, s + "." + k);
  };

  PipelineConfig c;
  if (const auto* v = get("model", "name")) c.model.name = *v;
  count("model", "n_interior", c.model.n_interior);
  num("model", "domain_length", c.model.domain_length);
  if (const auto* v = get("model", "branch")) c.model.branch = *v;
  if (const auto* v = get("model", "theta_min")) c.model.theta_min = text::to_double(*v, bad, "model.theta_min");
  if (const auto* v = get("model", "theta_max")) c.model.theta_max = text::to_double(*v, bad, "model.theta_max");
  if (const auto* v = get("model", "schedule")) c.model.schedule = detail::parse_schedule(*v);
  num("model", "seed_amplitude", c.model.seed_amplitude);
  if (c.model.name != "pitchfork" && c.model.name != "modal")
    throw Error(bad, "model.name must be pitchfork or modal, got '" + c.model.name + "'");

  if (c.model.name == "modal") {
    c.sampling.theta_min = c.model.schedule.front().theta_lo;
    c.sampling.theta_max = c.model.schedule.back().theta_hi;
  }
  if (const auto* v = get("sampling", "kind")) {
    if (*v == "uniform") c.sampling.kind = SamplingKind::uniform;
    else if (*v == "packed") c.sampling.kind = SamplingKind::packed;
    else if (*v == "explicit") c.sampling.kind = SamplingKind::explicit_list;
    else throw Error(bad, "sampling.kind must be uniform, packed or explicit");
  }
  num("sampling", "theta_min", c.sampling.theta_min);
  num("sampling", "theta_max", c.sampling.theta_max);
  count("sampling", "count", c.sampling.count);
  if (const auto* v = get("sampling", "pack_centers")) {
    if (*v == "boundaries") c.pack_at_boundaries = true;
    else c.sampling.pack_centers = text::to_doubles(*v, bad, "sampling.pack_centers");
  }
  num("sampling", "pack_fraction", c.sampling.pack_fraction);
  num("sampling", "pack_half_width", c.sampling.pack_half_width);
  const auto* points = get("sampling", "points");
  const auto* points_file = get("sampling", "points_file");
  if (points && points_file) throw Error(bad, "give sampling.points or sampling.points_file, not both");
  if (points) c.sampling.explicit_points = text::to_doubles(*points, bad, "sampling.points");
  if (points_file) {
    std::filesystem::path p = *points_file;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.sampling.explicit_points = load_points_file(p);
  }
  if ((points || points_file) && c.sampling.kind != SamplingKind::explicit_list)
    throw Error(bad, "explicit points given but sampling.kind is not explicit");
  if (c.sampling.kind == SamplingKind::explicit_list && c.sampling.explicit_points.empty())
    throw Error(bad, "sampling.kind = explicit needs points or points_file");

  num("snapshots", "steady_tol", c.steady_tol);
  count("snapshots", "max_iter", c.steady_max_iter);
  if (const auto* v = get("snapshots", "mean_center")) c.mean_center = detail::parse_bool(*v, "snapshots.mean_center");

  if (const auto* v = get("clustering", "k"); v && *v != "auto") c.k = text::to_count(*v, bad, "clustering.k");
  count("clustering", "k_max", c.k_max);
  num("clustering", "alpha", c.alpha);
  count("clustering", "restarts", c.restarts);
  count("clustering", "max_iter", c.kmeans_max_iter);
  if (const auto* v = get("clustering", "seed")) c.seed = text::to_count(*v, bad, "clustering.seed");

  if (const auto* v = get("basis", "rule")) {
    if (*v == "energy") c.rule.kind = TruncationRule::Kind::energy;
    else if (*v == "fixed") c.rule.kind = TruncationRule::Kind::fixed;
    else throw Error(bad, "basis.rule must be energy or fixed");
  }
  num("basis", "energy_tol", c.rule.energy_tol);
  count("basis", "fixed_L", c.rule.fixed_L);

  num("rom", "tol", c.rom.tol);
  count("rom", "max_iter", c.rom.max_iter);
  if (const auto* v = get("rom", "solver")) {
    if (*v == "picard") c.rom.method = RomMethod::picard;
    else if (*v == "newton") c.rom.method = RomMethod::newton;
    else throw Error(bad, "rom.solver must be picard or newton");
  }
  if (const auto* v = get("rom", "criterion")) {
    try {
      c.criterion = parse_criterion(*v);
    } catch (const Error& e) {
      throw Error(bad, std::string("rom.criterion: ") + e.what());
    }
  }
  if (const auto* v = get("output", "directory")) c.output = *v;

  if (!(c.steady_tol > 0.0)) throw Error(bad, "snapshots.steady_tol must be positive");
  if (!(c.rom.tol > 0.0)) throw Error(bad, "rom.tol must be positive");
  if (c.rom.max_iter < 1) throw Error(bad, "rom.max_iter must be at least 1");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw Error(bad, "clustering.alpha must lie in (0, 1)");
  if (c.restarts < 1) throw Error(bad, "clustering.restarts must be at least 1");
  try {
    c.rule.validate();
  } catch (const Error& e) {
    throw Error(bad, std::string("basis: ") + e.what());
  }
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path.string(), path.parent_path());
}

/// Canonical text form; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const PipelineConfig& c) {
  std::ostringstream os;
  os << "[model]\nname = " << c.model.name << "\nn_interior = " << c.model.n_interior
     << "\ndomain_length = " << text::format(c.model.domain_length) << "\nseed_amplitude = "
     << text::format(c.model.seed_amplitude) << '\n';
  if (c.model.name == "pitchfork") {
    os << "branch = " << c.model.branch << '\n';
    if (c.model.theta_min) os << "theta_min = " << text::format(*c.model.theta_min) << '\n';
    if (c.model.theta_max) os << "theta_max = " << text::format(*c.model.theta_max) << '\n';
  } else {
    os << "schedule = ";
    for (std::size_t i = 0; i < c.model.schedule.size(); ++i)
      os << (i ? ", " : "") << text::format(c.model.schedule[i].theta_lo) << ':'
         << text::format(c.model.schedule[i].theta_hi) << ':' << c.model.schedule[i].mode;
    os << '\n';
  }
  const auto& s = c.sampling;
  os << "\n[sampling]\nkind = "
     << (s.kind == SamplingKind::uniform ? "uniform" : s.kind == SamplingKind::packed ? "packed" : "explicit")
     << "\ntheta_min = " << text::format(s.theta_min) << "\ntheta_max = " << text::format(s.theta_max) << '\n';
  if (s.kind == SamplingKind::explicit_list) {
    os << "points = " << text::join(s.explicit_points) << '\n';
  } else {
    os << "count = " << s.count << '\n';
    if (s.kind == SamplingKind::packed) {
      os << "pack_centers = " << (c.pack_at_boundaries ? std::string("boundaries") : text::join(s.pack_centers))
         << "\npack_fraction = " << text::format(s.pack_fraction)
         << "\npack_half_width = " << text::format(s.pack_half_width) << '\n';
    }
  }
  os << "\n[snapshots]\nsteady_tol = " << text::format(c.steady_tol) << "\nmax_iter = " << c.steady_max_iter
     << "\nmean_center = " << (c.mean_center ? "true" : "false") << '\n';
  os << "\n[clustering]\nk = " << (c.k ? std::to_string(*c.k) : std::string("auto")) << "\nk_max = " << c.k_max
     << "\nalpha = " << text::format(c.alpha) << "\nrestarts = " << c.restarts
     << "\nmax_iter = " << c.kmeans_max_iter << "\nseed = " << c.seed << '\n';
  os << "\n[basis]\nrule = " << (c.rule.kind == TruncationRule::Kind::energy ? "energy" : "fixed")
     << "\nenergy_tol = " << text::format(c.rule.energy_tol) << "\nfixed_L = " << c.rule.fixed_L << '\n';
  os << "\n[rom]\ntol = " << text::format(c.rom.tol) << "\nmax_iter = " << c.rom.max_iter
     << "\nsolver = " << (c.rom.method == RomMethod::picard ? "picard" : "newton")
     << "\ncriterion = " << to_string(c.criterion) << '\n';
  if (!c.output.empty()) os << "\n[output]\ndirectory = " << c.output << '\n';
  return os.str();
}

}  // namespace locrom::pipeline
