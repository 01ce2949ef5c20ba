#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "locrom/pipeline/pipeline.hpp"
#include "support.hpp"

using namespace locrom;
using namespace locrom::pipeline;
using locrom::test_support::TempDir;

namespace {

const char* small_pitchfork = R"(# small pitchfork run
[model]
name = pitchfork
n_interior = 32

[sampling]
kind = packed
theta_min = 5
theta_max = 40
count = 24
pack_centers = 9.85
pack_fraction = 0.4

[clustering]
k = auto
k_max = 6
restarts = 4

[basis]
rule = energy
energy_tol = 1e-10
)";

const char* small_modal = R"([model]
name = modal
n_interior = 32
schedule = 12:45:1, 45:95:2, 95:120:3

[sampling]
kind = packed
count = 30
pack_centers = boundaries

[clustering]
k = 3
restarts = 4

[basis]
rule = energy
energy_tol = 0
)";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Offline artifacts shared by the read-only tests.
const std::filesystem::path& modal_artifacts() {
  static TempDir dir("modal_art");
  static const bool built = [] {
    run_offline(parse_config(small_modal), dir.path() / "art");
    return true;
  }();
  (void)built;
  static const std::filesystem::path p = dir.path() / "art";
  return p;
}

}  // namespace

TEST(Config, ParsesAllSections) {
  const auto c = parse_config(small_pitchfork);
  EXPECT_EQ(c.model.name, "pitchfork");
  EXPECT_EQ(c.model.n_interior, 32u);
  EXPECT_EQ(c.sampling.kind, SamplingKind::packed);
  EXPECT_EQ(c.sampling.count, 24u);
  EXPECT_EQ(c.sampling.pack_centers, (std::vector<double>{9.85}));
  EXPECT_FALSE(c.k.has_value());
  EXPECT_EQ(c.k_max, 6u);
  EXPECT_EQ(c.restarts, 4u);
  EXPECT_EQ(c.rule.kind, TruncationRule::Kind::energy);
  EXPECT_EQ(c.rule.energy_tol, 1e-10);
  EXPECT_EQ(c.rom.max_iter, 3000u);
  EXPECT_EQ(c.criterion, AssignmentCriterion::midrange_radius);
}

TEST(Config, ModalDefaultsSamplingRangeToSchedule) {
  const auto c = parse_config(small_modal);
  EXPECT_EQ(c.sampling.theta_min, 12.0);
  EXPECT_EQ(c.sampling.theta_max, 120.0);
  EXPECT_TRUE(c.pack_at_boundaries);
  const auto model = build_model(c);
  EXPECT_EQ(resolved_sampling(c, model).pack_centers, (std::vector<double>{45, 95}));
}

TEST(Config, CanonicalTextRoundTrips) {
  for (const char* src : {small_pitchfork, small_modal}) {
    const auto c = parse_config(src);
    const std::string text = to_text(c);
    EXPECT_EQ(to_text(parse_config(text)), text);
  }
}

TEST(Config, RejectsBadInput) {
  const std::string base = "[model]\nname = pitchfork\n";
  EXPECT_THROW_KIND(parse_config(base + "colour = red\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "[extras]\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "name = modal\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config("name = pitchfork\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "n_interior = many\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "[clustering]\nalpha = 1.5\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "[basis]\nenergy_tol = 2\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "[rom]\ncriterion = median\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config(base + "[sampling]\npoints = 1, 2\n"), ErrorKind::config);
  EXPECT_THROW_KIND(parse_config("[model]\nname = torus\n"), ErrorKind::config);
}

TEST(Config, PointsFileResolvedAgainstConfigDirectory) {
  TempDir dir("cfg_points");
  std::ofstream(dir.path() / "pts.txt") << "10\n20\n30\n";
  std::ofstream(dir.path() / "run.cfg") << "[model]\nname = pitchfork\n[sampling]\nkind = explicit\n"
                                           "theta_min = 5\ntheta_max = 40\npoints_file = pts.txt\n";
  const auto c = load_config(dir.path() / "run.cfg");
  EXPECT_EQ(c.sampling.explicit_points, (std::vector<double>{10, 20, 30}));
  EXPECT_THROW_KIND(load_config(dir.path() / "missing.cfg"), ErrorKind::config);
}

TEST(Offline, PitchforkArtifacts) {
  TempDir dir("pf_offline");
  const auto out = dir.path() / "art";
  const auto sum = run_offline(parse_config(small_pitchfork), out);
  EXPECT_GE(sum.k, 2u);
  ASSERT_EQ(sum.local_sizes.size(), sum.k);
  for (auto l : sum.local_sizes) EXPECT_GE(l, 1u);
  ASSERT_TRUE(sum.elbow.has_value());
  EXPECT_EQ(sum.elbow->chosen_k, sum.k);
  for (const char* f : {"config.txt", "meta.txt", "snapshots.mat", "elbow.csv", "clusters.txt", "means.mat",
                        "parameter_clusters.txt", "bases_meta.txt", "offline_report.txt", "basis_0.mat",
                        "rom_0.mat", "init_0.mat", "basis_global1.mat", "basis_global2.mat"})
    EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  EXPECT_FALSE(std::filesystem::exists(dir.path() / ".art.partial"));
  const auto report = text::read_key_values(out / "offline_report.txt", ErrorKind::corrupt_store);
  EXPECT_EQ(report.at("K"), std::to_string(sum.k));
  EXPECT_EQ(report.at("k_selection"), "elbow");
  EXPECT_LE(std::stod(report.at("max_snapshot_residual")), 1e-10);
}

TEST(Offline, RerunIsBitIdentical) {
  TempDir dir("pf_det");
  const auto cfg = parse_config(small_pitchfork);
  run_offline(cfg, dir.path() / "a");
  run_offline(cfg, dir.path() / "b");
  for (const char* f : {"snapshots.mat", "clusters.txt", "basis_0.mat", "rom_global1.mat"})
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
  // Rerunning into an existing artifact directory replaces it.
  EXPECT_NO_THROW(run_offline(cfg, dir.path() / "a"));
}

TEST(Offline, KAboveSampleCountFailsAtClustering) {
  TempDir dir("pf_badk");
  auto cfg = parse_config(small_pitchfork);
  cfg.k = 100;
  const auto out = dir.path() / "art";
  try {
    run_offline(cfg, out);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_k);
    EXPECT_NE(std::string(e.what()).find("[clustering]"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(std::filesystem::exists(out));
  EXPECT_FALSE(std::filesystem::exists(dir.path() / ".art.partial"));
}

TEST(Offline, RefusesForeignDirectory) {
  TempDir dir("pf_foreign");
  std::ofstream(dir.path() / "notes.txt") << "keep me\n";
  EXPECT_THROW_KIND(run_offline(parse_config(small_pitchfork), dir.path()), ErrorKind::config);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "notes.txt"));
}

TEST(Offline, ModalClustersFollowBranches) {
  const auto art = load_artifacts(modal_artifacts());
  ASSERT_EQ(art.clusters.k, 3u);
  // Each parameter cluster lies inside one schedule interval, and each interval has one cluster.
  std::set<int> modes;
  for (const auto& params : art.clusters.cluster_params) {
    const int mode = params.front() < 45 ? 1 : params.front() < 95 ? 2 : 3;
    for (double t : params) EXPECT_EQ(t < 45 ? 1 : t < 95 ? 2 : 3, mode) << t;
    modes.insert(mode);
  }
  EXPECT_EQ(modes.size(), 3u);
}

TEST(Online, TrainingParameterReproducesSnapshotObservable) {
  const auto art = load_artifacts(modal_artifacts());
  const auto snaps = load_snapshots(modal_artifacts());
  std::vector<double> thetas = snaps.parameters.points;
  const auto d = run_online(art, thetas, AssignmentCriterion::midrange_radius);
  ASSERT_EQ(d.rows.size(), thetas.size());
  for (std::size_t s = 0; s < thetas.size(); ++s) {
    EXPECT_TRUE(d.rows[s].converged);
    EXPECT_NEAR(d.rows[s].observable, snaps.matrix(art.observable_index, s), 1e-6) << "theta = " << thetas[s];
  }
}

TEST(Online, BasisPiecewiseConstantNearSchedule) {
  const auto art = load_artifacts(modal_artifacts());
  const auto thetas = uniform_points(12, 120, 100);
  const auto d = run_online(art, thetas, AssignmentCriterion::midrange_radius);
  std::vector<double> switches;
  for (std::size_t i = 1; i < d.rows.size(); ++i)
    if (d.rows[i].basis_used != d.rows[i - 1].basis_used) switches.push_back(0.5 * (d.rows[i].theta + d.rows[i - 1].theta));
  ASSERT_EQ(switches.size(), 2u);
  const double spacing = thetas[1] - thetas[0];
  EXPECT_NEAR(switches[0], 45, 2 * spacing);
  EXPECT_NEAR(switches[1], 95, 2 * spacing);
}

TEST(Online, EmptyListGivesHeaderOnly) {
  const auto art = load_artifacts(modal_artifacts());
  const auto d = run_online(art, std::vector<double>{}, AssignmentCriterion::parameter_mean);
  EXPECT_EQ(d.to_csv(), "theta,observable,basis_used,converged,extrapolation\n");
}

TEST(Online, NeverEvaluatesFullOrderOperators) {
  const auto art = load_artifacts(modal_artifacts());
  const auto before = fom::evaluation_counter().load();
  run_online(art, uniform_points(10, 125, 50), AssignmentCriterion::midrange_radius);
  EXPECT_EQ(fom::evaluation_counter().load(), before);
}

TEST(Online, FlagsExtrapolationAndRejectsUnsortedSweep) {
  const auto art = load_artifacts(modal_artifacts());
  const auto d = run_online(art, std::vector<double>{5, 60}, AssignmentCriterion::midrange_radius);
  EXPECT_TRUE(d.rows[0].extrapolation);
  EXPECT_FALSE(d.rows[1].extrapolation);
  EXPECT_THROW_KIND(run_online(art, std::vector<double>{60, 50}, AssignmentCriterion::midrange_radius),
                    ErrorKind::invalid_input);
}

TEST(Online, PitchforkDiagramContinuousWithinSegment) {
  TempDir dir("pf_cont");
  run_offline(parse_config(small_pitchfork), dir.path() / "art");
  const auto art = load_artifacts(dir.path() / "art");
  auto max_jump = [&](std::size_t count) {
    const auto d = run_online(art, uniform_points(12, 40, count), AssignmentCriterion::midrange_radius);
    double jump = 0.0;
    for (std::size_t i = 1; i < d.rows.size(); ++i)
      if (d.rows[i].basis_used == d.rows[i - 1].basis_used)
        jump = std::max(jump, std::abs(d.rows[i].observable - d.rows[i - 1].observable));
    return jump;
  };
  const double coarse = max_jump(30), fine = max_jump(120);
  EXPECT_LT(fine, coarse);
  EXPECT_LT(fine, 0.5 * coarse);
}

TEST(Artifacts, CorruptStoreDetectedBeforeSolving) {
  TempDir dir("corrupt");
  const auto copy = dir.path() / "art";
  std::filesystem::copy(modal_artifacts(), copy, std::filesystem::copy_options::recursive);
  const auto rom = copy / "rom_1.mat";
  std::filesystem::resize_file(rom, std::filesystem::file_size(rom) / 2);
  try {
    load_artifacts(copy);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::corrupt_store);
    EXPECT_NE(std::string(e.what()).find("[load]"), std::string::npos);
  }
  EXPECT_THROW_KIND(load_artifacts(dir.path() / "nowhere"), ErrorKind::corrupt_store);
}

TEST(Errors, ReportRowsAndAggregates) {
  const auto art = load_artifacts(modal_artifacts());
  const std::vector<double> held{20.3, 60.7, 100.1, 115.9};
  const auto rep = run_errors(art, held);
  ASSERT_EQ(rep.rows.size(), held.size());
  for (const auto& r : rep.rows) {
    EXPECT_TRUE(r.fom_converged);
    EXPECT_EQ(r.local.error.kind, ErrorValue::Kind::relative);
    EXPECT_LE(r.local.error.value, 1e-2) << "theta = " << r.theta;
  }
  // Aggregates recompute from the rows.
  double mean = 0, mx = 0;
  for (const auto& r : rep.rows) {
    mean += r.global2.error.value / held.size();
    mx = std::max(mx, r.global2.error.value);
  }
  EXPECT_NEAR(rep.global2.mean, mean, 1e-15 * std::max(1.0, mean));
  EXPECT_EQ(rep.global2.max, mx);
  EXPECT_EQ(rep.local.count, held.size());
  ErrorReport again = rep;
  again.recompute_aggregates();
  EXPECT_EQ(again.to_csv(), rep.to_csv());
  const std::string csv = rep.to_csv();
  EXPECT_NE(csv.find("\nmean,"), std::string::npos);
  EXPECT_NE(csv.find("\nmax,"), std::string::npos);
}

TEST(Errors, ZeroStatesReportedAbsoluteAndExcluded) {
  TempDir dir("pf_err");
  run_offline(parse_config(small_pitchfork), dir.path() / "art");
  const auto art = load_artifacts(dir.path() / "art");
  const auto rep = run_errors(art, std::vector<double>{6.1, 25.3});
  EXPECT_EQ(rep.rows[0].local.error.kind, ErrorValue::Kind::absolute);
  EXPECT_EQ(rep.rows[1].local.error.kind, ErrorValue::Kind::relative);
  EXPECT_EQ(rep.local.count, 1u);
  EXPECT_EQ(rep.local.max, rep.rows[1].local.error.value);
  EXPECT_FALSE(rep.notes.empty());
}

TEST(Errors, RejectsEmptyAndTrainingParameters) {
  const auto art = load_artifacts(modal_artifacts());
  EXPECT_THROW_KIND(run_errors(art, std::vector<double>{}), ErrorKind::empty_report);
  const double training = art.clusters.cluster_params[0].front();
  EXPECT_THROW_KIND(run_errors(art, std::vector<double>{training}), ErrorKind::duplicate_point);
}

TEST(Errors, DefaultHeldOutAvoidsTraining) {
  const std::vector<double> training{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto held = default_held_out(training);
  ASSERT_EQ(held.size(), 10u);
  for (double h : held)
    for (double t : training) EXPECT_GT(std::abs(h - t), 1e-6);
  // Midpoints that hit a training sample are nudged away.
  const auto nudged = default_held_out({0, 0.5, 1.5, 2}, 2);
  EXPECT_NE(nudged[0], 0.5);
  EXPECT_NE(nudged[1], 1.5);
}

TEST(Elbow, RerunOnStoredSnapshots) {
  TempDir dir("pf_elbow");
  const auto sum = run_offline(parse_config(small_pitchfork), dir.path() / "art");
  const auto art = load_artifacts(dir.path() / "art");
  const auto scan = run_elbow(art, 6, 0.05);
  EXPECT_EQ(scan.chosen_k, sum.k);
  EXPECT_THROW_KIND(run_elbow(art, 1000, 0.05), ErrorKind::invalid_k);
}
