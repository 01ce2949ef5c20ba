#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "locrom/sampling.hpp"
#include "support.hpp"

using namespace locrom;

namespace {

bool strictly_increasing(const std::vector<double>& v) {
  return std::adjacent_find(v.begin(), v.end(), [](double a, double b) { return !(a < b); }) == v.end();
}

}  // namespace

TEST(Sampling, UniformIncludesEndpoints) {
  SamplingPlan plan;
  plan.theta_min = 0;
  plan.theta_max = 1;
  plan.count = 3;
  const auto ps = generate_samples(plan);
  EXPECT_EQ(ps.points, (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(Sampling, PackedBandAroundCenter) {
  SamplingPlan plan;
  plan.kind = SamplingKind::packed;
  plan.theta_min = 0;
  plan.theta_max = 100;
  plan.count = 10;
  plan.pack_centers = {33};
  plan.pack_fraction = 0.4;
  const auto ps = generate_samples(plan);
  ASSERT_EQ(ps.size(), 10u);
  EXPECT_TRUE(strictly_increasing(ps.points));
  const auto in_band = std::count_if(ps.points.begin(), ps.points.end(), [](double p) { return p >= 31 && p <= 35; });
  EXPECT_EQ(in_band, 4);
  // The rest is the 6-point uniform grid.
  for (double u : {0.0, 20.0, 40.0, 60.0, 80.0, 100.0})
    EXPECT_NE(std::find(ps.points.begin(), ps.points.end(), u), ps.points.end()) << u;
}

TEST(Sampling, PackedPointsSplitAmongCenters) {
  SamplingPlan plan;
  plan.kind = SamplingKind::packed;
  plan.theta_min = 0;
  plan.theta_max = 10;
  plan.count = 21;
  plan.pack_centers = {2.5, 7.5};
  plan.pack_fraction = 0.5;
  const auto ps = generate_samples(plan);
  EXPECT_TRUE(strictly_increasing(ps.points));
  EXPECT_LE(ps.size(), 21u);
  auto near = [&](double c) {
    return std::count_if(ps.points.begin(), ps.points.end(), [c](double p) { return std::abs(p - c) <= 0.2; });
  };
  // round(10.5) = 11 packed points: 6 around the first centre, 5 around the second, plus grid hits.
  EXPECT_GE(near(2.5), 6);
  EXPECT_GE(near(7.5), 5);
}

TEST(Sampling, PackedDeduplicatesCollisions) {
  SamplingPlan plan;
  plan.kind = SamplingKind::packed;
  plan.theta_min = 0;
  plan.theta_max = 100;
  plan.count = 4;
  plan.pack_centers = {100};
  plan.pack_fraction = 0.5;
  // Both packed points fall on or near the top endpoint; the clamped one collides with the grid.
  plan.pack_half_width = 0.01;
  const auto ps = generate_samples(plan);
  EXPECT_TRUE(strictly_increasing(ps.points));
  EXPECT_LE(ps.size(), 4u);
  EXPECT_EQ(ps.points.back(), 100.0);
}

TEST(Sampling, ExplicitSortedAndDuplicateRejected) {
  SamplingPlan plan;
  plan.kind = SamplingKind::explicit_list;
  plan.theta_min = 0;
  plan.theta_max = 10;
  plan.explicit_points = {5, 3, 7};
  EXPECT_EQ(generate_samples(plan).points, (std::vector<double>{3, 5, 7}));
  plan.explicit_points = {5, 3, 3};
  EXPECT_THROW_KIND(generate_samples(plan), ErrorKind::duplicate_point);
}

TEST(Sampling, ExplicitOutsideRangeListsOffenders) {
  SamplingPlan plan;
  plan.kind = SamplingKind::explicit_list;
  plan.theta_min = 0;
  plan.theta_max = 10;
  plan.explicit_points = {-1, 5, 12.5};
  try {
    generate_samples(plan);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::out_of_domain);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("-1"), std::string::npos);
    EXPECT_NE(msg.find("12.5"), std::string::npos);
  }
}

TEST(Sampling, InvalidPlansRejected) {
  SamplingPlan plan;
  plan.count = 1;
  EXPECT_THROW_KIND(generate_samples(plan), ErrorKind::invalid_input);
  plan.count = 3;
  plan.theta_min = plan.theta_max = 2;
  EXPECT_THROW_KIND(generate_samples(plan), ErrorKind::invalid_input);
  plan.theta_max = 4;
  plan.kind = SamplingKind::packed;
  EXPECT_THROW_KIND(generate_samples(plan), ErrorKind::invalid_input);
  plan.pack_centers = {5};
  EXPECT_THROW_KIND(generate_samples(plan), ErrorKind::out_of_domain);
}

TEST(SamplingProperty, SortedBoundedAndDeterministic) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    SamplingPlan plan;
    plan.kind = trial % 2 ? SamplingKind::packed : SamplingKind::uniform;
    plan.theta_min = -10 + 20 * u(rng);
    plan.theta_max = plan.theta_min + 0.1 + 50 * u(rng);
    plan.count = 2 + static_cast<std::size_t>(60 * u(rng));
    plan.pack_fraction = 0.05 + 0.9 * u(rng);
    plan.pack_half_width = 0.001 + 0.1 * u(rng);
    for (int c = 0; c < 1 + trial % 3; ++c)
      plan.pack_centers.push_back(plan.theta_min + (plan.theta_max - plan.theta_min) * u(rng));
    const auto a = generate_samples(plan);
    const auto b = generate_samples(plan);
    EXPECT_EQ(a.points, b.points);
    EXPECT_TRUE(strictly_increasing(a.points));
    EXPECT_LE(a.size(), plan.count);
    if (plan.kind == SamplingKind::uniform) {
      EXPECT_EQ(a.size(), plan.count);
    }
    EXPECT_GE(a.points.front(), plan.theta_min);
    EXPECT_LE(a.points.back(), plan.theta_max);
  }
}

TEST(Sampling, PointsFileSkipsCommentsAndRejectsGarbage) {
  test_support::TempDir dir("points");
  const auto path = dir.path() / "pts.txt";
  std::ofstream(path) << "# held out\n1.5\n\n  2.25\n";
  EXPECT_EQ(load_points_file(path), (std::vector<double>{1.5, 2.25}));
  std::ofstream(path) << "1.5\n2x\n";
  EXPECT_THROW_KIND(load_points_file(path), ErrorKind::invalid_input);
  EXPECT_THROW_KIND(load_points_file(dir.path() / "missing.txt"), ErrorKind::invalid_input);
}
