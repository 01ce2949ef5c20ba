#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "locrom/clustering.hpp"
#include "locrom/snapshots.hpp"
#include "support.hpp"

using namespace locrom;
using locrom::test_support::random_matrix;

namespace {

DenseMatrix row_data(std::vector<double> values) {
  DenseMatrix m(1, values.size());
  for (std::size_t s = 0; s < values.size(); ++s) m(0, s) = values[s];
  return m;
}

// Four radius-1 balls centred on the corners of a side-10 square.
DenseMatrix four_blobs(std::size_t per_blob, std::vector<std::size_t>& labels, std::uint64_t seed = 5) {
  const double corners[4][2] = {{0, 0}, {10, 0}, {0, 10}, {10, 10}};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(2, 4 * per_blob);
  labels.clear();
  std::size_t s = 0;
  for (int b = 0; b < 4; ++b)
    for (std::size_t i = 0; i < per_blob; ++i, ++s) {
      double x, y;
      do {
        x = u(rng);
        y = u(rng);
      } while (x * x + y * y > 1.0);
      m(0, s) = corners[b][0] + x;
      m(1, s) = corners[b][1] + y;
      labels.push_back(static_cast<std::size_t>(b));
    }
  return m;
}

double naive_variance(const DenseMatrix& data, const std::vector<std::size_t>& assignment, const DenseMatrix& means) {
  double v = 0.0;
  for (std::size_t s = 0; s < data.cols(); ++s)
    for (std::size_t i = 0; i < data.rows(); ++i) {
      const double d = data(i, s) - means(i, assignment[s]);
      v += d * d;
    }
  return v;
}

// Same partition up to relabelling.
bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  if (a.size() != b.size()) return false;
  std::map<std::size_t, std::size_t> fwd, back;
  for (std::size_t s = 0; s < a.size(); ++s) {
    auto [f, fnew] = fwd.emplace(a[s], b[s]);
    auto [r, rnew] = back.emplace(b[s], a[s]);
    if (f->second != b[s] || r->second != a[s]) return false;
  }
  return true;
}

}  // namespace

TEST(Kmeans, TwoPairsOnALine) {
  const auto m = kmeans(row_data({0, 1, 10, 11}), {2});
  EXPECT_EQ(m.assignment[0], m.assignment[1]);
  EXPECT_EQ(m.assignment[2], m.assignment[3]);
  EXPECT_NE(m.assignment[0], m.assignment[2]);
  std::vector<double> means{m.means(0, 0), m.means(0, 1)};
  std::sort(means.begin(), means.end());
  EXPECT_DOUBLE_EQ(means[0], 0.5);
  EXPECT_DOUBLE_EQ(means[1], 10.5);
  EXPECT_DOUBLE_EQ(m.variance, 1.0);
}

TEST(Kmeans, FourBlobsRecovered) {
  std::vector<std::size_t> labels;
  const auto data = four_blobs(50, labels);
  const auto m = kmeans(data, {4});
  // Majority cluster per blob must be distinct, and almost every point agrees.
  std::size_t agree = 0;
  std::set<std::size_t> used;
  for (std::size_t b = 0; b < 4; ++b) {
    std::map<std::size_t, std::size_t> votes;
    for (std::size_t s = 0; s < labels.size(); ++s)
      if (labels[s] == b) ++votes[m.assignment[s]];
    const auto best = std::max_element(votes.begin(), votes.end(),
                                       [](const auto& x, const auto& y) { return x.second < y.second; });
    used.insert(best->first);
    agree += best->second;
  }
  EXPECT_EQ(used.size(), 4u);
  EXPECT_GE(static_cast<double>(agree), 0.99 * static_cast<double>(labels.size()));
  // Each point sits at its nearest mean.
  for (std::size_t s = 0; s < data.cols(); ++s)
    for (std::size_t c = 0; c < 4; ++c)
      EXPECT_LE(detail::squared_distance(data.col(s), m.means.col(m.assignment[s])),
                detail::squared_distance(data.col(s), m.means.col(c)) + 1e-12);
}

TEST(Kmeans, KEqualsSGivesZeroVariance) {
  const auto m = kmeans(row_data({3, -1, 7, 2.5, 9}), {5});
  EXPECT_EQ(m.variance, 0.0);
  std::set<std::size_t> distinct(m.assignment.begin(), m.assignment.end());
  EXPECT_EQ(distinct.size(), 5u);
}

TEST(Kmeans, InvalidK) {
  const auto data = row_data({0, 1, 2});
  EXPECT_THROW_KIND(kmeans(data, {1}), ErrorKind::invalid_k);
  EXPECT_THROW_KIND(kmeans(data, {4}), ErrorKind::invalid_k);
}

TEST(Kmeans, DeterministicGivenSeed) {
  std::mt19937_64 rng(8);
  const auto data = random_matrix(3, 60, rng);
  const auto a = kmeans(data, {5, 6, 300, 77});
  const auto b = kmeans(data, {5, 6, 300, 77});
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.variance, b.variance);
  EXPECT_EQ(a.restarts_used, 6u);
}

TEST(Kmeans, DuplicatePointsStillFillEveryCluster) {
  const auto m = kmeans(row_data({1, 1, 1, 1, 5}), {3});
  std::vector<std::size_t> counts(3, 0);
  for (auto a : m.assignment) ++counts[a];
  for (auto c : counts) EXPECT_GT(c, 0u);
}

TEST(Variance, Examples) {
  const auto data = row_data({0, 2});
  DenseMatrix mean(1, 1);
  mean(0, 0) = 1.0;
  EXPECT_DOUBLE_EQ(variance(data, std::vector<std::size_t>{0, 0}, mean), 2.0);
  DenseMatrix at(1, 2);
  at(0, 0) = 0;
  at(0, 1) = 2;
  EXPECT_EQ(variance(data, std::vector<std::size_t>{0, 1}, at), 0.0);
  EXPECT_THROW_KIND(variance(data, std::vector<std::size_t>{0, 2}, at), ErrorKind::invalid_assignment);
}

TEST(Variance, MatchesNaiveOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = random_matrix(4, 20, rng, 3.0);
    const auto means = random_matrix(4, 3, rng);
    std::vector<std::size_t> assignment(20);
    for (auto& a : assignment) a = rng() % 3;
    const double v = variance(data, assignment, means);
    const double oracle = naive_variance(data, assignment, means);
    EXPECT_NEAR(v, oracle, 1e-12 * oracle);
  }
}

TEST(KmeansProperty, LloydNeverIncreasesVariance) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const auto data = random_matrix(2 + trial % 4, 40, rng);
    const auto m = kmeans(data, {2 + static_cast<std::size_t>(trial % 6), 3, 300, static_cast<std::uint64_t>(trial)});
    for (std::size_t i = 1; i < m.variance_history.size(); ++i)
      EXPECT_LE(m.variance_history[i], m.variance_history[i - 1] * (1 + 1e-12));
  }
}

TEST(KmeansProperty, CentroidConditionAndRecomputedVariance) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto data = random_matrix(3, 30, rng);
    const auto m = kmeans(data, {4, 4, 300, static_cast<std::uint64_t>(trial)});
    const auto recomputed = detail::cluster_means(data, m.assignment, m.k);
    EXPECT_LE(test_support::max_abs_diff(recomputed.data(), m.means.data()), 1e-10);
    const double oracle = naive_variance(data, m.assignment, m.means);
    EXPECT_NEAR(m.variance, oracle, 1e-10 * oracle);
  }
}

TEST(KmeansProperty, PermutationGivesSamePartition) {
  std::vector<std::size_t> labels;
  const auto data = four_blobs(15, labels, 9);
  std::vector<std::size_t> perm(data.cols());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto shuffled = select_columns(data, perm);
    const auto a = kmeans(data, {4});
    const auto b = kmeans(shuffled, {4});
    std::vector<std::size_t> back(data.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) back[perm[i]] = b.assignment[i];
    EXPECT_TRUE(same_partition(a.assignment, back));
  }
}

TEST(Elbow, FourBlobsElbowAfterFour) {
  std::vector<std::size_t> labels;
  const auto data = four_blobs(40, labels);
  ElbowOptions opt;
  opt.k_max = 8;
  opt.alpha = 0.1;
  const auto scan = elbow_select(data, opt);
  ASSERT_EQ(scan.k_values.size(), 7u);
  const double first_drop = scan.variance_at(2) - scan.variance_at(3);
  EXPECT_GE(scan.chosen_k, 5u);
  EXPECT_FALSE(scan.no_elbow);
  EXPECT_LE(scan.variance_at(4) - scan.variance_at(5), opt.alpha * first_drop);
  // The chosen K is the first to meet the threshold.
  for (std::size_t k = 3; k < scan.chosen_k; ++k)
    EXPECT_GT(scan.variance_at(k - 1) - scan.variance_at(k), opt.alpha * first_drop);
  EXPECT_EQ(scan.chosen_k, 5u);
}

TEST(Elbow, VarianceNonIncreasingInK) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    const auto data = random_matrix(3, 40, rng);
    ElbowOptions opt;
    opt.k_max = 12;
    opt.restarts = 3;
    opt.seed = static_cast<std::uint64_t>(trial);
    const auto scan = elbow_select(data, opt);
    for (std::size_t i = 1; i < scan.variances.size(); ++i)
      EXPECT_LE(scan.variances[i], scan.variances[i - 1] * (1 + 1e-9));
    EXPECT_NE(std::find(scan.k_values.begin(), scan.k_values.end(), scan.chosen_k), scan.k_values.end());
  }
}

TEST(Elbow, TightBlobIsUndefined) {
  DenseMatrix data(2, 12);
  for (std::size_t s = 0; s < data.cols(); ++s) {
    data(0, s) = 3.0;
    data(1, s) = -1.0;
  }
  EXPECT_THROW_KIND(elbow_select(data, {}), ErrorKind::elbow_undefined);
}

TEST(Elbow, NoElbowFallsBackToKMax) {
  // Evenly spaced points: successive drops shrink slowly, so a tiny alpha is never met.
  std::vector<double> v(30);
  std::iota(v.begin(), v.end(), 0.0);
  ElbowOptions opt;
  opt.k_max = 4;
  opt.alpha = 0.01;
  const auto scan = elbow_select(row_data(v), opt);
  EXPECT_TRUE(scan.no_elbow);
  EXPECT_EQ(scan.chosen_k, 4u);
}

TEST(Elbow, InvalidOptions) {
  const auto data = row_data({0, 1, 2, 3, 4});
  EXPECT_THROW_KIND(elbow_select(data, {6}), ErrorKind::invalid_k);
  EXPECT_THROW_KIND(elbow_select(data, {2}), ErrorKind::invalid_k);
  ElbowOptions opt;
  opt.k_max = 4;
  opt.alpha = 1.0;
  EXPECT_THROW_KIND(elbow_select(data, opt), ErrorKind::invalid_input);
}

TEST(Elbow, PitchforkDropsShrink) {
  const auto model = fom::make_pitchfork_model(64, 1.0);
  SamplingPlan plan;
  plan.kind = SamplingKind::packed;
  plan.theta_min = 5;
  plan.theta_max = 50;
  plan.count = 40;
  plan.pack_centers = {fom::chafee_infante::laplacian_eigenvalue(64, 1.0, 1)};
  const auto snaps = generate_snapshots(model, generate_samples(plan));
  const auto scan = elbow_select(snaps, {8});
  for (std::size_t i = 1; i < scan.variances.size(); ++i) EXPECT_LE(scan.variances[i], scan.variances[i - 1]);
  for (std::size_t k = 4; k <= 8; ++k) {
    const double prev = scan.variance_at(k - 2) - scan.variance_at(k - 1);
    const double cur = scan.variance_at(k - 1) - scan.variance_at(k);
    EXPECT_LE(cur, prev * (1 + 1e-9)) << "k = " << k;
  }
}

TEST(Elbow, CsvExport) {
  const auto scan = elbow_select(row_data({0, 1, 10, 11, 20, 21}), {4});
  test_support::TempDir dir("elbow");
  write_elbow_csv(dir.path() / "elbow.csv", scan);
  std::ifstream in(dir.path() / "elbow.csv");
  std::string header, line;
  std::getline(in, header);
  EXPECT_EQ(header, "k,variance,chosen");
  std::size_t rows = 0, chosen = 0;
  while (std::getline(in, line)) {
    ++rows;
    chosen += line.back() == '1';
  }
  EXPECT_EQ(rows, 3u);
  EXPECT_EQ(chosen, 1u);
}
