#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "lhc/init.hpp"
#include "test_util.hpp"

using namespace lhc;

namespace {

double recompute_sse(std::span<const Vector> pts, const KmeansResult &r) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t d = 0; d < pts[i].size(); ++d) {
      const double diff = pts[i][d] - r.centers[r.assignments[i]][d];
      sse += diff * diff;
    }
  return sse;
}

std::vector<Vector> blobs(std::mt19937_64 &rng, const std::vector<Vector> &centers, std::size_t per,
                          double sigma, std::vector<std::size_t> &truth) {
  std::normal_distribution<double> n(0.0, sigma);
  std::vector<Vector> pts;
  truth.clear();
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < per; ++i) {
      Vector p = centers[c];
      for (auto &v : p) v += n(rng);
      pts.push_back(p);
      truth.push_back(c);
    }
  return pts;
}

// True when a and b induce the same partition.
bool same_partition(const std::vector<std::size_t> &a, const std::vector<std::size_t> &b) {
  if (a.size() != b.size()) return false;
  std::map<std::size_t, std::size_t> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it, fresh] = ab.emplace(a[i], b[i]);
    if (!fresh && it->second != b[i]) return false;
    auto [jt, fresh2] = ba.emplace(b[i], a[i]);
    if (!fresh2 && jt->second != a[i]) return false;
  }
  return true;
}

std::vector<SegmentSequence> as_sequences(const std::vector<Vector> &pts, std::size_t chunk) {
  std::vector<SegmentSequence> out;
  for (std::size_t i = 0; i < pts.size(); i += chunk) {
    SegmentSequence s;
    s.id = "s" + std::to_string(i);
    for (std::size_t j = i; j < std::min(pts.size(), i + chunk); ++j) s.segments.push_back(pts[j]);
    s.global = {0.0};
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> flat(const std::vector<std::vector<std::size_t>> &v) {
  std::vector<std::size_t> out;
  for (const auto &x : v) out.insert(out.end(), x.begin(), x.end());
  return out;
}

} // namespace

TEST(InitRandom, SingleStateIsZero) {
  std::mt19937_64 rng(1);
  const LabelSpace s{2, 1, 1, 2, 1};
  std::vector<SegmentSequence> data{tst::random_sequence(rng, s, 4), tst::random_sequence(rng, s, 3)};
  for (const auto &z : init_random(data, 1, 7)) EXPECT_EQ(z, std::vector<std::size_t>(z.size(), 0));
}

TEST(InitRandom, DeterministicAndShaped) {
  std::mt19937_64 rng(2);
  const LabelSpace s{2, 1, 1, 2, 1};
  std::vector<SegmentSequence> data{tst::random_sequence(rng, s, 5), tst::random_sequence(rng, s, 2)};
  const auto a = init_random(data, 3, 11), b = init_random(data, 3, 11);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].size(), 5u);
  EXPECT_EQ(a[1].size(), 2u);
}

TEST(InitRandom, FrequenciesWithinThreeSigma) {
  std::vector<SegmentSequence> data(100);
  for (auto &s : data) {
    s.segments.assign(100, Vector{0.0});
    s.global = {0.0};
  }
  const auto z = flat(init_random(data, 4, 2024));
  ASSERT_EQ(z.size(), 10000u);
  std::array<std::size_t, 4> counts{};
  for (auto v : z) counts.at(v)++;
  const double sigma = std::sqrt(10000.0 * 0.25 * 0.75);
  for (auto c : counts) EXPECT_LE(std::abs(static_cast<double>(c) - 2500.0), 3.0 * sigma);
}

TEST(Kmeans, SingleClusterIsMean) {
  std::mt19937_64 rng(3);
  std::vector<Vector> pts;
  for (int i = 0; i < 50; ++i) pts.push_back({tst::uniform(rng, -3, 3), tst::uniform(rng, 0, 1)});
  const auto r = kmeans(pts, 1, 3, 5);
  Vector mean(2, 0.0);
  for (const auto &p : pts)
    for (int d = 0; d < 2; ++d) mean[d] += p[d] / 50.0;
  EXPECT_NEAR(r.centers[0][0], mean[0], 1e-12);
  EXPECT_NEAR(r.centers[0][1], mean[1], 1e-12);
  double var_n = 0.0;
  for (const auto &p : pts)
    for (int d = 0; d < 2; ++d) var_n += (p[d] - mean[d]) * (p[d] - mean[d]);
  EXPECT_NEAR(r.sse, var_n, 1e-9);
}

TEST(Kmeans, SeparatedBlobsAreRecovered) {
  std::mt19937_64 rng(4);
  std::vector<std::size_t> truth;
  const auto pts = blobs(rng, {{0.0, 0.0}, {10.0, 0.0}}, 40, 1.0, truth);
  const auto r = kmeans(pts, 2, 10, 1);
  EXPECT_TRUE(same_partition(r.assignments, truth));
  EXPECT_EQ(r.centers.size(), 2u);
}

TEST(Kmeans, InvariantsOnRandomInputs) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = tst::pick(rng, 5, 60), d = tst::pick(rng, 1, 4);
    std::vector<Vector> pts(n, Vector(d));
    for (auto &p : pts)
      for (auto &v : p) v = tst::uniform(rng, -5, 5);
    const std::size_t k = tst::pick(rng, 1, std::min<std::size_t>(n, 6));
    const auto r = kmeans(pts, k, 10, t);
    ASSERT_EQ(r.centers.size(), k);
    for (auto a : r.assignments) ASSERT_LT(a, k);
    EXPECT_NEAR(r.sse, recompute_sse(pts, r), 1e-9 * (1.0 + r.sse));
    for (std::size_t i = 1; i < r.sse_history.size(); ++i)
      EXPECT_LE(r.sse_history[i], r.sse_history[i - 1] + 1e-9);
    ASSERT_EQ(r.restart_sse.size(), 10u);
    for (double s : r.restart_sse) EXPECT_LE(r.sse, s);
    std::set<std::size_t> used(r.assignments.begin(), r.assignments.end());
    EXPECT_EQ(used.size(), k);
  }
}

TEST(Kmeans, Deterministic) {
  std::mt19937_64 rng(6);
  std::vector<Vector> pts(30, Vector(3));
  for (auto &p : pts)
    for (auto &v : p) v = tst::uniform(rng, -1, 1);
  const auto a = kmeans(pts, 4, 5, 9), b = kmeans(pts, 4, 5, 9);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.sse, b.sse);
}

TEST(Kmeans, TooFewDistinctPoints) {
  const std::vector<Vector> pts{{1.0}, {1.0}, {2.0}};
  EXPECT_EQ(count_distinct(pts), 2u);
  try {
    (void)kmeans(pts, 3, 1, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateInput);
  }
  EXPECT_NO_THROW((void)kmeans(pts, 2, 1, 0));
}

TEST(InitKmeansFeatures, BlobsGiveBlobIds) {
  std::mt19937_64 rng(7);
  std::vector<std::size_t> truth;
  const auto pts = blobs(rng, {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}}, 30, 1.0, truth);
  // Shuffle so sequences mix blobs.
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<Vector> shuffled;
  std::vector<std::size_t> shuffled_truth;
  for (auto i : order) {
    shuffled.push_back(pts[i]);
    shuffled_truth.push_back(truth[i]);
  }
  const auto data = as_sequences(shuffled, 7);
  const auto z = init_kmeans_features(data, 3, 1);
  EXPECT_TRUE(same_partition(flat(z), shuffled_truth));
  EXPECT_EQ(z, init_kmeans_features(data, 3, 1));
  for (const auto &zz : init_kmeans_features(data, 1, 1)) EXPECT_EQ(zz, std::vector<std::size_t>(zz.size(), 0));
}

TEST(InitKmeansCategorical, CategoriesBecomeClusters) {
  std::mt19937_64 rng(8);
  std::vector<std::vector<std::size_t>> labels(12);
  for (auto &l : labels) {
    l.resize(tst::pick(rng, 1, 6));
    for (auto &v : l) v = tst::pick(rng, 0, 3);
  }
  labels[0] = {0, 1, 2, 3};
  std::vector<std::size_t> all;
  for (const auto &l : labels) all.insert(all.end(), l.begin(), l.end());
  const auto z = init_kmeans_categorical(labels, 4, 4, 3);
  EXPECT_TRUE(same_partition(flat(z), all));
  EXPECT_EQ(z, init_kmeans_categorical(labels, 4, 4, 3));
}

TEST(InitKmeansCategorical, SingleCategoryAndRangeCheck) {
  const std::vector<std::vector<std::size_t>> one{{0, 0}, {0}};
  for (const auto &z : init_kmeans_categorical(one, 1, 3, 0)) EXPECT_EQ(z, std::vector<std::size_t>(z.size(), 0));
  const std::vector<std::vector<std::size_t>> bad{{0, 2}};
  try {
    (void)init_kmeans_categorical(bad, 2, 2, 0);
    FAIL();
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelOutOfRange);
  }
}
