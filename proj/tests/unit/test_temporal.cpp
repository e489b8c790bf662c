#include <gtest/gtest.h>

#include <random>

#include "ltc/error.hpp"
#include "ltc/temporal.hpp"
#include "support/reference.hpp"

using namespace ltc;

namespace {

// Feature maps whose pairwise differences equal a target matrix is not
// generally realisable; the matrix entry points take arbitrary matrices.
std::vector<double> matrix_of(const std::vector<FeatureMap>& f) { return difference_matrix(f); }

std::vector<FeatureMap> random_maps(int n, int L, std::mt19937_64& rng) {
  std::vector<FeatureMap> out;
  for (int k = 0; k < n; ++k) out.push_back(ref::random_feature_map(L, k, rng));
  return out;
}

void expect_cover(const std::vector<Partition>& parts, int first, int n) {
  ASSERT_FALSE(parts.empty());
  EXPECT_LE(parts.size(), static_cast<std::size_t>(n));
  EXPECT_EQ(parts.front().first, first);
  EXPECT_EQ(parts.back().last, first + n - 1);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    EXPECT_LE(parts[k].first, parts[k].last);
    EXPECT_TRUE(parts[k].contains(parts[k].representative));
    if (k > 0) EXPECT_EQ(parts[k].first, parts[k - 1].last + 1);
  }
}

}  // namespace

TEST(FrameDifference, Examples) {
  std::mt19937_64 rng(1);
  const FeatureMap f = ref::random_feature_map(4, 0, rng);
  EXPECT_EQ(frame_difference(f, f), 0.0);
  FeatureMap a{1, 0, std::vector<float>(kFeatureDim, 0.0f)}, b = a;
  a.values[0] = 1.0f;
  b.values[1] = 1.0f;
  EXPECT_DOUBLE_EQ(frame_difference(a, b), 2.0);
  EXPECT_THROW(frame_difference(a, f), InvalidInput);
}

TEST(FrameDifference, MatchesBruteForceAndSymmetric) {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const auto a = ref::random_feature_map(3, 0, rng), b = ref::random_feature_map(3, 1, rng);
    const double d = frame_difference(a, b);
    EXPECT_NEAR(d, ref::brute_frame_difference(a, b), 1e-6 * (1 + d));
    EXPECT_DOUBLE_EQ(d, frame_difference(b, a));
    EXPECT_GE(d, 0.0);
  }
}

TEST(FrameFeatures, MatchPerRegionEncode) {
  const StudentNet s(3);
  std::mt19937_64 rng(4);
  LabeledFrame lf;
  lf.frame.pixels = ref::random_frame(2, rng);
  lf.frame.index = 9;
  const FeatureMap fm = frame_features(lf.frame, s, 2);
  EXPECT_EQ(fm.frame_index, 9);
  ASSERT_EQ(fm.values.size(), 4u * kFeatureDim);
  const auto regions = grid_split(lf.frame.pixels, 2);
  for (int c = 0; c < 4; ++c) {
    const auto f = s.encode(regions[static_cast<std::size_t>(c)]);
    for (int k = 0; k < kFeatureDim; ++k) EXPECT_NEAR(fm.cell(c)[k], f[static_cast<std::size_t>(k)], 1e-5);
  }
  const auto batch = batch_features({lf, lf}, s, 2);
  EXPECT_EQ(batch[0].values, batch[1].values);
  EXPECT_THROW(frame_features(lf.frame, s, 3), InvalidInput);
}

TEST(FrameFeatures, SixteenBySixteenGrid) {
  const StudentNet s(5);
  SceneConfig c;
  const auto frames = generate_batch(c, 0, 1);
  EXPECT_EQ(frame_features(frames[0].frame, s, 16).values.size(), 256u * kFeatureDim);
}

TEST(Partition, IdenticalFramesOnePartition) {
  std::mt19937_64 rng(6);
  const FeatureMap f = ref::random_feature_map(2, 0, rng);
  std::vector<FeatureMap> maps(6, f);
  for (int k = 0; k < 6; ++k) maps[static_cast<std::size_t>(k)].frame_index = 10 + k;
  const auto parts = partition_batch(maps, 1e-9);
  ASSERT_EQ(parts.size(), 1u);
  EXPECT_EQ(parts[0], (Partition{10, 15, 10}));
}

TEST(Partition, TinyThresholdAllSingletons) {
  std::mt19937_64 rng(7);
  const auto maps = random_maps(7, 2, rng);
  const auto d = matrix_of(maps);
  double min_off = 1e300;
  for (int i = 0; i < 7; ++i)
    for (int j = i + 1; j < 7; ++j) min_off = std::min(min_off, d[static_cast<std::size_t>(i) * 7 + j]);
  const auto parts = partition_batch(maps, min_off);
  ASSERT_EQ(parts.size(), 7u);
  for (int k = 0; k < 7; ++k) EXPECT_EQ(parts[static_cast<std::size_t>(k)], (Partition{k, k, k}));
  EXPECT_THROW(partition_batch(maps, 0.0), InvalidInput);
  EXPECT_THROW(partition_batch({}, 1.0), InvalidInput);
}

TEST(Partition, HandSetFiveFrames) {
  // Frames 0-2 close, 3 far, 4 close to 3.
  const int n = 5;
  std::vector<double> d(25, 0.0);
  auto set = [&](int i, int j, double v) { d[static_cast<std::size_t>(i * n + j)] = d[static_cast<std::size_t>(j * n + i)] = v; };
  set(0, 1, 1), set(0, 2, 2), set(1, 2, 1), set(0, 3, 9), set(1, 3, 9), set(2, 3, 9);
  set(0, 4, 9), set(1, 4, 9), set(2, 4, 9), set(3, 4, 2);
  const auto parts = partition_by_matrix(d, n, 3.0);
  EXPECT_EQ(parts, (std::vector<Partition>{{0, 2, 1}, {3, 4, 3}}));
  const auto brute = ref::brute_partitions(d, n, 3.0);
  ASSERT_EQ(brute.size(), parts.size());
}

TEST(Partition, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> size(1, 8);
  std::uniform_real_distribution<double> th(0.5, 10.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = size(rng);
    const auto d = ref::random_distances(n, rng);
    const double t = th(rng);
    const auto parts = partition_by_matrix(d, n, t, 100);
    const auto brute = ref::brute_partitions(d, n, t);
    ASSERT_EQ(parts.size(), brute.size());
    for (std::size_t k = 0; k < parts.size(); ++k) {
      EXPECT_EQ(parts[k].first, 100 + brute[k].first);
      EXPECT_EQ(parts[k].last, 100 + brute[k].second);
      EXPECT_EQ(parts[k].representative, 100 + ref::brute_representative(d, n, brute[k].first, brute[k].second));
    }
    expect_cover(parts, 100, n);
  }
}

TEST(Partition, CoverageOnManyRandomBatches) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> size(1, 30);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = size(rng);
    const auto d = ref::random_distances(n, rng);
    expect_cover(partition_by_matrix(d, n, 1.0 + static_cast<double>(trial % 10), trial), trial, n);
  }
}

TEST(Partition, CountNonIncreasingInThreshold) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = ref::random_distances(30, rng);
    std::size_t prev = SIZE_MAX;
    for (int k = 1; k <= 20; ++k) {
      const auto parts = partition_by_matrix(d, 30, 0.55 * k);
      EXPECT_LE(parts.size(), prev);
      prev = parts.size();
    }
  }
}

TEST(Representative, Examples) {
  std::mt19937_64 rng(11);
  const auto maps = random_maps(2, 2, rng);
  EXPECT_EQ(representative({maps[0]}), 0);
  EXPECT_EQ(representative(maps), 0);
  std::vector<double> d(9, 0.0);
  d[1] = d[3] = 1;  // D(1,2)
  d[2] = d[6] = 4;  // D(1,3)
  d[5] = d[7] = 1;  // D(2,3)
  EXPECT_EQ(representative_by_matrix(d, 3, 0, 2), 1);
}

TEST(Representative, MatchesExhaustiveArgmin) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 8);
    const auto maps = random_maps(n, 2, rng);
    EXPECT_EQ(representative(maps), ref::brute_representative(matrix_of(maps), n, 0, n - 1));
  }
}

TEST(FeatureCompare, SeriesShapesAndStaticScene) {
  const StudentNet s(13);
  SceneConfig c;
  c.regions_per_axis = 2;
  c.background.noise = 0;
  const auto frames = generate_batch(c, 0, 6);
  const auto series = feature_compare(frames, s, 2, {FeatureKind::encoder, FeatureKind::raw_pixel, FeatureKind::edge_count});
  ASSERT_EQ(series.size(), 3u);
  for (const auto& sr : series) {
    EXPECT_EQ(sr.values.size(), 5u);
    for (double v : sr.values) EXPECT_EQ(v, 0.0);
  }
}

TEST(FeatureCompare, EncoderLessNoiseSensitiveThanRawPixels) {
  const StudentNet s(14);
  SceneConfig quiet;
  quiet.regions_per_axis = 2;
  quiet.background.noise = 0.0;
  SceneConfig noisy = quiet;
  noisy.background.noise = 0.1;
  auto mean = [](const std::vector<double>& v) {
    double t = 0;
    for (double x : v) t += x;
    return t / static_cast<double>(v.size());
  };
  const auto q = feature_compare(generate_batch(quiet, 0, 5), s, 2, {FeatureKind::encoder, FeatureKind::raw_pixel});
  const auto n = feature_compare(generate_batch(noisy, 0, 5), s, 2, {FeatureKind::encoder, FeatureKind::raw_pixel});
  EXPECT_EQ(mean(q[1].values), 0.0);
  EXPECT_GT(mean(n[1].values), 0.01);
  EXPECT_EQ(n[0].values.size(), 4u);
}
