#include <gtest/gtest.h>

#include <random>

#include "ltc/error.hpp"
#include "ltc/spatial.hpp"
#include "support/reference.hpp"

using namespace ltc;
using nn::Tensor;

namespace {

QualityMap random_map(int L, std::mt19937_64& rng, double p = 0.5) {
  QualityMap q = QualityMap::uniform(L, false);
  std::bernoulli_distribution coin(p);
  for (auto& v : q.hq) v = coin(rng);
  return q;
}

StudentNet constant_student(float posterior) {
  StudentNet s(1);
  for (Tensor& p : s.extension().params()) p.fill(0.0f);
  s.extension().params().back()[0] = std::log(posterior / (1.0f - posterior));
  return s;
}

}  // namespace

TEST(Classify, ConstantStudents) {
  std::mt19937_64 rng(1);
  const Tensor f = ref::random_frame(3, rng);
  EXPECT_EQ(classify_regions(f, constant_student(0.9f), 3), QualityMap::uniform(3, true));
  EXPECT_EQ(classify_regions(f, constant_student(0.1f), 3), QualityMap::uniform(3, false));
  const std::vector<float> post{0.5f, 0.51f, 0.2f, 0.9f};
  EXPECT_EQ(classify_from_posteriors(post, 2).hq, (std::vector<std::uint8_t>{0, 1, 0, 1}));
}

TEST(Degrade, Examples) {
  const Tensor c = degrade(Tensor({28, 28, 3}, 0.3f), 4);
  EXPECT_EQ(c.shape(), (nn::Shape{7, 7, 3}));
  for (float v : c.values()) EXPECT_FLOAT_EQ(v, 0.3f);
  EXPECT_EQ(degrade(Tensor({28, 28, 3}), 14).shape(), (nn::Shape{2, 2, 3}));
  EXPECT_THROW(degrade(Tensor({28, 28, 3}), 28), InvalidInput);
  EXPECT_THROW(degrade(Tensor({28, 28, 3}), 3), InvalidInput);
  Tensor block({28, 28, 3});
  block.at({1, 0, 0}) = 1.0f;
  block.at({1, 1, 0}) = 1.0f;
  EXPECT_FLOAT_EQ(degrade(block, 2).at({0, 0, 0}), 0.5f);
}

TEST(Compress, AllHqRoundTripIsIdentity) {
  std::mt19937_64 rng(2);
  const Tensor f = ref::random_frame(4, rng);
  for (int r : kValidFactors) EXPECT_EQ(reconstruct(compress(f, 0, QualityMap::uniform(4, true), r)), f);
}

TEST(Compress, AllLqConstantFrameRoundTrip) {
  const Tensor f({56, 56, 3}, 0.6f);
  EXPECT_EQ(reconstruct(compress(f, 0, QualityMap::uniform(2, false), 7)), f);
}

TEST(Compress, MixedMapMatchesPerRegionOracle) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor f = ref::random_frame(3, rng);
    const QualityMap q = random_map(3, rng);
    const int r = kValidFactors[trial % 4];
    const auto out = grid_split(reconstruct(compress(f, 1, q, r)), 3);
    const auto in = grid_split(f, 3);
    for (int c = 0; c < 9; ++c) {
      const auto& want = q.hq[static_cast<std::size_t>(c)] ? in[static_cast<std::size_t>(c)]
                                                           : upsample(degrade(in[static_cast<std::size_t>(c)], r), r);
      EXPECT_EQ(out[static_cast<std::size_t>(c)], want);
    }
  }
}

TEST(Compress, PayloadMismatchIsFormatError) {
  std::mt19937_64 rng(4);
  CompressedFrame cf = compress(ref::random_frame(2, rng), 0, QualityMap::uniform(2, true), 4);
  cf.cells.pop_back();
  EXPECT_THROW(reconstruct(cf), FormatError);
  cf = compress(ref::random_frame(2, rng), 0, QualityMap::uniform(2, true), 4);
  cf.qmap.hq[0] = 0;
  EXPECT_THROW(reconstruct(cf), FormatError);
}

TEST(ByteCost, Examples) {
  EXPECT_EQ(frame_cost(16, 256, 4), 602160u);
  const std::size_t hq_payload = frame_cost(16, 256, 4) - 48, lq_payload = frame_cost(16, 0, 4) - 48;
  EXPECT_EQ(hq_payload, 16 * lq_payload);
  EXPECT_GE(frame_cost(1, 0, 14, false), 17u);
}

TEST(ByteCost, MatchesFormulaAndWireSize) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int L = 1 + static_cast<int>(rng() % 5);
    const Tensor f = ref::random_frame(L, rng);
    const QualityMap q = random_map(L, rng);
    const int r = kValidFactors[rng() % 4];
    const bool lq = (rng() & 1) != 0;
    const CompressedFrame cf = compress(f, 7, q, r, lq);
    EXPECT_EQ(byte_cost(cf), ref::formula_byte_cost(L, q.hq_count(), r, lq));
    EXPECT_EQ(encode_frame(cf).size(), byte_cost(cf));
  }
}

TEST(ByteCost, StrictlyMonotone) {
  for (int L : {1, 4, 16}) {
    const std::size_t cells = static_cast<std::size_t>(L) * L;
    for (std::size_t hq = 0; hq < cells; ++hq) EXPECT_LT(frame_cost(L, hq, 4), frame_cost(L, hq + 1, 4));
    for (std::size_t hq = 0; hq < cells; ++hq)
      for (int k = 0; k + 1 < 4; ++k) EXPECT_GT(frame_cost(L, hq, kValidFactors[k]), frame_cost(L, hq, kValidFactors[k + 1]));
  }
}

TEST(Wire, RoundTrip) {
  std::mt19937_64 rng(6);
  const Tensor f = ref::random_frame(3, rng);
  const CompressedFrame cf = compress(f, 42, random_map(3, rng), 7);
  const Bytes wire = encode_frame(cf);
  const CompressedFrame back = decode_frame(wire);
  EXPECT_EQ(back.frame_index, 42u);
  EXPECT_EQ(back.factor, 7);
  EXPECT_EQ(back.qmap, cf.qmap);
  for (std::size_t c = 0; c < cf.cells.size(); ++c) {
    if (cf.qmap.hq[c]) {
      EXPECT_EQ(back.cells[c], cf.cells[c]);  // k/255 samples survive 8-bit coding
    } else {
      for (std::size_t k = 0; k < cf.cells[c].size(); ++k) EXPECT_NEAR(back.cells[c][k], cf.cells[c][k], 0.5 / 255 + 1e-6);
    }
  }
  Bytes bad = wire;
  bad[0] = 'Z';
  EXPECT_THROW(decode_frame(bad), FormatError);
  EXPECT_THROW(decode_frame(std::span(wire).first(wire.size() - 1)), FormatError);
  bad = wire;
  bad[10] = 5;
  EXPECT_THROW(decode_frame(bad), FormatError);
}

TEST(PixelQualityMap, MatchesCells) {
  QualityMap q = QualityMap::uniform(2, false);
  q.hq[1] = 1;
  const PixelQuality p = pixel_quality(q);
  EXPECT_EQ(p.height, 56);
  EXPECT_TRUE(p.at(0, 30));
  EXPECT_FALSE(p.at(0, 27));
  EXPECT_FALSE(p.at(30, 30));
}

TEST(Overlay, WritesOnlyHqCells) {
  std::mt19937_64 rng(7);
  const Tensor f = ref::random_frame(2, rng);
  QualityMap q = QualityMap::uniform(2, false);
  q.hq[3] = 1;
  Tensor canvas({56, 56, 3}, 0.0f);
  overlay_hq(canvas, compress(f, 0, q, 4, false));
  EXPECT_EQ(canvas.at({40, 40, 2}), f.at({40, 40, 2}));
  EXPECT_EQ(canvas.at({10, 10, 2}), 0.0f);
}
