#include "ltc/spatial.hpp"

#include <algorithm>
#include <cmath>

#include "ltc/error.hpp"

namespace ltc {
namespace {

constexpr int kSide = 28;

std::size_t lq_cell_samples(int r) {
  const std::size_t s = static_cast<std::size_t>(kSide / r);
  return s * s * 3;
}

void copy_cell_out(const nn::Tensor& frame, int L, int i, int j, float* dst) {
  const int side = kSide * L;
  for (int r = 0; r < kSide; ++r) {
    const float* src = frame.data() + (static_cast<std::size_t>(kSide * i + r) * side + kSide * j) * 3;
    dst = std::copy(src, src + kSide * 3, dst);
  }
}

void copy_cell_in(nn::Tensor& frame, int L, int i, int j, const float* src) {
  const int side = kSide * L;
  for (int r = 0; r < kSide; ++r) {
    float* dst = frame.data() + (static_cast<std::size_t>(kSide * i + r) * side + kSide * j) * 3;
    std::copy(src + r * kSide * 3, src + (r + 1) * kSide * 3, dst);
  }
}

void check_frame(const nn::Tensor& pixels, int L) {
  if (pixels.rank() != 3 || pixels.dim(2) != 3 || pixels.dim(0) != kSide * L || pixels.dim(1) != kSide * L)
    throw InvalidInput("compress: frame " + nn::shape_string(pixels.shape()) + " does not match L=" +
                       std::to_string(L));
}

std::uint8_t quantize(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

}  // namespace

QualityMap QualityMap::uniform(int L, bool high) {
  return {L, std::vector<std::uint8_t>(static_cast<std::size_t>(L) * L, high ? 1 : 0)};
}

std::size_t QualityMap::hq_count() const {
  return static_cast<std::size_t>(std::count(hq.begin(), hq.end(), std::uint8_t{1}));
}

QualityMap classify_from_posteriors(std::span<const float> posteriors, int L) {
  if (posteriors.size() != static_cast<std::size_t>(L) * L)
    throw InvalidInput("classify_regions: expected L*L posteriors");
  QualityMap q{L, {}};
  for (float p : posteriors) q.hq.push_back(p > 0.5f ? 1 : 0);
  return q;
}

QualityMap classify_regions(const nn::Tensor& pixels, const StudentNet& student, int L) {
  return classify_from_posteriors(student.infer_batch(grid_regions(pixels, L)), L);
}

bool valid_factor(int r) { return std::find(std::begin(kValidFactors), std::end(kValidFactors), r) != std::end(kValidFactors); }

nn::Tensor degrade(const nn::Tensor& region, int r) {
  if (!valid_factor(r)) throw InvalidInput("degrade: factor " + std::to_string(r) + " is not one of 2, 4, 7, 14");
  if (region.shape() != nn::Shape{kSide, kSide, 3}) throw InvalidInput("degrade: expected a 28x28x3 region");
  const int s = kSide / r;
  nn::Tensor out({s, s, 3});
  const double n = static_cast<double>(r * r);
  for (int y = 0; y < s; ++y)
    for (int x = 0; x < s; ++x)
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;  // exact for <= 196 floats, so constant blocks stay constant
        for (int dy = 0; dy < r; ++dy)
          for (int dx = 0; dx < r; ++dx) sum += region.data()[((y * r + dy) * kSide + (x * r + dx)) * 3 + c];
        out.data()[(y * s + x) * 3 + c] = static_cast<float>(sum / n);
      }
  return out;
}

nn::Tensor upsample(const nn::Tensor& small, int r) {
  if (!valid_factor(r)) throw InvalidInput("upsample: invalid factor");
  const int s = kSide / r;
  if (small.shape() != nn::Shape{s, s, 3}) throw InvalidInput("upsample: payload shape does not match factor");
  nn::Tensor out({kSide, kSide, 3});
  for (int y = 0; y < kSide; ++y)
    for (int x = 0; x < kSide; ++x)
      for (int c = 0; c < 3; ++c) out.data()[(y * kSide + x) * 3 + c] = small.data()[((y / r) * s + x / r) * 3 + c];
  return out;
}

CompressedFrame compress(const nn::Tensor& pixels, std::uint32_t frame_index, const QualityMap& qmap, int r,
                         bool include_lq) {
  const int L = qmap.regions_per_axis;
  if (L < 1 || qmap.hq.size() != static_cast<std::size_t>(L) * L) throw InvalidInput("compress: malformed quality map");
  check_frame(pixels, L);
  if (!valid_factor(r)) throw InvalidInput("compress: factor " + std::to_string(r) + " is not one of 2, 4, 7, 14");
  CompressedFrame cf{frame_index, r, qmap, include_lq, {}};
  cf.cells.reserve(qmap.hq.size());
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      if (qmap.at(i, j) || include_lq) {
        nn::Tensor cell({kSide, kSide, 3});
        copy_cell_out(pixels, L, i, j, cell.data());
        cf.cells.push_back(qmap.at(i, j) ? std::move(cell) : degrade(cell, r));
      } else {
        cf.cells.emplace_back();
      }
    }
  return cf;
}

namespace {

void check_payloads(const CompressedFrame& cf) {
  const int L = cf.regions_per_axis();
  if (L < 1 || cf.qmap.hq.size() != static_cast<std::size_t>(L) * L || cf.cells.size() != cf.qmap.hq.size())
    throw FormatError("compressed frame: payload count does not match the quality map");
  if (!valid_factor(cf.factor)) throw FormatError("compressed frame: invalid factor");
  const int s = kSide / cf.factor;
  for (std::size_t k = 0; k < cf.cells.size(); ++k) {
    const nn::Shape want = cf.qmap.hq[k] ? nn::Shape{kSide, kSide, 3}
                                         : (cf.includes_lq ? nn::Shape{s, s, 3} : nn::Shape{});
    if (cf.cells[k].shape() != want) throw FormatError("compressed frame: payload " + std::to_string(k) + " has the wrong shape");
  }
}

}  // namespace

nn::Tensor reconstruct(const CompressedFrame& cf) {
  check_payloads(cf);
  const int L = cf.regions_per_axis();
  nn::Tensor frame({kSide * L, kSide * L, 3});
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      const nn::Tensor& cell = cf.cells[static_cast<std::size_t>(i * L + j)];
      if (cf.qmap.at(i, j)) copy_cell_in(frame, L, i, j, cell.data());
      else if (cf.includes_lq) copy_cell_in(frame, L, i, j, upsample(cell, cf.factor).data());
    }
  return frame;
}

void overlay_hq(nn::Tensor& frame, const CompressedFrame& cf) {
  check_payloads(cf);
  const int L = cf.regions_per_axis();
  check_frame(frame, L);
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      if (cf.qmap.at(i, j)) copy_cell_in(frame, L, i, j, cf.cells[static_cast<std::size_t>(i * L + j)].data());
}

PixelQuality pixel_quality(const QualityMap& q) {
  const int L = q.regions_per_axis;
  const int side = kSide * L;
  PixelQuality pq = PixelQuality::uniform(side, side, false);
  for (int r = 0; r < side; ++r)
    for (int c = 0; c < side; ++c) pq.hq[static_cast<std::size_t>(r) * side + c] = q.at(r / kSide, c / kSide) ? 1 : 0;
  return pq;
}

std::size_t frame_cost(int L, std::size_t hq_cells, int r, bool include_lq) {
  const std::size_t cells = static_cast<std::size_t>(L) * L;
  const std::size_t lq = include_lq ? (cells - hq_cells) * lq_cell_samples(r) : 0;
  return kFrameHeaderBytes + (cells + 7) / 8 + hq_cells * kHqCellBytes + lq;
}

std::size_t byte_cost(const CompressedFrame& cf) {
  return frame_cost(cf.regions_per_axis(), cf.qmap.hq_count(), cf.factor, cf.includes_lq);
}

Bytes encode_frame(const CompressedFrame& cf) {
  check_payloads(cf);
  const int L = cf.regions_per_axis();
  ByteWriter w;
  w.magic("LTCF");
  w.u32(cf.frame_index);
  w.u16(static_cast<std::uint16_t>(L));
  w.u8(static_cast<std::uint8_t>(cf.factor));
  w.u8(cf.includes_lq ? 1 : 0);
  const std::size_t samples = byte_cost(cf) - kFrameHeaderBytes - (cf.qmap.cells() + 7) / 8;
  w.u32(static_cast<std::uint32_t>(samples));
  std::vector<std::uint8_t> bits((cf.qmap.cells() + 7) / 8, 0);
  for (std::size_t k = 0; k < cf.qmap.cells(); ++k)
    if (cf.qmap.hq[k]) bits[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
  w.raw(bits);
  for (const nn::Tensor& cell : cf.cells)
    for (float v : cell.values()) w.u8(quantize(v));
  return w.take();
}

CompressedFrame decode_frame(ByteReader& r) {
  r.expect_magic("LTCF");
  CompressedFrame cf;
  cf.frame_index = r.u32();
  const int L = r.u16();
  cf.factor = r.u8();
  const std::uint8_t flags = r.u8();
  const std::uint32_t samples = r.u32();
  if (L < 1) throw FormatError("compressed frame: L must be positive");
  if (!valid_factor(cf.factor)) throw FormatError("compressed frame: invalid factor");
  if (flags > 1) throw FormatError("compressed frame: unknown flags");
  cf.includes_lq = flags & 1;
  const std::size_t cells = static_cast<std::size_t>(L) * L;
  const auto bits = r.raw((cells + 7) / 8);
  cf.qmap.regions_per_axis = L;
  for (std::size_t k = 0; k < cells; ++k) cf.qmap.hq.push_back((bits[k / 8] >> (k % 8)) & 1);
  if (samples != frame_cost(L, cf.qmap.hq_count(), cf.factor, cf.includes_lq) - kFrameHeaderBytes - bits.size())
    throw FormatError("compressed frame: sample count does not match the quality map");
  const int s = kSide / cf.factor;
  for (std::size_t k = 0; k < cells; ++k) {
    nn::Shape shape;
    if (cf.qmap.hq[k]) shape = {kSide, kSide, 3};
    else if (cf.includes_lq) shape = {s, s, 3};
    if (shape.empty()) {
      cf.cells.emplace_back();
      continue;
    }
    nn::Tensor cell(shape);
    const auto raw = r.raw(cell.size());
    for (std::size_t q = 0; q < cell.size(); ++q) cell[q] = static_cast<float>(raw[q]) / 255.0f;
    cf.cells.push_back(std::move(cell));
  }
  return cf;
}

CompressedFrame decode_frame(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  CompressedFrame cf = decode_frame(r);
  if (r.remaining() != 0) throw FormatError("compressed frame: trailing bytes");
  return cf;
}

}  // namespace ltc
