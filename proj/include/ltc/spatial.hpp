#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/bytes.hpp"
#include "ltc/scene.hpp"
#include "ltc/student.hpp"

namespace ltc {

// Per-cell HQ (1) / LQ (0) decisions, indexed i * L + j.
struct QualityMap {
  int regions_per_axis = 0;
  std::vector<std::uint8_t> hq;

  static QualityMap uniform(int regions_per_axis, bool high);
  std::size_t hq_count() const;
  std::size_t cells() const { return hq.size(); }
  bool at(int i, int j) const { return hq[static_cast<std::size_t>(i * regions_per_axis + j)] != 0; }
  bool operator==(const QualityMap&) const = default;
};

// Cell is HQ iff its posterior exceeds 0.5.
QualityMap classify_from_posteriors(std::span<const float> posteriors, int regions_per_axis);
QualityMap classify_regions(const nn::Tensor& pixels, const StudentNet& student, int regions_per_axis);

inline constexpr int kValidFactors[] = {2, 4, 7, 14};
bool valid_factor(int r);

// Mean-pools a 28x28x3 region over r x r blocks.
nn::Tensor degrade(const nn::Tensor& region, int r);
// Nearest-neighbour upsampling of a degraded region back to 28x28x3.
nn::Tensor upsample(const nn::Tensor& small, int r);

struct CompressedFrame {
  std::uint32_t frame_index = 0;
  int factor = 4;  // LQ downsample factor r
  QualityMap qmap;
  bool includes_lq = true;
  // One payload per cell in row-major cell order: 28x28x3 for HQ cells,
  // (28/r)x(28/r)x3 for LQ cells, empty for LQ cells when !includes_lq.
  std::vector<nn::Tensor> cells;

  int regions_per_axis() const { return qmap.regions_per_axis; }
};

CompressedFrame compress(const nn::Tensor& pixels, std::uint32_t frame_index, const QualityMap& qmap, int r,
                         bool include_lq = true);
// HQ cells verbatim, LQ cells upsampled; omitted LQ cells are zero.
nn::Tensor reconstruct(const CompressedFrame& cf);
// Writes the HQ cells of cf over an existing frame.
void overlay_hq(nn::Tensor& frame, const CompressedFrame& cf);

PixelQuality pixel_quality(const QualityMap& qmap);

inline constexpr std::size_t kFrameHeaderBytes = 16;
inline constexpr std::size_t kHqCellBytes = 28 * 28 * 3;

// Wire size: 16-byte header + ceil(L^2/8) map bytes + one byte per sample.
std::size_t frame_cost(int regions_per_axis, std::size_t hq_cells, int r, bool include_lq = true);
std::size_t byte_cost(const CompressedFrame& cf);

// Wire layout (little-endian), exactly byte_cost(cf) bytes:
//   0  4  magic "LTCF"
//   4  4  frame index
//   8  2  L
//   10 1  r
//   11 1  flags (bit 0: LQ payloads present)
//   12 4  sample byte count
//   16    quality map, ceil(L^2/8) bytes, cell k at bit (k % 8) of byte k / 8
//   ...   cell payloads in row-major cell order, 8-bit samples round(255 v)
Bytes encode_frame(const CompressedFrame& cf);
CompressedFrame decode_frame(std::span<const std::uint8_t> bytes);
// Decodes from a reader positioned at a frame; used by message decoders.
CompressedFrame decode_frame(ByteReader& reader);

}  // namespace ltc
