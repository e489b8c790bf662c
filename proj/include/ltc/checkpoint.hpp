#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/bytes.hpp"
#include "ltc/student.hpp"

// Student checkpoint (.ltck). All integers and floats little-endian.
//
//   offset size  field
//   0      4     magic "LTCK"
//   4      2     format version (1)
//   6      1     scope: 0 = full, 1 = extension only
//   7      1     encoder conv layer count
//   8      4     student version
//   12     4     tensor count T
//   16     20*T  tensor table: role u8 (0 encoder, 1 extension), rank u8,
//                reserved u16 (0), dims u32[4] (unused dims 0)
//   ...          float32 values of every tensor, table order, row-major
//   end-4  4     CRC-32 (zlib) of all preceding bytes
//
// Tensor order is layer declaration order, weights before bias. Conv
// kernels are (kh, kw, in_channels, out_channels); dense weights are
// (inputs, outputs); the flatten feeding the first dense layer is
// row-major over (H, W, C).
namespace ltc {

enum class CheckpointScope : std::uint8_t { full = 0, extension_only = 1 };

struct Checkpoint {
  CheckpointScope scope = CheckpointScope::full;
  std::uint32_t version = 0;
  int conv_layers = 2;
  std::vector<nn::Tensor> encoder;  // empty for extension-only checkpoints
  std::vector<nn::Tensor> extension;
};

inline constexpr std::uint16_t kCheckpointFormatVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 16;
inline constexpr std::size_t kCheckpointTableEntryBytes = 20;

Bytes save_checkpoint(const StudentNet& student, CheckpointScope scope);
// Throws FormatError on bad magic/version/scope, shape mismatch, checksum
// failure, truncation or trailing bytes.
Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes);

// Exact encoded size for a student of the given depth.
std::size_t checkpoint_size(CheckpointScope scope, int conv_layers = 2);

StudentNet student_from_checkpoint(const Checkpoint& ckpt);
// Replaces the extension (and the encoder for full checkpoints) and adopts
// the checkpoint's version. Validates everything before mutating.
void apply_checkpoint(StudentNet& student, const Checkpoint& ckpt);

}  // namespace ltc
