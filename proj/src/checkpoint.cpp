#include "ltc/checkpoint.hpp"

#include <zlib.h>

#include "ltc/error.hpp"

namespace ltc {
namespace {

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data.data(), static_cast<uInt>(data.size())));
}

void write_table(ByteWriter& w, const std::vector<nn::Tensor>& tensors, std::uint8_t role) {
  for (const nn::Tensor& t : tensors) {
    w.u8(role);
    w.u8(static_cast<std::uint8_t>(t.rank()));
    w.u16(0);
    for (std::size_t d = 0; d < 4; ++d) w.u32(d < t.rank() ? static_cast<std::uint32_t>(t.dim(d)) : 0u);
  }
}

void write_values(ByteWriter& w, const std::vector<nn::Tensor>& tensors) {
  for (const nn::Tensor& t : tensors)
    for (float v : t.values()) w.f32(v);
}

std::vector<nn::Tensor> reference_params(const nn::Network& net) { return net.params(); }

}  // namespace

Bytes save_checkpoint(const StudentNet& student, CheckpointScope scope) {
  const bool full = scope == CheckpointScope::full;
  const auto& enc = student.encoder().params();
  const auto& ext = student.extension().params();
  ByteWriter w;
  w.magic("LTCK");
  w.u16(kCheckpointFormatVersion);
  w.u8(static_cast<std::uint8_t>(scope));
  w.u8(static_cast<std::uint8_t>(student.conv_layers()));
  w.u32(student.version());
  w.u32(static_cast<std::uint32_t>((full ? enc.size() : 0) + ext.size()));
  if (full) write_table(w, enc, 0);
  write_table(w, ext, 1);
  if (full) write_values(w, enc);
  write_values(w, ext);
  const std::uint32_t crc = crc32_of(w.bytes());
  w.u32(crc);
  return w.take();
}

Checkpoint load_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kCheckpointHeaderBytes + 4) throw FormatError("checkpoint: truncated header");
  ByteReader r(bytes);
  r.expect_magic("LTCK");
  const std::uint16_t fmt = r.u16();
  if (fmt != kCheckpointFormatVersion) throw FormatError("checkpoint: unsupported format version " + std::to_string(fmt));
  const std::uint8_t scope_raw = r.u8();
  if (scope_raw > 1) throw FormatError("checkpoint: unknown scope flag");
  Checkpoint ck;
  ck.scope = static_cast<CheckpointScope>(scope_raw);
  ck.conv_layers = r.u8();
  if (ck.conv_layers < 1 || ck.conv_layers > 3) throw FormatError("checkpoint: unsupported encoder depth");
  ck.version = r.u32();
  const std::uint32_t count = r.u32();

  const StudentNet shape_ref(0, ck.conv_layers);
  std::vector<nn::Tensor> expected_enc = reference_params(shape_ref.encoder());
  const std::vector<nn::Tensor> expected_ext = reference_params(shape_ref.extension());
  const bool full = ck.scope == CheckpointScope::full;
  if (count != (full ? expected_enc.size() : 0) + expected_ext.size())
    throw FormatError("checkpoint: tensor count does not match scope");

  std::vector<std::pair<std::uint8_t, nn::Shape>> table;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t role = r.u8();
    const std::uint8_t rank = r.u8();
    if (r.u16() != 0 || rank < 1 || rank > 4) throw FormatError("checkpoint: malformed tensor table");
    nn::Shape shape;
    for (int d = 0; d < 4; ++d) {
      const std::uint32_t dim = r.u32();
      if (d < rank) shape.push_back(static_cast<int>(dim));
      else if (dim != 0) throw FormatError("checkpoint: malformed tensor table");
    }
    table.emplace_back(role, std::move(shape));
  }
  std::size_t t = 0;
  auto read_group = [&](const std::vector<nn::Tensor>& expected, std::uint8_t role) {
    std::vector<nn::Tensor> out;
    for (const nn::Tensor& e : expected) {
      if (table[t].first != role || table[t].second != e.shape())
        throw FormatError("checkpoint: tensor " + std::to_string(t) + " has unexpected role or shape");
      ++t;
      out.emplace_back(e.shape());
    }
    return out;
  };
  if (full) ck.encoder = read_group(expected_enc, 0);
  ck.extension = read_group(expected_ext, 1);

  for (auto* group : {&ck.encoder, &ck.extension})
    for (nn::Tensor& tensor : *group)
      for (float& v : tensor.values()) v = r.f32();

  const std::size_t body = r.position();
  const std::uint32_t stored_crc = r.u32();
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  if (stored_crc != crc32_of(bytes.first(body))) throw FormatError("checkpoint: checksum mismatch");
  return ck;
}

std::size_t checkpoint_size(CheckpointScope scope, int conv_layers) {
  const StudentNet ref(0, conv_layers);
  std::size_t tensors = ref.extension().params().size();
  std::size_t values = ref.extension().param_count();
  if (scope == CheckpointScope::full) {
    tensors += ref.encoder().params().size();
    values += ref.encoder().param_count();
  }
  return kCheckpointHeaderBytes + kCheckpointTableEntryBytes * tensors + 4 * values + 4;
}

StudentNet student_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.scope != CheckpointScope::full) throw FormatError("checkpoint: extension-only payload cannot build a student");
  StudentNet s(0, ckpt.conv_layers);
  apply_checkpoint(s, ckpt);
  return s;
}

void apply_checkpoint(StudentNet& student, const Checkpoint& ckpt) {
  if (ckpt.conv_layers != student.conv_layers())
    throw FormatError("checkpoint: encoder depth differs from the target student");
  auto same_shapes = [](const std::vector<nn::Tensor>& a, const std::vector<nn::Tensor>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].shape() != b[i].shape()) return false;
    return true;
  };
  const bool full = ckpt.scope == CheckpointScope::full;
  if (!same_shapes(ckpt.extension, student.extension().params()) ||
      (full && !same_shapes(ckpt.encoder, student.encoder().params())))
    throw FormatError("checkpoint: parameter shapes differ from the target student");
  if (full) student.encoder().params() = ckpt.encoder;
  student.extension().params() = ckpt.extension;
  student.set_version(ckpt.version);
}

}  // namespace ltc
