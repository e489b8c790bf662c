#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/nn/network.hpp"

namespace ltc {

inline constexpr int kRegionSide = 28;
inline constexpr int kRegionChannels = 3;
inline constexpr int kFeatureDim = 128;

// Encoder: [conv3x3 -> maxpool2]* -> flatten -> dense 128. The default two
// conv stages (16, 32 channels) give 28x28x16 / 14x14x16 / 14x14x32 / 7x7x32 /
// 1568 / 128. A third stage adds a 64-channel conv without pooling (7 is odd).
std::vector<nn::LayerSpec> encoder_layers(int conv_layers = 2);
// Extension: 128 -> 32 -> 16 -> 1 (sigmoid).
std::vector<nn::LayerSpec> extension_layers();

struct ParamCounts {
  std::size_t encoder = 0;
  std::size_t extension = 0;
  std::size_t total = 0;
  bool operator==(const ParamCounts&) const = default;
};

// Student S = V o U: encoder U maps a 28x28x3 region to a 128-d feature,
// extension V maps the feature to an objectness posterior. version() is
// bumped on every applied update.
class StudentNet {
 public:
  explicit StudentNet(std::uint64_t seed = 0, int conv_layers = 2);
  StudentNet(nn::Network encoder, nn::Network extension, std::uint32_t version, int conv_layers);

  const nn::Network& encoder() const { return encoder_; }
  const nn::Network& extension() const { return extension_; }
  nn::Network& encoder() { return encoder_; }
  nn::Network& extension() { return extension_; }
  int conv_layers() const { return conv_layers_; }

  std::uint32_t version() const { return version_; }
  void set_version(std::uint32_t v) { version_ = v; }

  std::vector<float> encode(const nn::Tensor& region) const;
  // (B,28,28,3) -> (B,128); evaluated in fixed-size chunks.
  nn::Tensor encode_batch(const nn::Tensor& regions) const;

  float extend(std::span<const float> feature) const;
  // (B,128) -> B posteriors.
  std::vector<float> extend_batch(const nn::Tensor& features) const;

  float infer(const nn::Tensor& region) const;
  std::vector<float> infer_batch(const nn::Tensor& regions) const;

  bool operator==(const StudentNet&) const = default;

 private:
  nn::Network encoder_;
  nn::Network extension_;
  std::uint32_t version_ = 0;
  int conv_layers_ = 2;
};

ParamCounts param_counts(const StudentNet& student);

// Multiply-accumulate count of one region through the full student; used
// to scale the per-region inference time for architecture ablations.
std::size_t student_macs(int conv_layers = 2);

}  // namespace ltc
