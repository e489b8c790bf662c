#include "ltc/student.hpp"

#include <algorithm>

#include "ltc/error.hpp"

namespace ltc {
namespace {

constexpr int kEncodeChunk = 256;

const nn::Shape kRegionShape{kRegionSide, kRegionSide, kRegionChannels};

void check_unit_range(std::span<const float> v) {
  for (float x : v)
    if (!(x >= 0.0f && x <= 1.0f)) throw InvalidInput("region values must lie in [0,1]");
}

}  // namespace

std::vector<nn::LayerSpec> encoder_layers(int conv_layers) {
  if (conv_layers < 1 || conv_layers > 3) throw InvalidInput("student supports 1 to 3 conv layers");
  std::vector<nn::LayerSpec> layers{nn::LayerSpec::input()};
  const int channels[] = {16, 32, 64};
  for (int i = 0; i < conv_layers; ++i) {
    layers.push_back(nn::LayerSpec::conv(3, channels[i]));
    if (i < 2) layers.push_back(nn::LayerSpec::maxpool(2));
  }
  layers.push_back(nn::LayerSpec::flatten());
  layers.push_back(nn::LayerSpec::dense(kFeatureDim));
  return layers;
}

std::vector<nn::LayerSpec> extension_layers() {
  return {nn::LayerSpec::input(), nn::LayerSpec::dense(32), nn::LayerSpec::dense(16),
          nn::LayerSpec::dense(1, nn::Activation::sigmoid)};
}

StudentNet::StudentNet(std::uint64_t seed, int conv_layers)
    : encoder_(kRegionShape, encoder_layers(conv_layers)),
      extension_({kFeatureDim}, extension_layers()),
      conv_layers_(conv_layers) {
  encoder_.init_glorot(seed * 2 + 1);
  extension_.init_glorot(seed * 2 + 2);
}

StudentNet::StudentNet(nn::Network encoder, nn::Network extension, std::uint32_t version, int conv_layers)
    : encoder_(std::move(encoder)), extension_(std::move(extension)), version_(version), conv_layers_(conv_layers) {
  if (encoder_.input_shape() != kRegionShape || encoder_.output_shape() != nn::Shape{kFeatureDim} ||
      extension_.input_shape() != nn::Shape{kFeatureDim} || extension_.output_shape() != nn::Shape{1})
    throw InvalidInput("encoder/extension shapes do not compose into a student");
}

std::vector<float> StudentNet::encode(const nn::Tensor& region) const {
  if (region.shape() != kRegionShape)
    throw InvalidInput("encode: expected a 28x28x3 region, got " + nn::shape_string(region.shape()));
  check_unit_range(region.values());
  nn::Tensor f = encoder_.forward(region);
  return {f.values().begin(), f.values().end()};
}

nn::Tensor StudentNet::encode_batch(const nn::Tensor& regions) const {
  if (regions.rank() != 4 || !std::equal(kRegionShape.begin(), kRegionShape.end(), regions.shape().begin() + 1))
    throw InvalidInput("encode_batch: expected (B,28,28,3), got " + nn::shape_string(regions.shape()));
  check_unit_range(regions.values());
  const int batch = regions.dim(0);
  const std::size_t region_size = nn::shape_size(kRegionShape);
  nn::Tensor out({batch, kFeatureDim});
  for (int start = 0; start < batch; start += kEncodeChunk) {
    const int n = std::min(kEncodeChunk, batch - start);
    std::vector<float> chunk(regions.data() + start * region_size, regions.data() + (start + n) * region_size);
    nn::Tensor f = encoder_.forward(nn::Tensor({n, kRegionSide, kRegionSide, kRegionChannels}, std::move(chunk)));
    std::copy(f.values().begin(), f.values().end(), out.data() + static_cast<std::size_t>(start) * kFeatureDim);
  }
  return out;
}

float StudentNet::extend(std::span<const float> feature) const {
  if (feature.size() != static_cast<std::size_t>(kFeatureDim))
    throw InvalidInput("extend: expected a 128-d feature");
  nn::Tensor f({kFeatureDim}, std::vector<float>(feature.begin(), feature.end()));
  return extension_.forward(f)[0];
}

std::vector<float> StudentNet::extend_batch(const nn::Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != kFeatureDim)
    throw InvalidInput("extend_batch: expected (B,128) features");
  nn::Tensor p = extension_.forward(features);
  return {p.values().begin(), p.values().end()};
}

float StudentNet::infer(const nn::Tensor& region) const {
  const std::vector<float> f = encode(region);
  return extend(f);
}

std::vector<float> StudentNet::infer_batch(const nn::Tensor& regions) const {
  return extend_batch(encode_batch(regions));
}

ParamCounts param_counts(const StudentNet& student) {
  ParamCounts c;
  c.encoder = student.encoder().param_count();
  c.extension = student.extension().param_count();
  c.total = c.encoder + c.extension;
  return c;
}

std::size_t student_macs(int conv_layers) {
  const nn::Network enc(kRegionShape, encoder_layers(conv_layers));
  const nn::Network ext({kFeatureDim}, extension_layers());
  std::size_t macs = 0;
  auto count = [&](const nn::Network& net) {
    const auto& shapes = net.layer_output_shapes();
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
      const auto& spec = net.layers()[i];
      if (spec.kind == nn::LayerKind::conv2d) {
        const nn::Shape& out = shapes[i];
        const nn::Shape& in = i == 0 ? net.input_shape() : shapes[i - 1];
        macs += static_cast<std::size_t>(out[0]) * out[1] * out[2] * spec.kernel * spec.kernel * in[2];
      } else if (spec.kind == nn::LayerKind::dense) {
        const nn::Shape& in = i == 0 ? net.input_shape() : shapes[i - 1];
        macs += static_cast<std::size_t>(in[0]) * spec.units;
      }
    }
  };
  count(enc);
  count(ext);
  return macs;
}

}  // namespace ltc
