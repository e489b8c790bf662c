#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/scene.hpp"

namespace ltc {

enum class OverlapMode : std::uint8_t {
  iou,       // label 1 iff max_k IoU(region, box_k) > 0.5
  coverage,  // label 1 iff max_k area(region ∩ box_k) / area(region) > 0.5
};

// One binary objectness label per grid cell, indexed i * L + j.
struct RegionLabels {
  int regions_per_axis = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int i, int j) const { return labels[static_cast<std::size_t>(i * regions_per_axis + j)]; }
  std::size_t positives() const;
};

BoundingBox region_box(int i, int j);

// Teacher labels for one frame. Depends only on box geometry.
RegionLabels label_regions(const std::vector<BoundingBox>& truth, int regions_per_axis,
                           OverlapMode mode = OverlapMode::coverage);

enum class LossForm : std::uint8_t {
  full_bce,       // -sum [y log p + (1-y) log(1-p)]
  positive_only,  // -sum y log p, the literal positive-term objective
};

inline constexpr double kLossEpsilon = 1e-7;

// Summed distillation loss over aligned label/posterior sequences;
// posteriors are clamped to [eps, 1-eps].
double distill_loss(std::span<const std::uint8_t> labels, std::span<const float> posteriors,
                    LossForm form = LossForm::full_bce);

// d(distill_loss)/d(posterior); zero where the clamp is active.
std::vector<double> distill_loss_grad(std::span<const std::uint8_t> labels, std::span<const float> posteriors,
                                      LossForm form = LossForm::full_bce);

}  // namespace ltc
