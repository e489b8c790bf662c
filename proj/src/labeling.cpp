#include "ltc/labeling.hpp"

#include <algorithm>
#include <cmath>

#include "ltc/error.hpp"

namespace ltc {

std::size_t RegionLabels::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

BoundingBox region_box(int i, int j) { return {28.0 * j, 28.0 * i, 28.0, 28.0, 0}; }

RegionLabels label_regions(const std::vector<BoundingBox>& truth, int L, OverlapMode mode) {
  if (L < 1) throw InvalidInput("label_regions: L must be >= 1");
  RegionLabels out{L, std::vector<std::uint8_t>(static_cast<std::size_t>(L) * L, 0)};
  const double cell_area = 28.0 * 28.0;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      const BoundingBox cell = region_box(i, j);
      double best = 0.0;
      for (const BoundingBox& b : truth) {
        const double score = mode == OverlapMode::iou ? iou(cell, b) : intersection_area(cell, b) / cell_area;
        best = std::max(best, score);
      }
      out.labels[static_cast<std::size_t>(i * L + j)] = best > 0.5 ? 1 : 0;
    }
  return out;
}

namespace {

void check_aligned(std::span<const std::uint8_t> labels, std::span<const float> posteriors) {
  if (labels.size() != posteriors.size()) throw InvalidInput("distill_loss: label/posterior length mismatch");
}

}  // namespace

double distill_loss(std::span<const std::uint8_t> labels, std::span<const float> posteriors, LossForm form) {
  check_aligned(labels, posteriors);
  double loss = 0.0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double p = std::clamp(static_cast<double>(posteriors[k]), kLossEpsilon, 1.0 - kLossEpsilon);
    const double y = labels[k] ? 1.0 : 0.0;
    loss -= y * std::log(p);
    if (form == LossForm::full_bce) loss -= (1.0 - y) * std::log(1.0 - p);
  }
  return loss;
}

std::vector<double> distill_loss_grad(std::span<const std::uint8_t> labels, std::span<const float> posteriors,
                                      LossForm form) {
  check_aligned(labels, posteriors);
  std::vector<double> g(labels.size(), 0.0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const double raw = posteriors[k];
    if (raw < kLossEpsilon || raw > 1.0 - kLossEpsilon) continue;
    const double y = labels[k] ? 1.0 : 0.0;
    g[k] = -y / raw;
    if (form == LossForm::full_bce) g[k] += (1.0 - y) / (1.0 - raw);
  }
  return g;
}

}  // namespace ltc
