#include "ltc/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltc/error.hpp"
#include "ltc/nn/optim.hpp"
#include "ltc/rng.hpp"

namespace ltc {
namespace {

constexpr std::size_t kRegionValues = 28 * 28 * 3;

nn::Tensor gather_rows(const nn::Tensor& src, const std::vector<std::size_t>& idx, std::size_t row_size,
                       nn::Shape row_shape) {
  nn::Shape shape{static_cast<int>(idx.size())};
  shape.insert(shape.end(), row_shape.begin(), row_shape.end());
  nn::Tensor out(shape);
  float* dst = out.data();
  for (std::size_t k : idx) dst = std::copy(src.data() + k * row_size, src.data() + (k + 1) * row_size, dst);
  return out;
}

struct Split {
  std::vector<std::size_t> pos, neg;
};

Split split_labels(const std::vector<std::uint8_t>& labels) {
  Split s;
  for (std::size_t k = 0; k < labels.size(); ++k) (labels[k] ? s.pos : s.neg).push_back(k);
  return s;
}

// First n entries of a deterministic shuffle of v.
std::vector<std::size_t> sample(std::vector<std::size_t> v, std::size_t n, Rng& rng) {
  n = std::min(n, v.size());
  for (std::size_t k = 0; k < n; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, v.size() - 1);
    std::swap(v[k], v[pick(rng)]);
  }
  v.resize(n);
  return v;
}

std::size_t negatives_for(std::size_t positives, std::size_t available, double ratio) {
  return std::min(available, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(positives))));
}

// Gradient of the minibatch-mean loss w.r.t. the output logit.
nn::Tensor logit_grad(const std::vector<float>& p, const std::vector<std::uint8_t>& y, LossForm form) {
  nn::Tensor g({static_cast<int>(p.size()), 1});
  const float inv = 1.0f / static_cast<float>(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const float label = y[k] ? 1.0f : 0.0f;
    if (p[k] < kLossEpsilon || p[k] > 1.0 - kLossEpsilon) continue;  // clamped: flat loss
    g[k] = (form == LossForm::full_bce ? p[k] - label : -label * (1.0f - p[k])) * inv;
  }
  return g;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidInput("train: learning rate must be >= 0");
  if (epochs < 1) throw InvalidInput("train: epochs must be >= 1");
  if (minibatch < 1) throw InvalidInput("train: minibatch must be >= 1");
  if (!(negative_ratio > 0.0)) throw InvalidInput("train: negative ratio must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("train: momentum must lie in [0,1)");
}

std::size_t RegionDataset::positives() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

RegionDataset make_dataset(const std::vector<LabeledFrame>& frames, int L, OverlapMode mode,
                           std::size_t max_regions, std::uint64_t seed) {
  std::vector<std::uint8_t> labels;
  std::vector<std::pair<std::size_t, std::size_t>> where;  // (frame, region)
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const RegionLabels rl = label_regions(frames[f].truth, L, mode);
    for (std::size_t k = 0; k < rl.labels.size(); ++k) {
      labels.push_back(rl.labels[k]);
      where.emplace_back(f, k);
    }
  }
  std::vector<std::size_t> keep(labels.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (max_regions > 0 && labels.size() > max_regions) {
    Rng rng = make_rng(seed, {0x64617461});
    const Split s = split_labels(labels);
    std::vector<std::size_t> pos = sample(s.pos, max_regions, rng);
    std::vector<std::size_t> neg = sample(s.neg, max_regions - pos.size(), rng);
    keep = std::move(pos);
    keep.insert(keep.end(), neg.begin(), neg.end());
    std::sort(keep.begin(), keep.end());
  }

  RegionDataset ds;
  ds.regions = nn::Tensor({static_cast<int>(std::max<std::size_t>(keep.size(), 1)), 28, 28, 3});
  if (keep.empty()) {
    ds.regions = nn::Tensor();
    return ds;
  }
  std::size_t cached_frame = SIZE_MAX;
  nn::Tensor cells;
  float* dst = ds.regions.data();
  for (std::size_t k : keep) {
    const auto [f, r] = where[k];
    if (f != cached_frame) {
      cells = grid_regions(frames[f].frame.pixels, L);
      cached_frame = f;
    }
    dst = std::copy(cells.data() + r * kRegionValues, cells.data() + (r + 1) * kRegionValues, dst);
    ds.labels.push_back(labels[k]);
  }
  return ds;
}

TrainReport train_student(StudentNet& student, const RegionDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const Split split = split_labels(data.labels);
  if (split.pos.empty() || split.neg.empty())
    throw TrainingError("training set holds a single class (" + std::to_string(split.pos.size()) + " positive, " +
                        std::to_string(split.neg.size()) + " negative regions)");

  Rng rng = make_rng(cfg.seed, {0x747261696e});
  std::vector<std::size_t> eval = split.pos;
  {
    std::vector<std::size_t> neg = sample(split.neg, negatives_for(split.pos.size(), split.neg.size(), cfg.negative_ratio), rng);
    eval.insert(eval.end(), neg.begin(), neg.end());
    std::sort(eval.begin(), eval.end());
  }
  std::vector<std::uint8_t> eval_labels;
  for (std::size_t k : eval) eval_labels.push_back(data.labels[k]);

  // Extension inputs: cached features when the encoder is frozen.
  nn::Tensor features;
  if (cfg.freeze_encoder) features = student.encode_batch(data.regions);

  const float lr = static_cast<float>(cfg.learning_rate);
  const float mom = static_cast<float>(cfg.momentum);
  nn::Sgd enc_opt(lr, mom), ext_opt(lr, mom);

  auto eval_loss = [&]() {
    std::vector<float> p;
    if (cfg.freeze_encoder) {
      p = student.extend_batch(gather_rows(features, eval, kFeatureDim, {kFeatureDim}));
    } else {
      p = student.infer_batch(gather_rows(data.regions, eval, kRegionValues, {28, 28, 3}));
    }
    return distill_loss(eval_labels, p, cfg.loss) / static_cast<double>(eval.size());
  };

  TrainReport report;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = split.pos;
    std::vector<std::size_t> neg =
        sample(split.neg, negatives_for(split.pos.size(), split.neg.size(), cfg.negative_ratio), rng);
    order.insert(order.end(), neg.begin(), neg.end());
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.minibatch)) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(
                                                             order.size(), start + static_cast<std::size_t>(cfg.minibatch))));
      std::vector<std::uint8_t> y;
      for (std::size_t k : idx) y.push_back(data.labels[k]);

      if (cfg.freeze_encoder) {
        nn::ForwardCache ext_cache;
        const nn::Tensor out = student.extension().forward(gather_rows(features, idx, kFeatureDim, {kFeatureDim}), ext_cache);
        const std::vector<float> p(out.values().begin(), out.values().end());
        const nn::BackwardResult g = student.extension().backward(ext_cache, logit_grad(p, y, cfg.loss), true, false);
        ext_opt.step(student.extension().params(), g.param_grads);
      } else {
        nn::ForwardCache enc_cache, ext_cache;
        const nn::Tensor feat = student.encoder().forward(gather_rows(data.regions, idx, kRegionValues, {28, 28, 3}), enc_cache);
        const nn::Tensor out = student.extension().forward(feat, ext_cache);
        const std::vector<float> p(out.values().begin(), out.values().end());
        const nn::BackwardResult ge = student.extension().backward(ext_cache, logit_grad(p, y, cfg.loss), true, true);
        const nn::BackwardResult gu = student.encoder().backward(enc_cache, ge.input_grad, false, false);
        ext_opt.step(student.extension().params(), ge.param_grads);
        enc_opt.step(student.encoder().params(), gu.param_grads);
      }
      ++report.steps;
    }
    report.loss_trace.push_back(eval_loss());
  }
  return report;
}

StudentGradients distill_gradients(const StudentNet& student, const nn::Tensor& regions,
                                   std::span<const std::uint8_t> labels, LossForm form) {
  if (regions.rank() != 4 || static_cast<std::size_t>(regions.dim(0)) != labels.size())
    throw InvalidInput("distill_gradients: expected one label per region");
  nn::ForwardCache enc_cache, ext_cache;
  const nn::Tensor feat = student.encoder().forward(regions, enc_cache);
  const nn::Tensor out = student.extension().forward(feat, ext_cache);
  const std::vector<float> p(out.values().begin(), out.values().end());
  const std::vector<std::uint8_t> y(labels.begin(), labels.end());
  nn::Tensor g = logit_grad(p, y, form);
  for (float& v : g.values()) v *= static_cast<float>(p.size());
  nn::BackwardResult ge = student.extension().backward(ext_cache, g, true, true);
  nn::BackwardResult gu = student.encoder().backward(enc_cache, ge.input_grad, false, false);
  return {distill_loss(labels, p, form), std::move(gu.param_grads), std::move(ge.param_grads)};
}

namespace {

std::vector<LabeledFrame> sampled_frames(const std::vector<SceneConfig>& scenes, const PretrainConfig& config,
                                         bool heldout) {
  if (scenes.empty()) throw InvalidInput("pretrain: no historical scenes given");
  const int L = scenes.front().regions_per_axis;
  const int stride = std::max(1, config.frame_stride);
  const int span = config.frames_per_scene * stride;
  std::vector<LabeledFrame> frames;
  for (const SceneConfig& scene : scenes) {
    if (scene.regions_per_axis != L) throw InvalidInput("pretrain: historical scenes must share L");
    std::vector<LabeledFrame> batch = generate_batch(scene, heldout ? span : 0, span);
    for (int k = 0; k < span; k += stride) frames.push_back(std::move(batch[static_cast<std::size_t>(k)]));
  }
  return frames;
}

}  // namespace

RegionDataset pretraining_dataset(const std::vector<SceneConfig>& scenes, const PretrainConfig& config) {
  return make_dataset(sampled_frames(scenes, config, false), scenes.front().regions_per_axis, config.overlap,
                      config.max_regions, config.train.seed);
}

RegionDataset heldout_dataset(const std::vector<SceneConfig>& scenes, const PretrainConfig& config) {
  return make_dataset(sampled_frames(scenes, config, true), scenes.front().regions_per_axis, config.overlap);
}

TrainReport pretrain(StudentNet& student, const std::vector<SceneConfig>& scenes, const PretrainConfig& config) {
  const RegionDataset data = pretraining_dataset(scenes, config);
  return train_student(student, data, config.train);
}

RegionScore evaluate_regions(const StudentNet& student, const RegionDataset& data) {
  RegionScore s;
  if (data.size() == 0) return s;
  const std::vector<float> p = student.infer_batch(data.regions);
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const bool pred = p[k] > 0.5f;
    if (data.labels[k]) (pred ? tp : fn)++;
    else (pred ? fp : tn)++;
  }
  s.positives = tp + fn;
  s.negatives = tn + fp;
  s.accuracy = static_cast<double>(tp + tn) / static_cast<double>(p.size());
  s.recall = s.positives ? static_cast<double>(tp) / static_cast<double>(s.positives) : 1.0;
  s.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 1.0;
  return s;
}

}  // namespace ltc
