#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ltc/labeling.hpp"
#include "ltc/student.hpp"

namespace ltc {

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 20;
  int minibatch = 64;
  bool freeze_encoder = false;
  std::uint64_t seed = 1;
  double negative_ratio = 3.0;  // negatives per positive drawn each epoch
  double momentum = 0.0;
  LossForm loss = LossForm::full_bce;

  void validate() const;
};

// Flat set of labelled 28x28x3 regions.
struct RegionDataset {
  nn::Tensor regions;  // (n, 28, 28, 3)
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t positives() const;
};

// Labels every region of every frame (teacher labels from truth boxes).
// With max_regions > 0, all positives are kept (up to the cap) and
// negatives are subsampled deterministically to fill the remainder.
RegionDataset make_dataset(const std::vector<LabeledFrame>& frames, int regions_per_axis,
                           OverlapMode mode = OverlapMode::coverage, std::size_t max_regions = 0,
                           std::uint64_t seed = 1);

struct TrainReport {
  std::vector<double> loss_trace;  // mean loss on a fixed evaluation subset after each epoch
  std::size_t steps = 0;
};

// Minimises the distillation loss over the dataset. With freeze_encoder
// only the extension is updated (the encoder stays bit-identical).
// Throws TrainingError when the data holds a single class.
TrainReport train_student(StudentNet& student, const RegionDataset& data, const TrainConfig& config);

struct StudentGradients {
  double loss = 0;  // summed distill_loss over the regions
  std::vector<nn::Tensor> encoder, extension;
};

// Gradients of the summed distillation loss over (B,28,28,3) regions with
// respect to every student parameter.
StudentGradients distill_gradients(const StudentNet& student, const nn::Tensor& regions,
                                   std::span<const std::uint8_t> labels, LossForm form = LossForm::full_bce);

struct PretrainConfig {
  TrainConfig train;
  int frames_per_scene = 20;
  int frame_stride = 3;
  std::size_t max_regions = 10000;
  OverlapMode overlap = OverlapMode::coverage;
};

// Trains on frames drawn from several historical scenes.
TrainReport pretrain(StudentNet& student, const std::vector<SceneConfig>& scenes, const PretrainConfig& config);

RegionDataset pretraining_dataset(const std::vector<SceneConfig>& scenes, const PretrainConfig& config);
// Every region of frames drawn, with the same sampling, from just after
// the pretraining window of each scene.
RegionDataset heldout_dataset(const std::vector<SceneConfig>& scenes, const PretrainConfig& config);

struct RegionScore {
  double accuracy = 0;
  double recall = 0;     // on positive regions
  double precision = 0;
  std::size_t positives = 0, negatives = 0;
};

RegionScore evaluate_regions(const StudentNet& student, const RegionDataset& data);

}  // namespace ltc
