#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ltc/bytes.hpp"
#include "ltc/checkpoint.hpp"
#include "ltc/metrics.hpp"
#include "ltc/spatial.hpp"
#include "ltc/temporal.hpp"
#include "ltc/training.hpp"

namespace ltc {

// Uplink batch (.ltcb). Little-endian.
//
//   0  4    magic "LTCB"
//   4  4    batch index
//   8  4    student version used at the source
//   12 2    partition count M
//   14 2    frame count K
//   16 12M  partition table: first u32, last u32, representative u32
//   ...     K times: frame byte length u32, CompressedFrame bytes
//
// Frames appear in strictly increasing frame-index order and each is the
// representative of one partition.
struct BatchMessage {
  std::uint32_t batch_index = 0;
  std::uint32_t student_version = 0;
  std::vector<Partition> partitions;
  std::vector<CompressedFrame> frames;
};

inline constexpr std::size_t kBatchHeaderBytes = 16;
inline constexpr std::size_t kPartitionEntryBytes = 12;
inline constexpr std::size_t kFrameLengthBytes = 4;

// Bytes a batch message adds on top of its frames' byte_cost.
std::size_t batch_overhead(std::size_t partitions, std::size_t frames);

void validate(const BatchMessage& msg);
Bytes encode_batch_message(const BatchMessage& msg);
BatchMessage decode_batch_message(std::span<const std::uint8_t> bytes);

// Downlink model update (.ltcu). Little-endian.
//
//   0  4  magic "LTCU"
//   4  1  scope: 0 = full, 1 = extension only
//   5  3  reserved (0)
//   8  4  new student version
//   12 4  checkpoint byte length
//   16    checkpoint (.ltck) bytes; its scope and version match the header
struct UpdateMessage {
  CheckpointScope scope = CheckpointScope::extension_only;
  std::uint32_t version = 0;
  Bytes checkpoint;
};

inline constexpr std::size_t kUpdateHeaderBytes = 16;

UpdateMessage make_update(const StudentNet& student, CheckpointScope scope);
Bytes encode_update_message(const UpdateMessage& msg);
UpdateMessage decode_update_message(std::span<const std::uint8_t> bytes);

enum class LtcMode { ltc, spatial_only, temporal_only };
std::string to_string(LtcMode m);

struct PipelineConfig {
  int batch_size = 30;  // N
  int batches = 8;
  double th = 4000.0;  // temporal threshold on summed squared feature distance
  int r = 4;           // LQ downsample factor
  double alpha = 0.5;  // teacher HQ-coverage threshold
  OverlapMode overlap = OverlapMode::coverage;

  // Drift protocol.
  bool drift_updates = true;
  double delta = 0.8;
  int update_window = 1;  // batches of representatives used for retraining
  std::size_t update_max_regions = 4000;
  TrainConfig extension_train{0.05, 60, 64, true, 11, 3.0, 0.0, LossForm::full_bce};
  TrainConfig full_train{0.01, 30, 64, false, 12, 3.0, 0.0, LossForm::full_bce};

  // Baselines.
  int dds_low_r = 4;
  int reducto_profile_period = 4;  // every k-th batch is a profiling batch
  double reducto_target_f1 = 0.9;
  int uniform_r = 2;  // 1 = full quality

  void validate() const;
};

// Per-region inference time for a student of the given depth.
double source_region_time(const NetworkConfig& net, int conv_layers);

// Student-side half of the pipeline: temporal filtering, then spatial
// compression of the representatives.
class SourceNode {
 public:
  SourceNode(StudentNet student, int regions_per_axis, const PipelineConfig& cfg, LtcMode mode);

  BatchMessage process_batch(std::uint32_t batch_index, const std::vector<LabeledFrame>& frames);
  void apply_update(const UpdateMessage& msg);

  const StudentNet& student() const { return student_; }
  std::size_t regions_encoded() const { return regions_encoded_; }  // last batch

 private:
  StudentNet student_;
  int L_;
  PipelineConfig cfg_;
  LtcMode mode_;
  std::size_t regions_encoded_ = 0;
};

// Fraction of teacher-positive regions with student posterior > 0.5; 1.0
// when there are none. Teacher labels come from the full-quality frames.
double hit_rate(const StudentNet& student, const std::vector<LabeledFrame>& frames, int regions_per_axis,
                OverlapMode overlap = OverlapMode::coverage);

struct DriftState {
  StudentNet student;  // server copy of the deployed student
  double delta = 0.8;
  std::vector<double> hit_rates;
  std::vector<UpdateRecord> log;
  std::deque<std::vector<LabeledFrame>> window;  // recent representatives, one entry per batch
  int postponed = 0;
};

// Retrains on the window: extension only first, then the full network if
// the hit-rate on `current` is still below delta. Returns nothing (and
// counts a postponement) when the window holds a single class.
std::optional<UpdateMessage> drift_update(DriftState& drift, int batch, const std::vector<LabeledFrame>& current,
                                          int regions_per_axis, const PipelineConfig& cfg);

struct ServerResult {
  std::vector<std::vector<BoundingBox>> detections;  // one entry per batch frame
  double hit_rate = 1.0;
  std::optional<UpdateMessage> update;
};

class ServerNode {
 public:
  ServerNode(StudentNet student, int regions_per_axis, const PipelineConfig& cfg);

  // `frames` are the batch's original frames with ground truth (oracle
  // access for the teacher). Throws ResyncError on a version mismatch.
  ServerResult process_batch(const BatchMessage& msg, const std::vector<LabeledFrame>& frames);

  const DriftState& drift() const { return drift_; }

 private:
  int L_;
  PipelineConfig cfg_;
  DriftState drift_;
};

// Ground-truth quality map: cells covered more than half by a box, then,
// per box, the most-overlapping remaining cells until its HQ coverage
// reaches alpha.
QualityMap oracle_quality_map(const std::vector<BoundingBox>& truth, int regions_per_axis, double alpha);

// Fraction of grid cells containing part of some box.
double object_region_fraction(const std::vector<BoundingBox>& truth, int regions_per_axis);

struct RunOptions {
  std::string run_id = "run";
  std::string trace_dir;  // when set, every message is written here
};

RunMetrics run_ltc(const SceneConfig& scene, const StudentNet& student, const NetworkConfig& net,
                   const PipelineConfig& cfg, LtcMode mode, const RunOptions& opts = {});
RunMetrics run_dds_baseline(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                            const RunOptions& opts = {});
RunMetrics run_reducto_baseline(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                                const RunOptions& opts = {});
RunMetrics run_uniform_baseline(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                                int r_uniform, const RunOptions& opts = {});

// Empirical CDF: x ascending, p[k] = fraction of samples <= x[k].
struct Cdf {
  std::vector<double> x, p;
  double at(double v) const;
};
Cdf make_cdf(std::vector<double> samples);

struct OracleResult {
  RunMetrics metrics;
  std::vector<double> region_fractions;  // per frame: object_region_fraction
  std::vector<double> useful_fractions;  // per batch: kept frames / N
  Cdf region_cdf;
  Cdf useful_cdf;
};

OracleResult run_oracle(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                        const RunOptions& opts = {});

// Largest threshold whose simulated filtering keeps mean F1 >= target on
// the batch, given a pairwise difference matrix (n x n) and per-frame truth.
double fit_threshold(const std::vector<double>& diff, const std::vector<std::vector<BoundingBox>>& truth,
                     double target_f1);

// Temporal-threshold calibration: partitions each batch at every candidate
// th, replicates the representatives' ground truth and scores mean F1.
struct CalibrationBatch {
  std::vector<double> diff;  // n x n frame differences
  std::vector<std::vector<BoundingBox>> truth;
};
struct CalibrationPoint {
  double th = 0;
  double mean_f1 = 0;
  double filtered_fraction = 0;
};
std::vector<CalibrationBatch> calibration_batches(const std::vector<std::vector<LabeledFrame>>& batches,
                                                  const StudentNet& student, int regions_per_axis);
std::vector<CalibrationPoint> threshold_sweep(const std::vector<CalibrationBatch>& batches,
                                              const std::vector<double>& thresholds);
// Candidates are `points` quantiles of the observed pairwise differences;
// returns the largest one reaching the target (the smallest candidate if none does).
double calibrate_threshold(const std::vector<CalibrationBatch>& batches, double target_f1, int points = 40);

}  // namespace ltc
