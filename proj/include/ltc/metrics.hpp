#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "ltc/checkpoint.hpp"
#include "ltc/scene.hpp"

namespace ltc {

struct NetworkConfig {
  double bandwidth_bps = 1.2e6;
  double latency_s = 0.1;                       // one-way
  double server_frame_s = 0.5;                  // teacher pass per frame (2 FPS)
  double source_region_s = 1.0 / (65.0 * 256);  // student pass per region (65 FPS at 16x16)

  static NetworkConfig constrained();  // 1.2 Mbps, 100 ms
  static NetworkConfig rich();         // 100 Mbps, 20 ms
  void validate() const;
};

// Serialization plus propagation: bytes * 8 / bandwidth + latency.
double transmit_time(std::size_t bytes, const NetworkConfig& cfg);

// Named parts of one frame's response delay; total() is their sum.
struct DelayComponents {
  double accumulation = 0;    // wait for the rest of the batch to be captured
  double source_compute = 0;  // student inference at the source
  double uplink = 0;          // all uplink transfers
  double processing = 0;      // all server passes
  double feedback = 0;        // downlink feedback between rounds

  double total() const { return accumulation + source_compute + uplink + processing + feedback; }
};

// One communication round: an uplink of `uplink_bytes` followed by a server
// pass over `processed_frames` frames.
struct Round {
  std::size_t uplink_bytes = 0;
  int processed_frames = 0;
};

struct BatchTimeline {
  int batch_size = 30;
  double fps = 30;
  double source_compute_s = 0;
  std::vector<Round> rounds;
  std::vector<std::size_t> feedback_bytes;  // one entry per gap between rounds
};

// Delay of the frame at `position` (0-based) within its batch. A round with
// no uplink bytes costs nothing.
DelayComponents response_delay(int position, const BatchTimeline& timeline, const NetworkConfig& cfg);

struct F1Score {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
};

// Greedy one-to-one matching by descending IoU; a pair matches when IoU >=
// threshold. Empty vs empty scores 1.
F1Score f1_score(const std::vector<BoundingBox>& predicted, const std::vector<BoundingBox>& truth,
                 double iou_threshold = 0.5);
F1Score f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

double normalized_bandwidth(std::size_t total_bytes, std::size_t reference_bytes);

struct FrameRecord {
  int batch = 0;
  int frame = 0;
  std::size_t tp = 0, fp = 0, fn = 0;
  DelayComponents delay;
  std::size_t bytes_attributed = 0;
  bool transmitted = false;  // sent to the server (representative or unfiltered)
};

struct UpdateRecord {
  int batch = 0;
  CheckpointScope scope = CheckpointScope::extension_only;
  std::size_t bytes = 0;
  double hit_rate_before = 0;
  double hit_rate_after_extension = 0;  // after the extension-only attempt
  double hit_rate_after = 0;            // of the emitted update
};

struct RunMetrics {
  std::string run_id;
  std::string mode;
  std::vector<FrameRecord> frames;
  std::size_t uplink_bytes = 0;
  std::size_t downlink_bytes = 0;
  std::size_t reference_bytes = 0;  // every frame sent all-HQ, unfiltered
  std::vector<UpdateRecord> updates;
  std::vector<double> hit_rates;     // per batch, LtC modes only
  std::vector<int> profiling_batches;  // Reducto-style runs only

  double normalized_bandwidth() const;
  double mean_f1() const;   // mean of per-frame F1
  F1Score micro_f1() const;  // from summed TP/FP/FN
  double mean_delay() const;
  double median_delay() const;
  double p95_delay() const;
  double filtered_fraction() const;
  std::size_t extension_updates() const;
  std::size_t full_updates() const;
};

// Nearest-rank percentile, q in [0, 1].
double percentile(std::vector<double> values, double q);

// Header: run_id,batch,frame,tp,fp,fn,delay_s,bytes_attributed. One row per
// frame, then a summary row with batch = frame = -1, summed TP/FP/FN, the
// mean delay and total uplink + downlink bytes.
void write_metrics_csv(std::ostream& out, const RunMetrics& m, bool header = true);

// Header: run_id,mode,frames,mean_f1,micro_f1,normalized_bandwidth,uplink_bytes,
// downlink_bytes,mean_delay_s,median_delay_s,p95_delay_s,filtered_fraction,
// extension_updates,full_updates
void write_summary_csv(std::ostream& out, const std::vector<RunMetrics>& runs);

}  // namespace ltc
