#include "ltc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ltc/error.hpp"
#include "ltc/rng.hpp"

namespace ltc {

std::size_t batch_overhead(std::size_t partitions, std::size_t frames) {
  return kBatchHeaderBytes + kPartitionEntryBytes * partitions + kFrameLengthBytes * frames;
}

void validate(const BatchMessage& msg) {
  if (msg.partitions.empty()) throw FormatError("batch message: no partitions");
  if (msg.frames.size() != msg.partitions.size())
    throw FormatError("batch message: need exactly one frame per partition");
  for (std::size_t k = 0; k < msg.partitions.size(); ++k) {
    const Partition& p = msg.partitions[k];
    if (p.first < 0 || p.first > p.last || !p.contains(p.representative))
      throw FormatError("batch message: malformed partition " + std::to_string(k));
    if (k > 0 && p.first <= msg.partitions[k - 1].last) throw FormatError("batch message: partitions overlap");
    if (msg.frames[k].frame_index != static_cast<std::uint32_t>(p.representative))
      throw FormatError("batch message: frame " + std::to_string(msg.frames[k].frame_index) +
                        " is not the representative of partition " + std::to_string(k));
  }
  if (msg.partitions.size() > 0xffff) throw FormatError("batch message: too many partitions");
}

Bytes encode_batch_message(const BatchMessage& msg) {
  validate(msg);
  ByteWriter w;
  w.magic("LTCB");
  w.u32(msg.batch_index);
  w.u32(msg.student_version);
  w.u16(static_cast<std::uint16_t>(msg.partitions.size()));
  w.u16(static_cast<std::uint16_t>(msg.frames.size()));
  for (const Partition& p : msg.partitions) {
    w.u32(static_cast<std::uint32_t>(p.first));
    w.u32(static_cast<std::uint32_t>(p.last));
    w.u32(static_cast<std::uint32_t>(p.representative));
  }
  for (const CompressedFrame& cf : msg.frames) {
    const Bytes f = encode_frame(cf);
    w.u32(static_cast<std::uint32_t>(f.size()));
    w.raw(f);
  }
  return w.take();
}

BatchMessage decode_batch_message(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LTCB");
  BatchMessage msg;
  msg.batch_index = r.u32();
  msg.student_version = r.u32();
  const int m = r.u16();
  const int k = r.u16();
  for (int i = 0; i < m; ++i) {
    Partition p;
    p.first = static_cast<int>(r.u32());
    p.last = static_cast<int>(r.u32());
    p.representative = static_cast<int>(r.u32());
    msg.partitions.push_back(p);
  }
  for (int i = 0; i < k; ++i) {
    const std::uint32_t len = r.u32();
    msg.frames.push_back(decode_frame(r.raw(len)));
  }
  if (r.remaining() != 0) throw FormatError("batch message: trailing bytes");
  validate(msg);
  return msg;
}

UpdateMessage make_update(const StudentNet& student, CheckpointScope scope) {
  return {scope, student.version(), save_checkpoint(student, scope)};
}

Bytes encode_update_message(const UpdateMessage& msg) {
  ByteWriter w;
  w.magic("LTCU");
  w.u8(static_cast<std::uint8_t>(msg.scope));
  w.u8(0);
  w.u16(0);
  w.u32(msg.version);
  w.u32(static_cast<std::uint32_t>(msg.checkpoint.size()));
  w.raw(msg.checkpoint);
  return w.take();
}

UpdateMessage decode_update_message(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("LTCU");
  const std::uint8_t scope = r.u8();
  if (scope > 1) throw FormatError("update message: unknown scope");
  if (r.u8() != 0 || r.u16() != 0) throw FormatError("update message: reserved bytes must be zero");
  UpdateMessage msg;
  msg.scope = static_cast<CheckpointScope>(scope);
  msg.version = r.u32();
  const std::uint32_t len = r.u32();
  const auto payload = r.raw(len);
  if (r.remaining() != 0) throw FormatError("update message: trailing bytes");
  const Checkpoint ckpt = load_checkpoint(payload);
  if (ckpt.scope != msg.scope) throw FormatError("update message: checkpoint scope does not match the header");
  if (ckpt.version != msg.version) throw FormatError("update message: checkpoint version does not match the header");
  msg.checkpoint.assign(payload.begin(), payload.end());
  return msg;
}

std::string to_string(LtcMode m) {
  switch (m) {
    case LtcMode::ltc: return "ltc";
    case LtcMode::spatial_only: return "ltc-spatial";
    case LtcMode::temporal_only: return "ltc-temporal";
  }
  return "?";
}

void PipelineConfig::validate() const {
  if (batch_size < 1) throw InvalidInput("pipeline: batch_size must be >= 1");
  if (batches < 1) throw InvalidInput("pipeline: batches must be >= 1");
  if (!(th > 0)) throw InvalidInput("pipeline: th must be positive");
  if (!valid_factor(r)) throw InvalidInput("pipeline: r must be one of 2, 4, 7, 14");
  if (!(alpha > 0 && alpha <= 1)) throw InvalidInput("pipeline: alpha must be in (0, 1]");
  if (!(delta >= 0 && delta <= 1)) throw InvalidInput("pipeline: delta must be in [0, 1]");
  if (update_window < 1) throw InvalidInput("pipeline: update_window must be >= 1");
  if (!valid_factor(dds_low_r)) throw InvalidInput("pipeline: dds_low_r must be one of 2, 4, 7, 14");
  if (reducto_profile_period < 1) throw InvalidInput("pipeline: reducto_profile_period must be >= 1");
  if (!(reducto_target_f1 >= 0 && reducto_target_f1 <= 1)) throw InvalidInput("pipeline: reducto_target_f1 must be in [0, 1]");
  if (uniform_r != 1 && !valid_factor(uniform_r)) throw InvalidInput("pipeline: uniform_r must be 1, 2, 4, 7 or 14");
  extension_train.validate();
  full_train.validate();
}

double source_region_time(const NetworkConfig& net, int conv_layers) {
  return net.source_region_s * static_cast<double>(student_macs(conv_layers)) / static_cast<double>(student_macs(2));
}

namespace {

void check_batch(const std::vector<LabeledFrame>& frames) {
  if (frames.empty()) throw InvalidInput("batch: no frames");
  for (std::size_t k = 1; k < frames.size(); ++k)
    if (frames[k].frame.index != frames[k - 1].frame.index + 1) throw InvalidInput("batch: frames must be consecutive");
}

std::vector<Partition> singletons(const std::vector<LabeledFrame>& frames) {
  std::vector<Partition> parts;
  for (const auto& f : frames) parts.push_back({f.frame.index, f.frame.index, f.frame.index});
  return parts;
}

// Partitions led by each kept frame (offsets within the batch).
std::vector<Partition> partitions_from_kept(const std::vector<int>& kept, int n, int first_index) {
  std::vector<Partition> parts;
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const int last = k + 1 < kept.size() ? kept[k + 1] - 1 : n - 1;
    parts.push_back({first_index + kept[k], first_index + last, first_index + kept[k]});
  }
  return parts;
}

}  // namespace

SourceNode::SourceNode(StudentNet student, int L, const PipelineConfig& cfg, LtcMode mode)
    : student_(std::move(student)), L_(L), cfg_(cfg), mode_(mode) {
  cfg_.validate();
}

BatchMessage SourceNode::process_batch(std::uint32_t batch_index, const std::vector<LabeledFrame>& frames) {
  check_batch(frames);
  const int n = static_cast<int>(frames.size());
  const std::vector<FeatureMap> features = batch_features(frames, student_, L_);
  regions_encoded_ = static_cast<std::size_t>(n) * L_ * L_;

  BatchMessage msg;
  msg.batch_index = batch_index;
  msg.student_version = student_.version();
  msg.partitions = mode_ == LtcMode::spatial_only
                       ? singletons(frames)
                       : partition_by_matrix(difference_matrix(features), n, cfg_.th, frames.front().frame.index);
  for (const Partition& p : msg.partitions) {
    const int off = p.representative - frames.front().frame.index;
    QualityMap q = QualityMap::uniform(L_, true);
    if (mode_ != LtcMode::temporal_only) {
      const nn::Tensor f({L_ * L_, kFeatureDim}, features[static_cast<std::size_t>(off)].values);
      q = classify_from_posteriors(student_.extend_batch(f), L_);
    }
    const Frame& fr = frames[static_cast<std::size_t>(off)].frame;
    msg.frames.push_back(compress(fr.pixels, static_cast<std::uint32_t>(fr.index), q, cfg_.r, true));
  }
  return msg;
}

void SourceNode::apply_update(const UpdateMessage& msg) { apply_checkpoint(student_, load_checkpoint(msg.checkpoint)); }

double hit_rate(const StudentNet& student, const std::vector<LabeledFrame>& frames, int L, OverlapMode overlap) {
  std::size_t positives = 0, hits = 0;
  for (const LabeledFrame& lf : frames) {
    const RegionLabels labels = label_regions(lf.truth, L, overlap);
    if (labels.positives() == 0) continue;
    const std::vector<float> post = student.infer_batch(grid_regions(lf.frame.pixels, L));
    for (std::size_t k = 0; k < post.size(); ++k)
      if (labels.labels[k]) {
        ++positives;
        if (post[k] > 0.5f) ++hits;
      }
  }
  return positives == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(positives);
}

std::optional<UpdateMessage> drift_update(DriftState& drift, int batch, const std::vector<LabeledFrame>& current,
                                          int L, const PipelineConfig& cfg) {
  std::vector<LabeledFrame> frames;
  for (const auto& w : drift.window) frames.insert(frames.end(), w.begin(), w.end());
  const RegionDataset data =
      make_dataset(frames, L, cfg.overlap, cfg.update_max_regions, derive_seed(cfg.extension_train.seed, {7, static_cast<std::uint64_t>(batch)}));
  if (data.positives() == 0 || data.positives() == data.size()) {
    ++drift.postponed;
    return std::nullopt;
  }
  UpdateRecord rec;
  rec.batch = batch;
  rec.hit_rate_before = drift.hit_rates.empty() ? 1.0 : drift.hit_rates.back();

  StudentNet candidate = drift.student;
  TrainConfig ext = cfg.extension_train;
  ext.freeze_encoder = true;
  ext.seed = derive_seed(ext.seed, {static_cast<std::uint64_t>(batch)});
  train_student(candidate, data, ext);
  double h = hit_rate(candidate, current, L, cfg.overlap);
  rec.hit_rate_after_extension = h;
  rec.scope = CheckpointScope::extension_only;
  if (h < drift.delta) {
    TrainConfig full = cfg.full_train;
    full.freeze_encoder = false;
    full.seed = derive_seed(full.seed, {static_cast<std::uint64_t>(batch)});
    train_student(candidate, data, full);
    h = hit_rate(candidate, current, L, cfg.overlap);
    rec.scope = CheckpointScope::full;
  }
  rec.hit_rate_after = h;
  candidate.set_version(drift.student.version() + 1);
  drift.student = std::move(candidate);
  UpdateMessage msg = make_update(drift.student, rec.scope);
  rec.bytes = kUpdateHeaderBytes + msg.checkpoint.size();
  drift.log.push_back(rec);
  return msg;
}

ServerNode::ServerNode(StudentNet student, int L, const PipelineConfig& cfg) : L_(L), cfg_(cfg) {
  cfg_.validate();
  drift_.student = std::move(student);
  drift_.delta = cfg.delta;
}

ServerResult ServerNode::process_batch(const BatchMessage& msg, const std::vector<LabeledFrame>& frames) {
  if (msg.student_version != drift_.student.version())
    throw ResyncError("batch " + std::to_string(msg.batch_index) + " used student version " +
                          std::to_string(msg.student_version) + ", server holds " +
                          std::to_string(drift_.student.version()),
                      drift_.student.version(), msg.student_version);
  check_batch(frames);
  validate(msg);
  const int first = frames.front().frame.index;
  const int n = static_cast<int>(frames.size());
  if (msg.partitions.front().first != first || msg.partitions.back().last != first + n - 1)
    throw FormatError("batch message: partition table does not cover the batch");
  for (std::size_t k = 1; k < msg.partitions.size(); ++k)
    if (msg.partitions[k].first != msg.partitions[k - 1].last + 1)
      throw FormatError("batch message: partition table has a gap");

  ServerResult res;
  res.detections.resize(frames.size());
  std::vector<LabeledFrame> reps;
  for (std::size_t k = 0; k < msg.partitions.size(); ++k) {
    const Partition& p = msg.partitions[k];
    const LabeledFrame& rep = frames[static_cast<std::size_t>(p.representative - first)];
    const auto dets = teacher_detect(pixel_quality(msg.frames[k].qmap), rep.truth, cfg_.alpha);
    for (int f = p.first; f <= p.last; ++f) res.detections[static_cast<std::size_t>(f - first)] = dets;
    reps.push_back(rep);
  }
  res.hit_rate = hit_rate(drift_.student, reps, L_, cfg_.overlap);
  drift_.hit_rates.push_back(res.hit_rate);
  if (cfg_.drift_updates) {
    drift_.window.push_back(reps);
    while (static_cast<int>(drift_.window.size()) > cfg_.update_window) drift_.window.pop_front();
    if (res.hit_rate < drift_.delta)
      res.update = drift_update(drift_, static_cast<int>(msg.batch_index), reps, L_, cfg_);
  }
  return res;
}

QualityMap oracle_quality_map(const std::vector<BoundingBox>& truth, int L, double alpha) {
  QualityMap q{L, label_regions(truth, L, OverlapMode::coverage).labels};
  for (const BoundingBox& box : truth) {
    while (hq_coverage(pixel_quality(q), box) < alpha) {
      int best = -1;
      double best_area = 0;
      for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j) {
          if (q.at(i, j)) continue;
          const double a = intersection_area(region_box(i, j), box);
          if (a > best_area) {
            best_area = a;
            best = i * L + j;
          }
        }
      if (best < 0) break;
      q.hq[static_cast<std::size_t>(best)] = 1;
    }
  }
  return q;
}

double object_region_fraction(const std::vector<BoundingBox>& truth, int L) {
  std::size_t n = 0;
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      for (const BoundingBox& b : truth)
        if (intersection_area(region_box(i, j), b) > 0) {
          ++n;
          break;
        }
  return static_cast<double>(n) / (static_cast<double>(L) * L);
}

namespace {

void write_trace(const std::string& dir, const std::string& name, const Bytes& bytes) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("cannot write trace file " + name);
}

std::string numbered(const char* stem, int b, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05d.%s", stem, b, ext);
  return buf;
}

std::size_t full_reference(int L, int n, int r) { return static_cast<std::size_t>(n) * frame_cost(L, static_cast<std::size_t>(L) * L, r, true); }

// Per-frame bytes of one message: each carried frame gets its payload plus
// length prefix; the first batch frame gets the header and partition table.
void attribute_message(std::vector<FrameRecord>& recs, int first, const BatchMessage& msg) {
  recs.front().bytes_attributed += kBatchHeaderBytes + kPartitionEntryBytes * msg.partitions.size();
  for (const CompressedFrame& cf : msg.frames) {
    FrameRecord& r = recs[static_cast<std::size_t>(cf.frame_index) - static_cast<std::size_t>(first)];
    r.bytes_attributed += byte_cost(cf) + kFrameLengthBytes;
    r.transmitted = true;
  }
}

void score_frames(std::vector<FrameRecord>& recs, const std::vector<LabeledFrame>& frames,
                  const std::vector<std::vector<BoundingBox>>& detections, const BatchTimeline& timeline,
                  const NetworkConfig& net) {
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const F1Score s = f1_score(detections[k], frames[k].truth);
    recs[k].tp = s.tp;
    recs[k].fp = s.fp;
    recs[k].fn = s.fn;
    recs[k].delay = response_delay(static_cast<int>(k), timeline, net);
  }
}

std::vector<FrameRecord> new_records(int batch, const std::vector<LabeledFrame>& frames) {
  std::vector<FrameRecord> recs(frames.size());
  for (std::size_t k = 0; k < frames.size(); ++k) {
    recs[k].batch = batch;
    recs[k].frame = frames[k].frame.index;
  }
  return recs;
}

void prepare(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg) {
  scene.validate();
  net.validate();
  cfg.validate();
}

// Sends the message through the byte layer and returns what the receiver decodes.
BatchMessage transmit(const BatchMessage& msg, const RunOptions& opts, const std::string& name, std::size_t& bytes) {
  const Bytes wire = encode_batch_message(msg);
  write_trace(opts.trace_dir, name, wire);
  bytes = wire.size();
  return decode_batch_message(wire);
}

}  // namespace

RunMetrics run_ltc(const SceneConfig& scene, const StudentNet& student, const NetworkConfig& net,
                   const PipelineConfig& cfg, LtcMode mode, const RunOptions& opts) {
  prepare(scene, net, cfg);
  const int L = scene.regions_per_axis;
  const int n = cfg.batch_size;
  SourceNode source(student, L, cfg, mode);
  ServerNode server(student, L, cfg);
  const double t_region = source_region_time(net, student.conv_layers());

  RunMetrics m;
  m.run_id = opts.run_id;
  m.mode = to_string(mode);
  std::optional<UpdateMessage> pending;
  for (int b = 0; b < cfg.batches; ++b) {
    const auto frames = generate_batch(scene, b * n, n);
    if (pending) {
      source.apply_update(*pending);
      pending.reset();
    }
    const BatchMessage sent = source.process_batch(static_cast<std::uint32_t>(b), frames);
    std::size_t up = 0;
    const BatchMessage received = transmit(sent, opts, numbered("batch", b, "ltcb"), up);
    ServerResult res = server.process_batch(received, frames);
    m.uplink_bytes += up;
    m.hit_rates.push_back(res.hit_rate);

    auto recs = new_records(b, frames);
    attribute_message(recs, frames.front().frame.index, sent);
    if (res.update) {
      const Bytes wire = encode_update_message(*res.update);
      write_trace(opts.trace_dir, numbered("update", b, "ltcu"), wire);
      pending = decode_update_message(wire);
      UpdateRecord rec = server.drift().log.back();
      rec.bytes = wire.size();
      m.updates.push_back(rec);
      m.downlink_bytes += wire.size();
      recs.front().bytes_attributed += wire.size();
    }
    BatchTimeline tl{n, static_cast<double>(scene.fps), static_cast<double>(source.regions_encoded()) * t_region,
                     {{up, static_cast<int>(sent.frames.size())}}, {}};
    score_frames(recs, frames, res.detections, tl, net);
    m.frames.insert(m.frames.end(), recs.begin(), recs.end());
    m.reference_bytes += full_reference(L, n, cfg.r);
  }
  return m;
}

namespace {

// DDS feedback: "LTCQ", batch u32, then per requested frame its index u32
// and the bit-packed map of regions to resend in HQ.
Bytes encode_feedback(int batch, const std::vector<std::pair<int, QualityMap>>& requests) {
  ByteWriter w;
  w.magic("LTCQ");
  w.u32(static_cast<std::uint32_t>(batch));
  for (const auto& [index, q] : requests) {
    w.u32(static_cast<std::uint32_t>(index));
    std::vector<std::uint8_t> bits((q.cells() + 7) / 8, 0);
    for (std::size_t k = 0; k < q.cells(); ++k)
      if (q.hq[k]) bits[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
    w.raw(bits);
  }
  return w.take();
}

}  // namespace

RunMetrics run_dds_baseline(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                            const RunOptions& opts) {
  prepare(scene, net, cfg);
  const int L = scene.regions_per_axis;
  const int n = cfg.batch_size;
  RunMetrics m;
  m.run_id = opts.run_id;
  m.mode = "dds";
  for (int b = 0; b < cfg.batches; ++b) {
    const auto frames = generate_batch(scene, b * n, n);
    const int first = frames.front().frame.index;
    BatchMessage low{static_cast<std::uint32_t>(b), 0, singletons(frames), {}};
    for (const auto& f : frames)
      low.frames.push_back(compress(f.frame.pixels, static_cast<std::uint32_t>(f.frame.index),
                                    QualityMap::uniform(L, false), cfg.dds_low_r, true));
    std::size_t up1 = 0;
    transmit(low, opts, numbered("batch", b, "ltcb"), up1);

    // Server: regions whose objects are only detectable at full quality.
    std::vector<std::pair<int, QualityMap>> requests;
    BatchMessage high{static_cast<std::uint32_t>(b), 0, {}, {}};
    std::vector<std::vector<BoundingBox>> detections(frames.size());
    for (std::size_t k = 0; k < frames.size(); ++k) {
      const QualityMap q = oracle_quality_map(frames[k].truth, L, cfg.alpha);
      if (q.hq_count() == 0) continue;
      const int idx = frames[k].frame.index;
      requests.emplace_back(idx, q);
      high.partitions.push_back({idx, idx, idx});
      high.frames.push_back(compress(frames[k].frame.pixels, static_cast<std::uint32_t>(idx), q, cfg.dds_low_r, false));
      detections[k] = teacher_detect(pixel_quality(q), frames[k].truth, cfg.alpha);
    }
    const Bytes feedback = encode_feedback(b, requests);
    write_trace(opts.trace_dir, numbered("feedback", b, "ltcq"), feedback);
    std::size_t up2 = 0;
    if (!high.frames.empty()) transmit(high, opts, numbered("resend", b, "ltcb"), up2);

    m.uplink_bytes += up1 + up2;
    m.downlink_bytes += feedback.size();
    auto recs = new_records(b, frames);
    attribute_message(recs, first, low);
    if (!high.frames.empty()) attribute_message(recs, first, high);
    recs.front().bytes_attributed += feedback.size();
    BatchTimeline tl{n, static_cast<double>(scene.fps), 0.0,
                     {{up1, n}, {up2, static_cast<int>(high.frames.size())}}, {feedback.size()}};
    score_frames(recs, frames, detections, tl, net);
    m.frames.insert(m.frames.end(), recs.begin(), recs.end());
    m.reference_bytes += full_reference(L, n, cfg.r);
  }
  return m;
}

double fit_threshold(const std::vector<double>& diff, const std::vector<std::vector<BoundingBox>>& truth,
                     double target_f1) {
  const int n = static_cast<int>(truth.size());
  if (n < 1 || diff.size() != static_cast<std::size_t>(n) * n) throw InvalidInput("fit_threshold: size mismatch");
  std::vector<double> candidates{0.0};
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) candidates.push_back(diff[static_cast<std::size_t>(i) * n + j]);
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  double best = 0.0;
  for (double t : candidates) {
    int last = 0;
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      if (diff[static_cast<std::size_t>(k) * n + last] > t) last = k;
      sum += f1_score(truth[static_cast<std::size_t>(last)], truth[static_cast<std::size_t>(k)]).f1;
    }
    if (sum / n >= target_f1) best = std::max(best, t);
  }
  return best;
}

RunMetrics run_reducto_baseline(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                                const RunOptions& opts) {
  prepare(scene, net, cfg);
  const int L = scene.regions_per_axis;
  const int n = cfg.batch_size;
  constexpr std::size_t kThresholdMessageBytes = 16;
  RunMetrics m;
  m.run_id = opts.run_id;
  m.mode = "reducto";
  double threshold = 0.0;
  for (int b = 0; b < cfg.batches; ++b) {
    const auto frames = generate_batch(scene, b * n, n);
    const int first = frames.front().frame.index;
    const bool profiling = b % cfg.reducto_profile_period == 0;
    std::vector<int> kept{0};
    if (profiling) {
      for (int k = 1; k < n; ++k) kept.push_back(k);
    } else {
      for (int k = 1; k < n; ++k)
        if (mean_abs_difference(frames[static_cast<std::size_t>(k)].frame.pixels,
                                frames[static_cast<std::size_t>(kept.back())].frame.pixels) > threshold)
          kept.push_back(k);
    }
    BatchMessage msg{static_cast<std::uint32_t>(b), 0, partitions_from_kept(kept, n, first), {}};
    for (int k : kept) {
      const Frame& f = frames[static_cast<std::size_t>(k)].frame;
      msg.frames.push_back(compress(f.pixels, static_cast<std::uint32_t>(f.index), QualityMap::uniform(L, true), cfg.r));
    }
    std::size_t up = 0;
    const BatchMessage received = transmit(msg, opts, numbered("batch", b, "ltcb"), up);
    std::vector<std::vector<BoundingBox>> detections(frames.size());
    for (std::size_t p = 0; p < received.partitions.size(); ++p) {
      const Partition& part = received.partitions[p];
      const auto dets = teacher_detect(pixel_quality(received.frames[p].qmap),
                                       frames[static_cast<std::size_t>(part.representative - first)].truth, cfg.alpha);
      for (int f = part.first; f <= part.last; ++f) detections[static_cast<std::size_t>(f - first)] = dets;
    }
    auto recs = new_records(b, frames);
    attribute_message(recs, first, msg);
    m.uplink_bytes += up;
    if (profiling) {
      std::vector<double> diff(static_cast<std::size_t>(n) * n, 0.0);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          diff[static_cast<std::size_t>(i) * n + j] = diff[static_cast<std::size_t>(j) * n + i] =
              mean_abs_difference(frames[static_cast<std::size_t>(i)].frame.pixels,
                                  frames[static_cast<std::size_t>(j)].frame.pixels);
      std::vector<std::vector<BoundingBox>> truth;
      for (const auto& f : frames) truth.push_back(f.truth);
      threshold = fit_threshold(diff, truth, cfg.reducto_target_f1);
      m.profiling_batches.push_back(b);
      // Threshold downlink: "LTCT", batch u32, threshold as float64 bits.
      ByteWriter w;
      w.magic("LTCT");
      w.u32(static_cast<std::uint32_t>(b));
      std::uint64_t bits;
      std::memcpy(&bits, &threshold, sizeof bits);
      w.u32(static_cast<std::uint32_t>(bits));
      w.u32(static_cast<std::uint32_t>(bits >> 32));
      if (w.size() != kThresholdMessageBytes) throw StateError("reducto: threshold message size");
      if (!opts.trace_dir.empty()) write_trace(opts.trace_dir, numbered("threshold", b, "ltct"), w.bytes());
      m.downlink_bytes += kThresholdMessageBytes;
      recs.front().bytes_attributed += kThresholdMessageBytes;
    }
    BatchTimeline tl{n, static_cast<double>(scene.fps), 0.0, {{up, static_cast<int>(kept.size())}}, {}};
    score_frames(recs, frames, detections, tl, net);
    m.frames.insert(m.frames.end(), recs.begin(), recs.end());
    m.reference_bytes += full_reference(L, n, cfg.r);
  }
  return m;
}

RunMetrics run_uniform_baseline(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                                int r_uniform, const RunOptions& opts) {
  prepare(scene, net, cfg);
  if (r_uniform != 1 && !valid_factor(r_uniform)) throw InvalidInput("uniform baseline: r must be 1, 2, 4, 7 or 14");
  const int L = scene.regions_per_axis;
  const int n = cfg.batch_size;
  const bool full = r_uniform == 1;
  const QualityMap q = QualityMap::uniform(L, full);
  const int factor = full ? cfg.r : r_uniform;
  RunMetrics m;
  m.run_id = opts.run_id;
  m.mode = "uniform";
  for (int b = 0; b < cfg.batches; ++b) {
    const auto frames = generate_batch(scene, b * n, n);
    BatchMessage msg{static_cast<std::uint32_t>(b), 0, singletons(frames), {}};
    for (const auto& f : frames)
      msg.frames.push_back(compress(f.frame.pixels, static_cast<std::uint32_t>(f.frame.index), q, factor));
    std::size_t up = 0;
    const BatchMessage received = transmit(msg, opts, numbered("batch", b, "ltcb"), up);
    std::vector<std::vector<BoundingBox>> detections;
    for (std::size_t k = 0; k < frames.size(); ++k)
      detections.push_back(teacher_detect(pixel_quality(received.frames[k].qmap), frames[k].truth, cfg.alpha));
    auto recs = new_records(b, frames);
    attribute_message(recs, frames.front().frame.index, msg);
    m.uplink_bytes += up;
    BatchTimeline tl{n, static_cast<double>(scene.fps), 0.0, {{up, n}}, {}};
    score_frames(recs, frames, detections, tl, net);
    m.frames.insert(m.frames.end(), recs.begin(), recs.end());
    m.reference_bytes += full_reference(L, n, cfg.r);
  }
  return m;
}

double Cdf::at(double v) const {
  const auto it = std::upper_bound(x.begin(), x.end(), v);
  return it == x.begin() ? 0.0 : p[static_cast<std::size_t>(it - x.begin()) - 1];
}

Cdf make_cdf(std::vector<double> samples) {
  Cdf c;
  if (samples.empty()) return c;
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (k + 1 < samples.size() && samples[k + 1] == samples[k]) continue;
    c.x.push_back(samples[k]);
    c.p.push_back(static_cast<double>(k + 1) / n);
  }
  return c;
}

OracleResult run_oracle(const SceneConfig& scene, const NetworkConfig& net, const PipelineConfig& cfg,
                        const RunOptions& opts) {
  prepare(scene, net, cfg);
  const int L = scene.regions_per_axis;
  const int n = cfg.batch_size;
  OracleResult out;
  RunMetrics& m = out.metrics;
  m.run_id = opts.run_id;
  m.mode = "oracle";
  for (int b = 0; b < cfg.batches; ++b) {
    const auto frames = generate_batch(scene, b * n, n);
    const int first = frames.front().frame.index;
    std::vector<QualityMap> maps;
    for (const auto& f : frames) {
      maps.push_back(oracle_quality_map(f.truth, L, cfg.alpha));
      out.region_fractions.push_back(object_region_fraction(f.truth, L));
    }
    std::vector<int> kept{0};
    for (int k = 1; k < n; ++k)
      if (f1_score(frames[static_cast<std::size_t>(kept.back())].truth, frames[static_cast<std::size_t>(k)].truth).f1 < 1.0)
        kept.push_back(k);
    out.useful_fractions.push_back(static_cast<double>(kept.size()) / n);

    BatchMessage msg{static_cast<std::uint32_t>(b), 0, partitions_from_kept(kept, n, first), {}};
    for (int k : kept) {
      const Frame& f = frames[static_cast<std::size_t>(k)].frame;
      msg.frames.push_back(compress(f.pixels, static_cast<std::uint32_t>(f.index), maps[static_cast<std::size_t>(k)], cfg.r));
    }
    std::size_t up = 0;
    const BatchMessage received = transmit(msg, opts, numbered("batch", b, "ltcb"), up);
    std::vector<std::vector<BoundingBox>> detections(frames.size());
    for (std::size_t p = 0; p < received.partitions.size(); ++p) {
      const Partition& part = received.partitions[p];
      const auto dets = teacher_detect(pixel_quality(received.frames[p].qmap),
                                       frames[static_cast<std::size_t>(part.representative - first)].truth, cfg.alpha);
      for (int f = part.first; f <= part.last; ++f) detections[static_cast<std::size_t>(f - first)] = dets;
    }
    auto recs = new_records(b, frames);
    attribute_message(recs, first, msg);
    m.uplink_bytes += up;
    BatchTimeline tl{n, static_cast<double>(scene.fps), 0.0, {{up, static_cast<int>(kept.size())}}, {}};
    score_frames(recs, frames, detections, tl, net);
    m.frames.insert(m.frames.end(), recs.begin(), recs.end());
    m.reference_bytes += full_reference(L, n, cfg.r);
  }
  out.region_cdf = make_cdf(out.region_fractions);
  out.useful_cdf = make_cdf(out.useful_fractions);
  return out;
}

std::vector<CalibrationBatch> calibration_batches(const std::vector<std::vector<LabeledFrame>>& batches,
                                                  const StudentNet& student, int L) {
  std::vector<CalibrationBatch> out;
  for (const auto& batch : batches) {
    check_batch(batch);
    CalibrationBatch cb{difference_matrix(batch_features(batch, student, L)), {}};
    for (const auto& f : batch) cb.truth.push_back(f.truth);
    out.push_back(std::move(cb));
  }
  return out;
}

std::vector<CalibrationPoint> threshold_sweep(const std::vector<CalibrationBatch>& batches,
                                              const std::vector<double>& thresholds) {
  std::vector<CalibrationPoint> pts;
  for (double th : thresholds) pts.push_back({th, 0.0, 0.0});
  std::size_t frames = 0;
  for (const auto& batch : batches) {
    const int n = static_cast<int>(batch.truth.size());
    if (batch.diff.size() != static_cast<std::size_t>(n) * n) throw InvalidInput("threshold_sweep: size mismatch");
    frames += batch.truth.size();
    for (auto& pt : pts) {
      const auto parts = partition_by_matrix(batch.diff, n, pt.th, 0);
      for (const Partition& p : parts)
        for (int f = p.first; f <= p.last; ++f)
          pt.mean_f1 += f1_score(batch.truth[static_cast<std::size_t>(p.representative)],
                                 batch.truth[static_cast<std::size_t>(f)]).f1;
      pt.filtered_fraction += static_cast<double>(n - static_cast<int>(parts.size()));
    }
  }
  for (auto& pt : pts) {
    pt.mean_f1 /= static_cast<double>(std::max<std::size_t>(frames, 1));
    pt.filtered_fraction /= static_cast<double>(std::max<std::size_t>(frames, 1));
  }
  return pts;
}

double calibrate_threshold(const std::vector<CalibrationBatch>& batches, double target_f1, int points) {
  if (points < 1) throw InvalidInput("calibrate_threshold: points must be >= 1");
  std::vector<double> values;
  for (const auto& batch : batches) {
    const std::size_t n = batch.truth.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (batch.diff[i * n + j] > 0) values.push_back(batch.diff[i * n + j]);
  }
  if (values.empty()) return 1.0;
  std::sort(values.begin(), values.end());
  std::vector<double> candidates;
  for (int k = 0; k < points; ++k)
    candidates.push_back(values[(values.size() - 1) * static_cast<std::size_t>(k) / static_cast<std::size_t>(std::max(points - 1, 1))]);
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const auto pts = threshold_sweep(batches, candidates);
  double best = candidates.front();
  for (const auto& pt : pts)
    if (pt.mean_f1 >= target_f1) best = std::max(best, pt.th);
  return best;
}

}  // namespace ltc
