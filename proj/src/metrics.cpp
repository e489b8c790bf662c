#include "ltc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "ltc/error.hpp"

namespace ltc {

NetworkConfig NetworkConfig::constrained() { return {}; }

NetworkConfig NetworkConfig::rich() {
  NetworkConfig c;
  c.bandwidth_bps = 100e6;
  c.latency_s = 0.02;
  return c;
}

void NetworkConfig::validate() const {
  if (!(bandwidth_bps > 0) || !(latency_s > 0) || !(server_frame_s > 0) || !(source_region_s > 0))
    throw InvalidInput("network config: all values must be positive");
}

double transmit_time(std::size_t bytes, const NetworkConfig& cfg) {
  return static_cast<double>(bytes) * 8.0 / cfg.bandwidth_bps + cfg.latency_s;
}

DelayComponents response_delay(int position, const BatchTimeline& t, const NetworkConfig& cfg) {
  if (position < 0 || position >= t.batch_size) throw InvalidInput("response_delay: position outside the batch");
  if (t.rounds.empty()) throw InvalidInput("response_delay: at least one round is required");
  if (t.feedback_bytes.size() + 1 != t.rounds.size())
    throw InvalidInput("response_delay: need one feedback entry per gap between rounds");
  DelayComponents d;
  d.accumulation = static_cast<double>(t.batch_size - 1 - position) / t.fps;
  d.source_compute = t.source_compute_s;
  for (const Round& r : t.rounds) {
    if (r.uplink_bytes == 0) continue;
    d.uplink += transmit_time(r.uplink_bytes, cfg);
    d.processing += r.processed_frames * cfg.server_frame_s;
  }
  for (std::size_t b : t.feedback_bytes) d.feedback += transmit_time(b, cfg);
  return d;
}

F1Score f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  F1Score s{0, 0, 0, tp, fp, fn};
  if (tp + fp + fn == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

F1Score f1_score(const std::vector<BoundingBox>& predicted, const std::vector<BoundingBox>& truth,
                 double iou_threshold) {
  std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
  for (std::size_t p = 0; p < predicted.size(); ++p)
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double v = iou(predicted[p], truth[t]);
      if (v >= iou_threshold) pairs.emplace_back(v, p, t);
    }
  // Descending IoU, then index order for determinism.
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  std::vector<char> used_p(predicted.size(), 0), used_t(truth.size(), 0);
  std::size_t tp = 0;
  for (const auto& [v, p, t] : pairs) {
    if (used_p[p] || used_t[t]) continue;
    used_p[p] = used_t[t] = 1;
    ++tp;
  }
  return f1_from_counts(tp, predicted.size() - tp, truth.size() - tp);
}

double normalized_bandwidth(std::size_t total, std::size_t reference) {
  if (reference == 0) throw InvalidInput("normalized_bandwidth: reference must be positive");
  return static_cast<double>(total) / static_cast<double>(reference);
}

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size())));
  return v[rank == 0 ? 0 : rank - 1];
}

namespace {
std::vector<double> delays(const RunMetrics& m) {
  std::vector<double> d;
  d.reserve(m.frames.size());
  for (const auto& f : m.frames) d.push_back(f.delay.total());
  return d;
}
}  // namespace

double RunMetrics::normalized_bandwidth() const {
  return ltc::normalized_bandwidth(uplink_bytes + downlink_bytes, reference_bytes);
}

double RunMetrics::mean_f1() const {
  if (frames.empty()) return 0.0;
  double s = 0;
  for (const auto& f : frames) s += f1_from_counts(f.tp, f.fp, f.fn).f1;
  return s / static_cast<double>(frames.size());
}

F1Score RunMetrics::micro_f1() const {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& f : frames) {
    tp += f.tp;
    fp += f.fp;
    fn += f.fn;
  }
  return f1_from_counts(tp, fp, fn);
}

double RunMetrics::mean_delay() const {
  const auto d = delays(*this);
  return d.empty() ? 0.0 : std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

double RunMetrics::median_delay() const { return percentile(delays(*this), 0.5); }
double RunMetrics::p95_delay() const { return percentile(delays(*this), 0.95); }

double RunMetrics::filtered_fraction() const {
  if (frames.empty()) return 0.0;
  const auto sent = std::count_if(frames.begin(), frames.end(), [](const FrameRecord& f) { return f.transmitted; });
  return 1.0 - static_cast<double>(sent) / static_cast<double>(frames.size());
}

std::size_t RunMetrics::extension_updates() const {
  return static_cast<std::size_t>(std::count_if(updates.begin(), updates.end(), [](const UpdateRecord& u) {
    return u.scope == CheckpointScope::extension_only;
  }));
}

std::size_t RunMetrics::full_updates() const { return updates.size() - extension_updates(); }

void write_metrics_csv(std::ostream& out, const RunMetrics& m, bool header) {
  if (header) out << "run_id,batch,frame,tp,fp,fn,delay_s,bytes_attributed\n";
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& f : m.frames) {
    out << m.run_id << ',' << f.batch << ',' << f.frame << ',' << f.tp << ',' << f.fp << ',' << f.fn << ','
        << f.delay.total() << ',' << f.bytes_attributed << '\n';
    tp += f.tp;
    fp += f.fp;
    fn += f.fn;
  }
  out << m.run_id << ",-1,-1," << tp << ',' << fp << ',' << fn << ',' << m.mean_delay() << ','
      << m.uplink_bytes + m.downlink_bytes << '\n';
}

void write_summary_csv(std::ostream& out, const std::vector<RunMetrics>& runs) {
  out << "run_id,mode,frames,mean_f1,micro_f1,normalized_bandwidth,uplink_bytes,downlink_bytes,mean_delay_s,"
         "median_delay_s,p95_delay_s,filtered_fraction,extension_updates,full_updates\n";
  for (const auto& m : runs)
    out << m.run_id << ',' << m.mode << ',' << m.frames.size() << ',' << m.mean_f1() << ',' << m.micro_f1().f1
        << ',' << m.normalized_bandwidth() << ',' << m.uplink_bytes << ',' << m.downlink_bytes << ','
        << m.mean_delay() << ',' << m.median_delay() << ',' << m.p95_delay() << ',' << m.filtered_fraction()
        << ',' << m.extension_updates() << ',' << m.full_updates() << '\n';
}

}  // namespace ltc
