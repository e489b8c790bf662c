#include "ltc/temporal.hpp"

#include <cmath>
#include <limits>

#include "ltc/error.hpp"

namespace ltc {

FeatureMap frame_features(const Frame& frame, const StudentNet& student, int L) {
  const nn::Tensor f = student.encode_batch(grid_regions(frame.pixels, L));
  return {L, frame.index, {f.values().begin(), f.values().end()}};
}

std::vector<FeatureMap> batch_features(const std::vector<LabeledFrame>& frames, const StudentNet& student, int L) {
  std::vector<FeatureMap> out;
  out.reserve(frames.size());
  for (const LabeledFrame& lf : frames) out.push_back(frame_features(lf.frame, student, L));
  return out;
}

double frame_difference(const FeatureMap& a, const FeatureMap& b) {
  if (a.regions_per_axis != b.regions_per_axis || a.values.size() != b.values.size())
    throw InvalidInput("frame_difference: feature maps have different grid sizes");
  double d = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    const double diff = static_cast<double>(a.values[k]) - static_cast<double>(b.values[k]);
    d += diff * diff;
  }
  return d;
}

std::vector<double> difference_matrix(const std::vector<FeatureMap>& features) {
  const std::size_t n = features.size();
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = m[j * n + i] = frame_difference(features[i], features[j]);
  return m;
}

int representative_by_matrix(const std::vector<double>& diff, int n, int lo, int hi) {
  if (lo > hi) throw InvalidInput("representative: empty partition");
  int best = lo;
  double best_sum = std::numeric_limits<double>::infinity();
  for (int x = lo; x <= hi; ++x) {
    double sum = 0.0;
    for (int y = lo; y <= hi; ++y)
      if (y != x) sum += diff[static_cast<std::size_t>(x) * n + y];
    if (sum < best_sum) {
      best_sum = sum;
      best = x;
    }
  }
  return best - lo;
}

std::vector<Partition> partition_by_matrix(const std::vector<double>& diff, int n, double th, int first_index) {
  if (n < 1) throw InvalidInput("partition_batch: empty batch");
  if (!(th > 0.0)) throw InvalidInput("partition_batch: threshold must be positive");
  std::vector<Partition> parts;
  int lo = 0;
  auto close = [&](int hi) {
    parts.push_back({first_index + lo, first_index + hi, first_index + lo + representative_by_matrix(diff, n, lo, hi)});
  };
  for (int k = 1; k < n; ++k) {
    bool joins = true;
    for (int m = lo; m < k && joins; ++m) joins = diff[static_cast<std::size_t>(k) * n + m] < th;
    if (!joins) {
      close(k - 1);
      lo = k;
    }
  }
  close(n - 1);
  return parts;
}

std::vector<Partition> partition_batch(const std::vector<FeatureMap>& features, double th) {
  if (features.empty()) throw InvalidInput("partition_batch: empty batch");
  for (std::size_t k = 1; k < features.size(); ++k)
    if (features[k].frame_index != features[k - 1].frame_index + 1)
      throw InvalidInput("partition_batch: frames must be consecutive");
  return partition_by_matrix(difference_matrix(features), static_cast<int>(features.size()), th,
                             features.front().frame_index);
}

int representative(const std::vector<FeatureMap>& members) {
  if (members.empty()) throw InvalidInput("representative: empty partition");
  const int n = static_cast<int>(members.size());
  return representative_by_matrix(difference_matrix(members), n, 0, n - 1);
}

double mean_abs_difference(const nn::Tensor& a, const nn::Tensor& b) {
  if (a.shape() != b.shape()) throw InvalidInput("mean_abs_difference: shape mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::fabs(static_cast<double>(a[k]) - b[k]);
  return s / static_cast<double>(a.size());
}

std::size_t edge_count(const nn::Tensor& frame, float threshold) {
  if (frame.rank() != 3 || frame.dim(2) != 3) throw InvalidInput("edge_count: expected (H,W,3)");
  const int h = frame.dim(0), w = frame.dim(1);
  auto gray = [&](int r, int c) {
    const float* p = frame.data() + (static_cast<std::size_t>(r) * w + c) * 3;
    return (p[0] + p[1] + p[2]) / 3.0f;
  };
  std::size_t n = 0;
  for (int r = 0; r + 1 < h; ++r)
    for (int c = 0; c + 1 < w; ++c) {
      const float g = std::fabs(gray(r, c + 1) - gray(r, c)) + std::fabs(gray(r + 1, c) - gray(r, c));
      if (g > threshold) ++n;
    }
  return n;
}

std::vector<DifferenceSeries> feature_compare(const std::vector<LabeledFrame>& frames, const StudentNet& student,
                                              int L, const std::vector<FeatureKind>& kinds) {
  std::vector<DifferenceSeries> out;
  std::vector<FeatureMap> features;
  for (FeatureKind kind : kinds) {
    DifferenceSeries s{kind, {}};
    if (kind == FeatureKind::encoder && features.empty()) features = batch_features(frames, student, L);
    for (std::size_t k = 0; k + 1 < frames.size(); ++k) {
      const nn::Tensor& a = frames[k].frame.pixels;
      const nn::Tensor& b = frames[k + 1].frame.pixels;
      switch (kind) {
        case FeatureKind::encoder:
          s.values.push_back(frame_difference(features[k], features[k + 1]));
          break;
        case FeatureKind::raw_pixel:
          s.values.push_back(mean_abs_difference(a, b));
          break;
        case FeatureKind::edge_count: {
          const double ea = static_cast<double>(edge_count(a)), eb = static_cast<double>(edge_count(b));
          s.values.push_back(std::fabs(ea - eb) / (static_cast<double>(a.dim(0)) * a.dim(1)));
          break;
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::encoder: return "encoder";
    case FeatureKind::raw_pixel: return "raw_pixel";
    case FeatureKind::edge_count: return "edge_count";
  }
  return "encoder";
}

}  // namespace ltc
