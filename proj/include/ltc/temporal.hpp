#pragma once

#include <vector>

#include "ltc/scene.hpp"
#include "ltc/student.hpp"

namespace ltc {

// Encoder features of every grid cell of one frame, (i*L + j) * 128 + k.
struct FeatureMap {
  int regions_per_axis = 0;
  int frame_index = 0;
  std::vector<float> values;

  const float* cell(int k) const { return values.data() + static_cast<std::size_t>(k) * kFeatureDim; }
};

// Consecutive run of frames [first, last] (frame indices, inclusive) and the
// frame chosen to represent it.
struct Partition {
  int first = 0;
  int last = 0;
  int representative = 0;

  int size() const { return last - first + 1; }
  bool contains(int frame) const { return frame >= first && frame <= last; }
  bool operator==(const Partition&) const = default;
};

FeatureMap frame_features(const Frame& frame, const StudentNet& student, int regions_per_axis);
// Encodes several frames in one pass; same result as calling frame_features per frame.
std::vector<FeatureMap> batch_features(const std::vector<LabeledFrame>& frames, const StudentNet& student,
                                       int regions_per_axis);

// Sum over cells of the squared L2 distance between the two frames' features.
double frame_difference(const FeatureMap& a, const FeatureMap& b);

// Full symmetric difference matrix, row-major n x n.
std::vector<double> difference_matrix(const std::vector<FeatureMap>& features);

// Greedy left-to-right split: a frame joins the open partition iff its
// difference to every member is < th; otherwise it opens a new one.
// Representatives are chosen with `representative`.
std::vector<Partition> partition_batch(const std::vector<FeatureMap>& features, double th);
// Same rule on a precomputed difference matrix over frames first_index.. .
std::vector<Partition> partition_by_matrix(const std::vector<double>& diff, int n, double th, int first_index = 0);

// Offset (0-based, within `members`) minimising the summed difference to the
// other members; ties go to the lowest offset.
int representative(const std::vector<FeatureMap>& members);
int representative_by_matrix(const std::vector<double>& diff, int n, int lo, int hi);

enum class FeatureKind { encoder, raw_pixel, edge_count };

struct DifferenceSeries {
  FeatureKind kind;
  std::vector<double> values;  // values[k] = difference between frames k and k+1
};

// Consecutive-frame difference series under several feature kinds:
// encoder = frame_difference, raw_pixel = mean absolute pixel difference,
// edge_count = |edge pixels(a) - edge pixels(b)| / pixel count.
std::vector<DifferenceSeries> feature_compare(const std::vector<LabeledFrame>& frames, const StudentNet& student,
                                              int regions_per_axis, const std::vector<FeatureKind>& kinds);

double mean_abs_difference(const nn::Tensor& a, const nn::Tensor& b);
std::size_t edge_count(const nn::Tensor& frame, float threshold = 0.1f);

std::string to_string(FeatureKind k);

}  // namespace ltc
