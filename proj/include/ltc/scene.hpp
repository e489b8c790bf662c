#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ltc/nn/tensor.hpp"

// Synthetic video source: textured objects moving over a textured
// background, with exact ground-truth boxes and a ground-truth teacher.
// Pixel coordinates are (row, col); boxes use x = col, y = row.
namespace ltc {

enum class Texture : std::uint8_t { flat, stripes, checker, dots, gradient, speckle };
enum class ObjectShape : std::uint8_t { rect, ellipse };

struct Rgb {
  float r = 0.0f, g = 0.0f, b = 0.0f;
  bool operator==(const Rgb&) const = default;
};

struct ObjectSpec {
  std::string name = "object";
  ObjectShape shape = ObjectShape::rect;
  int min_width = 32, max_width = 48;
  int min_height = 32, max_height = 48;
  int min_vx = 0, max_vx = 0;  // px/frame
  int min_vy = 0, max_vy = 0;
  Texture texture = Texture::checker;
  Rgb color{0.85f, 0.2f, 0.15f};
  Rgb color2{0.45f, 0.05f, 0.05f};
  double spawn_rate = 0.0;  // probability of one spawn per frame
  int initial_count = 0;    // objects present at frame 0
  int max_alive = 8;        // spawns are skipped while this many are visible
  int min_life = 0, max_life = 0;  // frames; 0 = until the object leaves the canvas
};

struct BackgroundSpec {
  Texture texture = Texture::stripes;
  Rgb color{0.5f, 0.55f, 0.5f};
  Rgb color2{0.4f, 0.45f, 0.4f};
  int period = 16;       // texture scale in pixels
  double noise = 0.02;   // per-pixel, per-frame uniform noise amplitude
  double flicker = 0.0;  // per-frame global brightness jitter amplitude
  bool operator==(const BackgroundSpec&) const = default;
};

// Appearance change taking effect at `frame` (and persisting).
struct DriftEntry {
  int frame = 0;
  std::optional<Texture> background_texture;
  std::optional<Rgb> background_color, background_color2;
  std::optional<double> noise, flicker;
  std::optional<Texture> object_texture;
  std::optional<Rgb> object_color, object_color2;
};

struct SceneConfig {
  int regions_per_axis = 16;  // L
  int fps = 30;
  std::vector<ObjectSpec> objects;
  BackgroundSpec background;
  std::vector<DriftEntry> drift;
  std::uint64_t seed = 1;

  int side() const { return 28 * regions_per_axis; }
  // Throws InvalidInput on a malformed configuration.
  void validate() const;
};

struct BoundingBox {
  double x = 0, y = 0, w = 0, h = 0;
  int id = 0;
  double area() const { return w * h; }
  bool operator==(const BoundingBox&) const = default;
};

struct Frame {
  nn::Tensor pixels;  // (H, W, 3), values k/255
  int index = 0;
  double timestamp = 0;
};

struct LabeledFrame {
  Frame frame;
  std::vector<BoundingBox> truth;
};

// Frames [start_index, start_index + count). Pure in (config, indices).
std::vector<LabeledFrame> generate_batch(const SceneConfig& config, int start_index, int count);

// Region (i, j) covers rows [28i, 28i+28) and cols [28j, 28j+28); the
// result is indexed i * L + j.
std::vector<nn::Tensor> grid_split(const nn::Tensor& frame, int regions_per_axis);
// Same tiling packed as one (L*L, 28, 28, 3) batch.
nn::Tensor grid_regions(const nn::Tensor& frame, int regions_per_axis);
nn::Tensor grid_assemble(const std::vector<nn::Tensor>& regions, int regions_per_axis);

double iou(const BoundingBox& a, const BoundingBox& b);
double intersection_area(const BoundingBox& a, const BoundingBox& b);

// Per-pixel high-quality flags of a reconstructed frame.
struct PixelQuality {
  int height = 0, width = 0;
  std::vector<std::uint8_t> hq;  // row-major, 1 = full quality

  static PixelQuality uniform(int height, int width, bool high);
  bool at(int row, int col) const { return hq[static_cast<std::size_t>(row) * width + col] != 0; }
};

// Fraction of the box's pixels (by pixel centre) that are high quality.
double hq_coverage(const PixelQuality& quality, const BoundingBox& box);

// Ground-truth stand-in for the server detector: a truth box is detected
// iff its high-quality coverage is at least alpha.
std::vector<BoundingBox> teacher_detect(const PixelQuality& quality, const std::vector<BoundingBox>& truth,
                                        double alpha);

// Binary PPM (P6, 8-bit).
void write_ppm(const std::string& path, const nn::Tensor& pixels);

std::string to_string(Texture t);
Texture texture_from_string(const std::string& s);

}  // namespace ltc
