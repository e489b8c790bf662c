#include "ltc/scene.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <fstream>

#include "ltc/error.hpp"
#include "ltc/rng.hpp"

namespace ltc {
namespace {

constexpr int kObjectTexturePeriod = 8;

struct Track {
  int spec = 0;
  int id = 0;
  int t0 = 0;
  int x0 = 0, y0 = 0, w = 0, h = 0, vx = 0, vy = 0;
  int death = INT_MAX;  // exclusive
};

struct Appearance {
  BackgroundSpec background;
  std::optional<Texture> object_texture;
  std::optional<Rgb> object_color, object_color2;
};

Appearance appearance_at(const SceneConfig& cfg, int frame) {
  Appearance a{cfg.background, {}, {}, {}};
  std::vector<const DriftEntry*> entries;
  for (const auto& d : cfg.drift) entries.push_back(&d);
  std::stable_sort(entries.begin(), entries.end(), [](auto* l, auto* r) { return l->frame < r->frame; });
  for (const DriftEntry* d : entries) {
    if (d->frame > frame) break;
    if (d->background_texture) a.background.texture = *d->background_texture;
    if (d->background_color) a.background.color = *d->background_color;
    if (d->background_color2) a.background.color2 = *d->background_color2;
    if (d->noise) a.background.noise = *d->noise;
    if (d->flicker) a.background.flicker = *d->flicker;
    if (d->object_texture) a.object_texture = d->object_texture;
    if (d->object_color) a.object_color = d->object_color;
    if (d->object_color2) a.object_color2 = d->object_color2;
  }
  return a;
}

Rgb lerp(const Rgb& a, const Rgb& b, float t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

Rgb texel(Texture tex, int r, int c, int period, int extent, const Rgb& a, const Rgb& b) {
  const int half = std::max(1, period / 2);
  switch (tex) {
    case Texture::flat:
      return a;
    case Texture::stripes:
      return (c / half) % 2 == 0 ? a : b;
    case Texture::checker:
      return ((r / half) + (c / half)) % 2 == 0 ? a : b;
    case Texture::dots: {
      const int p = std::max(2, period);
      const double dr = (r % p) + 0.5 - p / 2.0, dc = (c % p) + 0.5 - p / 2.0;
      return dr * dr + dc * dc < (p / 4.0) * (p / 4.0) ? b : a;
    }
    case Texture::gradient:
      return lerp(a, b, static_cast<float>(r) / static_cast<float>(std::max(1, extent - 1)));
    case Texture::speckle:
      return (mix64((static_cast<std::uint64_t>(r / half) << 32) ^ static_cast<std::uint64_t>(c / half)) & 1) ? a : b;
  }
  return a;
}

int uniform_int(Rng& rng, int lo, int hi) {
  if (hi < lo) std::swap(lo, hi);
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

BoundingBox track_box(const Track& t, int frame) {
  const int dt = frame - t.t0;
  return {static_cast<double>(t.x0 + t.vx * dt), static_cast<double>(t.y0 + t.vy * dt), static_cast<double>(t.w),
          static_cast<double>(t.h), t.id};
}

std::optional<BoundingBox> clip_box(const BoundingBox& b, int side) {
  const double x0 = std::max(0.0, b.x), y0 = std::max(0.0, b.y);
  const double x1 = std::min<double>(side, b.x + b.w), y1 = std::min<double>(side, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  return BoundingBox{x0, y0, x1 - x0, y1 - y0, b.id};
}

bool visible(const Track& t, int frame, int side) {
  return frame >= t.t0 && frame < t.death && clip_box(track_box(t, frame), side).has_value();
}

Track spawn(const ObjectSpec& spec, int spec_index, int id, int frame, int side, bool initial, Rng& rng) {
  Track t;
  t.spec = spec_index;
  t.id = id;
  t.t0 = frame;
  t.w = std::min(side, uniform_int(rng, spec.min_width, spec.max_width));
  t.h = std::min(side, uniform_int(rng, spec.min_height, spec.max_height));
  t.vx = uniform_int(rng, spec.min_vx, spec.max_vx);
  t.vy = uniform_int(rng, spec.min_vy, spec.max_vy);
  t.x0 = uniform_int(rng, 0, side - t.w);
  t.y0 = uniform_int(rng, 0, side - t.h);
  if (!initial) {
    // Moving objects enter from the edge they travel away from.
    if (std::abs(t.vx) >= std::abs(t.vy) && t.vx != 0) t.x0 = t.vx > 0 ? 0 : side - t.w;
    else if (t.vy != 0) t.y0 = t.vy > 0 ? 0 : side - t.h;
  }
  if (spec.max_life > 0) t.death = frame + uniform_int(rng, std::max(1, spec.min_life), spec.max_life);
  return t;
}

std::vector<Track> generate_tracks(const SceneConfig& cfg, int end_frame) {
  std::vector<Track> tracks;
  Rng rng = make_rng(cfg.seed, {0x7472616b});
  const int side = cfg.side();
  int next_id = 1;
  for (std::size_t s = 0; s < cfg.objects.size(); ++s)
    for (int k = 0; k < cfg.objects[s].initial_count; ++k)
      tracks.push_back(spawn(cfg.objects[s], static_cast<int>(s), next_id++, 0, side, true, rng));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int t = 1; t < end_frame; ++t) {
    for (std::size_t s = 0; s < cfg.objects.size(); ++s) {
      const ObjectSpec& spec = cfg.objects[s];
      if (spec.spawn_rate <= 0.0) continue;
      const bool fire = coin(rng) < spec.spawn_rate;
      if (!fire) continue;
      const int alive = static_cast<int>(std::count_if(tracks.begin(), tracks.end(), [&](const Track& tr) {
        return tr.spec == static_cast<int>(s) && visible(tr, t, side);
      }));
      Track cand = spawn(spec, static_cast<int>(s), next_id, t, side, false, rng);
      if (alive < spec.max_alive) {
        tracks.push_back(cand);
        ++next_id;
      }
    }
  }
  return tracks;
}

void check_unit(const Rgb& c, const char* what) {
  for (float v : {c.r, c.g, c.b})
    if (!(v >= 0.0f && v <= 1.0f)) throw InvalidInput(std::string(what) + " components must lie in [0,1]");
}

}  // namespace

void SceneConfig::validate() const {
  if (regions_per_axis < 1) throw InvalidInput("scene: regions_per_axis must be >= 1");
  if (fps < 1) throw InvalidInput("scene: fps must be >= 1");
  if (!(background.noise >= 0.0 && background.noise < 0.5)) throw InvalidInput("scene: noise must lie in [0, 0.5)");
  if (!(background.flicker >= 0.0 && background.flicker < 0.5)) throw InvalidInput("scene: flicker must lie in [0, 0.5)");
  if (background.period < 1) throw InvalidInput("scene: background period must be positive");
  check_unit(background.color, "background color");
  check_unit(background.color2, "background color2");
  for (const ObjectSpec& o : objects) {
    if (o.min_width < 1 || o.min_height < 1 || o.max_width < o.min_width || o.max_height < o.min_height)
      throw InvalidInput("scene: object '" + o.name + "' has an invalid size range");
    if (o.min_vx > o.max_vx || o.min_vy > o.max_vy)
      throw InvalidInput("scene: object '" + o.name + "' has an invalid velocity range");
    if (!(o.spawn_rate >= 0.0 && o.spawn_rate <= 1.0))
      throw InvalidInput("scene: object '" + o.name + "' spawn_rate must lie in [0,1]");
    if (o.initial_count < 0 || o.max_alive < 0 || o.min_life < 0 || o.max_life < o.min_life)
      throw InvalidInput("scene: object '" + o.name + "' has invalid counts or lifetimes");
    check_unit(o.color, "object color");
    check_unit(o.color2, "object color2");
  }
  for (const DriftEntry& d : drift) {
    if (d.frame < 0) throw InvalidInput("scene: drift frame must be non-negative");
    if (d.noise && !(*d.noise >= 0.0 && *d.noise < 0.5)) throw InvalidInput("scene: drift noise must lie in [0, 0.5)");
  }
}

std::vector<LabeledFrame> generate_batch(const SceneConfig& cfg, int start_index, int count) {
  cfg.validate();
  if (count < 1) throw InvalidInput("generate_batch: count must be >= 1");
  if (start_index < 0) throw InvalidInput("generate_batch: start index must be non-negative");
  const int side = cfg.side();
  const std::vector<Track> tracks = generate_tracks(cfg, start_index + count);

  std::vector<LabeledFrame> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int f = start_index; f < start_index + count; ++f) {
    const Appearance look = appearance_at(cfg, f);
    const BackgroundSpec& bg = look.background;
    LabeledFrame lf;
    lf.frame.index = f;
    lf.frame.timestamp = static_cast<double>(f) / cfg.fps;
    nn::Tensor img({side, side, 3});
    float* px = img.data();
    for (int r = 0; r < side; ++r)
      for (int c = 0; c < side; ++c) {
        const Rgb v = texel(bg.texture, r, c, bg.period, side, bg.color, bg.color2);
        float* p = px + (static_cast<std::size_t>(r) * side + c) * 3;
        p[0] = v.r, p[1] = v.g, p[2] = v.b;
      }

    for (const Track& t : tracks) {
      if (!visible(t, f, side)) continue;
      const ObjectSpec& spec = cfg.objects[static_cast<std::size_t>(t.spec)];
      const Texture tex = look.object_texture.value_or(spec.texture);
      const Rgb ca = look.object_color.value_or(spec.color);
      const Rgb cb = look.object_color2.value_or(spec.color2);
      const BoundingBox full = track_box(t, f);
      const BoundingBox clipped = *clip_box(full, side);
      const int x0 = static_cast<int>(full.x), y0 = static_cast<int>(full.y);
      for (int r = static_cast<int>(clipped.y); r < static_cast<int>(clipped.y + clipped.h); ++r) {
        for (int c = static_cast<int>(clipped.x); c < static_cast<int>(clipped.x + clipped.w); ++c) {
          if (spec.shape == ObjectShape::ellipse) {
            const double dx = (c + 0.5 - (full.x + full.w / 2)) / (full.w / 2);
            const double dy = (r + 0.5 - (full.y + full.h / 2)) / (full.h / 2);
            if (dx * dx + dy * dy > 1.0) continue;
          }
          const Rgb v = texel(tex, r - y0, c - x0, kObjectTexturePeriod, t.h, ca, cb);
          float* p = px + (static_cast<std::size_t>(r) * side + c) * 3;
          p[0] = v.r, p[1] = v.g, p[2] = v.b;
        }
      }
      lf.truth.push_back(clipped);
    }

    Rng noise_rng = make_rng(cfg.seed, {0x6e6f6973, static_cast<std::uint64_t>(f)});
    const float flick = bg.flicker > 0.0
                            ? std::uniform_real_distribution<float>(-static_cast<float>(bg.flicker),
                                                                    static_cast<float>(bg.flicker))(noise_rng)
                            : 0.0f;
    std::uniform_real_distribution<float> noise(-static_cast<float>(bg.noise), static_cast<float>(bg.noise));
    const bool noisy = bg.noise > 0.0;
    for (float& v : img.values()) {
      float x = v + flick + (noisy ? noise(noise_rng) : 0.0f);
      x = std::clamp(x, 0.0f, 1.0f);
      v = std::round(x * 255.0f) / 255.0f;
    }
    lf.frame.pixels = std::move(img);
    out.push_back(std::move(lf));
  }
  return out;
}

std::vector<nn::Tensor> grid_split(const nn::Tensor& frame, int L) {
  const nn::Tensor packed = grid_regions(frame, L);
  std::vector<nn::Tensor> regions;
  const std::size_t n = 28 * 28 * 3;
  for (int k = 0; k < L * L; ++k)
    regions.emplace_back(nn::Shape{28, 28, 3},
                         std::vector<float>(packed.data() + k * n, packed.data() + (k + 1) * n));
  return regions;
}

nn::Tensor grid_regions(const nn::Tensor& frame, int L) {
  if (L < 1) throw InvalidInput("grid_split: L must be >= 1");
  if (frame.rank() != 3 || frame.dim(2) != 3 || frame.dim(0) != 28 * L || frame.dim(1) != 28 * L)
    throw InvalidInput("grid_split: frame " + nn::shape_string(frame.shape()) + " is not " +
                       std::to_string(28 * L) + "x" + std::to_string(28 * L) + "x3");
  const int side = 28 * L;
  nn::Tensor out({L * L, 28, 28, 3});
  float* dst = out.data();
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j)
      for (int r = 0; r < 28; ++r) {
        const float* src = frame.data() + (static_cast<std::size_t>(28 * i + r) * side + 28 * j) * 3;
        dst = std::copy(src, src + 28 * 3, dst);
      }
  return out;
}

nn::Tensor grid_assemble(const std::vector<nn::Tensor>& regions, int L) {
  if (L < 1 || regions.size() != static_cast<std::size_t>(L) * L)
    throw InvalidInput("grid_assemble: expected L*L regions");
  const int side = 28 * L;
  nn::Tensor frame({side, side, 3});
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      const nn::Tensor& reg = regions[static_cast<std::size_t>(i * L + j)];
      if (reg.shape() != nn::Shape{28, 28, 3}) throw InvalidInput("grid_assemble: region is not 28x28x3");
      for (int r = 0; r < 28; ++r)
        std::copy(reg.data() + r * 28 * 3, reg.data() + (r + 1) * 28 * 3,
                  frame.data() + (static_cast<std::size_t>(28 * i + r) * side + 28 * j) * 3);
    }
  return frame;
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
  const double w = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double h = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  return w > 0 && h > 0 ? w * h : 0.0;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double inter = intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

PixelQuality PixelQuality::uniform(int height, int width, bool high) {
  return {height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, high ? 1 : 0)};
}

double hq_coverage(const PixelQuality& q, const BoundingBox& box) {
  // Pixel c is inside [x, x+w) when its centre c + 0.5 is.
  const int c0 = std::max(0, static_cast<int>(std::ceil(box.x - 0.5)));
  const int c1 = std::min(q.width, static_cast<int>(std::ceil(box.x + box.w - 0.5)));
  const int r0 = std::max(0, static_cast<int>(std::ceil(box.y - 0.5)));
  const int r1 = std::min(q.height, static_cast<int>(std::ceil(box.y + box.h - 0.5)));
  if (c1 <= c0 || r1 <= r0) return 0.0;
  std::size_t hq = 0;
  for (int r = r0; r < r1; ++r)
    for (int c = c0; c < c1; ++c) hq += q.at(r, c) ? 1 : 0;
  return static_cast<double>(hq) / (static_cast<double>(r1 - r0) * (c1 - c0));
}

std::vector<BoundingBox> teacher_detect(const PixelQuality& quality, const std::vector<BoundingBox>& truth,
                                        double alpha) {
  std::vector<BoundingBox> found;
  for (const BoundingBox& b : truth)
    if (hq_coverage(quality, b) >= alpha) found.push_back(b);
  return found;
}

void write_ppm(const std::string& path, const nn::Tensor& pixels) {
  if (pixels.rank() != 3 || pixels.dim(2) != 3) throw InvalidInput("write_ppm: expected an (H,W,3) image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P6\n" << pixels.dim(1) << " " << pixels.dim(0) << "\n255\n";
  for (float v : pixels.values()) out.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string to_string(Texture t) {
  switch (t) {
    case Texture::flat: return "flat";
    case Texture::stripes: return "stripes";
    case Texture::checker: return "checker";
    case Texture::dots: return "dots";
    case Texture::gradient: return "gradient";
    case Texture::speckle: return "speckle";
  }
  return "flat";
}

Texture texture_from_string(const std::string& s) {
  for (Texture t : {Texture::flat, Texture::stripes, Texture::checker, Texture::dots, Texture::gradient,
                    Texture::speckle})
    if (to_string(t) == s) return t;
  throw InvalidInput("unknown texture '" + s + "'");
}

}  // namespace ltc
