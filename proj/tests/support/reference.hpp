#pragma once

// Independent double-precision reference implementations and brute-force
// oracles used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include "ltc/labeling.hpp"
#include "ltc/metrics.hpp"
#include "ltc/nn/network.hpp"
#include "ltc/scene.hpp"
#include "ltc/student.hpp"
#include "ltc/temporal.hpp"

namespace ltc::ref {

using Vec = std::vector<double>;

inline Vec to_double(const nn::Tensor& t) { return Vec(t.values().begin(), t.values().end()); }

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void activate(Vec& v, nn::Activation a) {
  for (double& x : v) {
    if (a == nn::Activation::relu) x = x > 0 ? x : 0;
    else if (a == nn::Activation::sigmoid) x = sigmoid(x);
  }
}

// Same-padded cross-correlation, (H,W,C) x (kh,kw,C,K) -> (H,W,K).
inline Vec conv(const Vec& in, int h, int w, int c, const Vec& k, int kh, int kw, int kc, const Vec& b) {
  Vec out(static_cast<std::size_t>(h) * w * kc, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int o = 0; o < kc; ++o) {
        double s = b[static_cast<std::size_t>(o)];
        for (int dy = 0; dy < kh; ++dy)
          for (int dx = 0; dx < kw; ++dx) {
            const int yy = y + dy - kh / 2, xx = x + dx - kw / 2;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            for (int ci = 0; ci < c; ++ci)
              s += in[(static_cast<std::size_t>(yy) * w + xx) * c + ci] *
                   k[((static_cast<std::size_t>(dy) * kw + dx) * c + ci) * kc + o];
          }
        out[(static_cast<std::size_t>(y) * w + x) * kc + o] = s;
      }
  return out;
}

inline Vec maxpool(const Vec& in, int h, int w, int c, int win) {
  const int oh = h / win, ow = w / win;
  Vec out(static_cast<std::size_t>(oh) * ow * c, -std::numeric_limits<double>::infinity());
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int ci = 0; ci < c; ++ci) {
        double& m = out[(static_cast<std::size_t>(y) * ow + x) * c + ci];
        for (int dy = 0; dy < win; ++dy)
          for (int dx = 0; dx < win; ++dx)
            m = std::max(m, in[(static_cast<std::size_t>(y * win + dy) * w + (x * win + dx)) * c + ci]);
      }
  return out;
}

inline Vec dense(const Vec& in, const Vec& wts, const Vec& b, int n, int m) {
  Vec out(b.begin(), b.end());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] += in[static_cast<std::size_t>(i)] * wts[static_cast<std::size_t>(i) * m + j];
  return out;
}

// Interprets a network's layer specs with the given (double) parameters on
// one sample.
inline Vec forward(const nn::Network& net, const std::vector<Vec>& params, Vec x) {
  nn::Shape shape = net.input_shape();
  std::size_t p = 0;
  for (const nn::LayerSpec& l : net.layers()) {
    switch (l.kind) {
      case nn::LayerKind::input: break;
      case nn::LayerKind::conv2d: {
        const int h = shape[0], w = shape[1], c = shape[2];
        x = conv(x, h, w, c, params[p], l.kernel, l.kernel, l.units, params[p + 1]);
        activate(x, l.activation);
        shape = {h, w, l.units};
        p += 2;
        break;
      }
      case nn::LayerKind::maxpool2d:
        x = maxpool(x, shape[0], shape[1], shape[2], l.kernel);
        shape = {shape[0] / l.kernel, shape[1] / l.kernel, shape[2]};
        break;
      case nn::LayerKind::flatten: shape = {static_cast<int>(x.size())}; break;
      case nn::LayerKind::dense:
        x = dense(x, params[p], params[p + 1], shape[0], l.units);
        activate(x, l.activation);
        shape = {l.units};
        p += 2;
        break;
    }
  }
  return x;
}

inline std::vector<Vec> params_of(const nn::Network& net) {
  std::vector<Vec> out;
  for (const auto& t : net.params()) out.push_back(to_double(t));
  return out;
}

inline double bce(double y, double p) {
  const double e = kLossEpsilon;
  p = std::clamp(p, e, 1.0 - e);
  return -(y * std::log(p) + (1 - y) * std::log(1 - p));
}

// Summed BCE of the student over regions, all in double precision.
inline double student_loss(const StudentNet& s, const std::vector<Vec>& enc, const std::vector<Vec>& ext,
                           const std::vector<Vec>& regions, const std::vector<std::uint8_t>& labels) {
  double loss = 0;
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const Vec f = forward(s.encoder(), enc, regions[k]);
    loss += bce(labels[k], forward(s.extension(), ext, f)[0]);
  }
  return loss;
}

// Greedy consecutive partitioning by exhaustive enumeration: among all
// 2^(n-1) consecutive splits whose parts satisfy max-linkage < th, the
// greedy rule yields the lexicographically largest sequence of part sizes.
inline std::vector<std::pair<int, int>> brute_partitions(const std::vector<double>& d, int n, double th) {
  std::vector<std::pair<int, int>> best;
  std::vector<int> best_sizes;
  for (std::uint32_t mask = 0; mask < (1u << (n - 1)); ++mask) {
    std::vector<std::pair<int, int>> parts;
    int lo = 0;
    for (int k = 1; k < n; ++k)
      if (mask & (1u << (k - 1))) {
        parts.emplace_back(lo, k - 1);
        lo = k;
      }
    parts.emplace_back(lo, n - 1);
    bool valid = true;
    for (auto [a, b] : parts)
      for (int i = a; i <= b && valid; ++i)
        for (int j = i + 1; j <= b && valid; ++j) valid = d[static_cast<std::size_t>(i) * n + j] < th;
    if (!valid) continue;
    std::vector<int> sizes;
    for (auto [a, b] : parts) sizes.push_back(b - a + 1);
    if (best.empty() || sizes > best_sizes) {
      best = parts;
      best_sizes = sizes;
    }
  }
  return best;
}

inline int brute_representative(const std::vector<double>& d, int n, int lo, int hi) {
  int best = lo;
  double best_sum = std::numeric_limits<double>::infinity();
  for (int x = lo; x <= hi; ++x) {
    double s = 0;
    for (int y = lo; y <= hi; ++y) s += d[static_cast<std::size_t>(x) * n + y];
    if (s < best_sum - 1e-12) {
      best_sum = s;
      best = x;
    }
  }
  return best;
}

inline double brute_frame_difference(const FeatureMap& a, const FeatureMap& b) {
  double d = 0;
  const int cells = a.regions_per_axis * a.regions_per_axis;
  for (int c = 0; c < cells; ++c) {
    double cell = 0;
    for (int k = 0; k < kFeatureDim; ++k) {
      const double diff = static_cast<double>(a.cell(c)[k]) - static_cast<double>(b.cell(c)[k]);
      cell += diff * diff;
    }
    d += cell;
  }
  return d;
}

// IoU of integer boxes by counting unit cells.
inline double raster_iou(const BoundingBox& a, const BoundingBox& b) {
  const int x0 = static_cast<int>(std::min(a.x, b.x)), y0 = static_cast<int>(std::min(a.y, b.y));
  const int x1 = static_cast<int>(std::max(a.x + a.w, b.x + b.w)), y1 = static_cast<int>(std::max(a.y + a.h, b.y + b.h));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool ia = x >= a.x && x < a.x + a.w && y >= a.y && y < a.y + a.h;
      const bool ib = x >= b.x && x < b.x + b.w && y >= b.y && y < b.y + b.h;
      inter += ia && ib;
      uni += ia || ib;
    }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// F1 by repeatedly taking the globally best remaining pair.
inline std::tuple<double, double, double> brute_f1(const std::vector<BoundingBox>& pred,
                                                   const std::vector<BoundingBox>& truth, double thr = 0.5) {
  if (pred.empty() && truth.empty()) return {1.0, 1.0, 1.0};
  std::vector<char> up(pred.size(), 0), ut(truth.size(), 0);
  std::size_t tp = 0;
  for (;;) {
    double best = -1;
    std::size_t bp = 0, bt = 0;
    for (std::size_t p = 0; p < pred.size(); ++p)
      for (std::size_t t = 0; t < truth.size(); ++t) {
        if (up[p] || ut[t]) continue;
        const double v = raster_iou(pred[p], truth[t]);
        if (v >= thr && v > best) {
          best = v;
          bp = p;
          bt = t;
        }
      }
    if (best < 0) break;
    up[bp] = ut[bt] = 1;
    ++tp;
  }
  const double prec = pred.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred.size());
  const double rec = truth.empty() ? 0.0 : static_cast<double>(tp) / static_cast<double>(truth.size());
  const double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
  return {prec, rec, f1};
}

inline std::size_t formula_byte_cost(int L, std::size_t hq, int r, bool lq = true) {
  const std::size_t cells = static_cast<std::size_t>(L) * L;
  const std::size_t side = static_cast<std::size_t>(28 / r);
  return hq * 28 * 28 * 3 + (lq ? (cells - hq) * side * side * 3 : 0) + (cells + 7) / 8 + 16;
}

inline BoundingBox random_int_box(std::mt19937_64& rng, int extent = 40) {
  std::uniform_int_distribution<int> pos(0, extent), size(1, extent / 2);
  return {static_cast<double>(pos(rng)), static_cast<double>(pos(rng)), static_cast<double>(size(rng)),
          static_cast<double>(size(rng)), 0};
}

inline nn::Tensor random_tensor(const nn::Shape& shape, std::mt19937_64& rng, float lo = 0.0f, float hi = 1.0f) {
  nn::Tensor t(shape);
  std::uniform_real_distribution<float> u(lo, hi);
  for (float& v : t.values()) v = u(rng);
  return t;
}

// Values k/255 like generated frames.
inline nn::Tensor random_frame(int L, std::mt19937_64& rng) {
  nn::Tensor t({28 * L, 28 * L, 3});
  std::uniform_int_distribution<int> u(0, 255);
  for (float& v : t.values()) v = static_cast<float>(u(rng)) / 255.0f;
  return t;
}

inline FeatureMap random_feature_map(int L, int index, std::mt19937_64& rng) {
  FeatureMap f{L, index, std::vector<float>(static_cast<std::size_t>(L) * L * kFeatureDim)};
  std::normal_distribution<float> n(0.0f, 1.0f);
  for (float& v : f.values) v = n(rng);
  return f;
}

// Symmetric, zero-diagonal random distance matrix.
inline std::vector<double> random_distances(int n, std::mt19937_64& rng, double hi = 10.0) {
  std::vector<double> d(static_cast<std::size_t>(n) * n, 0.0);
  std::uniform_real_distribution<double> u(0.0, hi);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d[static_cast<std::size_t>(i) * n + j] = d[static_cast<std::size_t>(j) * n + i] = u(rng);
  return d;
}

}  // namespace ltc::ref
