#include "ltc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace ltc::svg {
namespace {

constexpr double kWidth = 520, kHeight = 360;
constexpr double kLeft = 64, kRight = 150, kTop = 36, kBottom = 52;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::fabs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    }
  }
  double map(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void header(std::ostringstream& o, const std::string& title) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Range* x, const Range& y, const std::string& xl, const std::string& yl) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  o << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n"
    << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = y.lo + (y.hi - y.lo) * k / 4.0;
    const double py = y.map(v, y0, y1);
    o << "<text x=\"" << x0 - 6 << "\" y=\"" << fixed(py + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  if (x) {
    for (int k = 0; k <= 4; ++k) {
      const double v = x->lo + (x->hi - x->lo) * k / 4.0;
      o << "<text x=\"" << fixed(x->map(v, x0, x1)) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">" << num(v)
        << "</text>\n";
    }
  }
  o << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << escape(xl)
    << "</text>\n"
    << "<text x=\"16\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << (y0 + y1) / 2 << ")\">" << escape(yl) << "</text>\n";
}

}  // namespace

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string render(const LinePlot& plot) {
  Range x, y;
  for (const auto& s : plot.series)
    for (const auto& [px, py] : s.points) {
      x.add(px);
      y.add(py);
    }
  x.settle();
  y.settle();
  std::ostringstream o;
  header(o, plot.title);
  axes(o, &x, y, plot.x_label, plot.y_label);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [px, py] : s.points) o << fixed(x.map(px, x0, x1)) << ',' << fixed(y.map(py, y0, y1)) << ' ';
    o << "\"/>\n";
    for (const auto& [px, py] : s.points)
      o << "<circle cx=\"" << fixed(x.map(px, x0, x1)) << "\" cy=\"" << fixed(y.map(py, y0, y1)) << "\" r=\"3\" fill=\""
        << color << "\"/>\n";
    const double ly = kTop + 14.0 * static_cast<double>(k);
    o << "<rect x=\"" << x1 + 12 << "\" y=\"" << ly << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n"
      << "<text x=\"" << x1 + 26 << "\" y=\"" << ly + 9 << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string render(const BarChart& chart) {
  Range y;
  y.add(0.0);
  for (const auto& [name, v] : chart.bars) y.add(v);
  y.settle();
  std::ostringstream o;
  header(o, chart.title);
  axes(o, nullptr, y, "", chart.y_label);
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  const double slot = (x1 - x0) / static_cast<double>(std::max<std::size_t>(chart.bars.size(), 1));
  for (std::size_t k = 0; k < chart.bars.size(); ++k) {
    const auto& [name, v] = chart.bars[k];
    const double top = y.map(v, y0, y1), base = y.map(0.0, y0, y1);
    const double bx = x0 + slot * static_cast<double>(k) + slot * 0.15;
    o << "<rect x=\"" << fixed(bx) << "\" y=\"" << fixed(std::min(top, base)) << "\" width=\"" << fixed(slot * 0.7)
      << "\" height=\"" << fixed(std::fabs(base - top)) << "\" fill=\"" << kPalette[k % std::size(kPalette)] << "\"/>\n"
      << "<text x=\"" << fixed(bx + slot * 0.35) << "\" y=\"" << y0 + 16 << "\" text-anchor=\"middle\">"
      << escape(name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string combine(const std::vector<std::string>& documents) {
  std::ostringstream o;
  const double width = kWidth * static_cast<double>(documents.size());
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << kHeight << "\" viewBox=\"0 0 "
    << width << ' ' << kHeight << "\">\n";
  for (std::size_t k = 0; k < documents.size(); ++k) {
    // Nested <svg> elements keep each chart's coordinate system.
    std::string doc = documents[k];
    const auto pos = doc.find("<svg ");
    if (pos != std::string::npos) doc.insert(pos + 5, "x=\"" + num(kWidth * static_cast<double>(k)) + "\" ");
    o << doc;
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ltc::svg
