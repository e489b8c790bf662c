#pragma once

#include <string>
#include <utility>
#include <vector>

// Minimal standalone SVG charts.
namespace ltc::svg {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // drawn in the given order
};

// One polyline (with point markers) per series, linear axes, legend.
struct LinePlot {
  std::string title, x_label, y_label;
  std::vector<Series> series;
};

struct BarChart {
  std::string title, y_label;
  std::vector<std::pair<std::string, double>> bars;
};

std::string escape(const std::string& text);
std::string render(const LinePlot& plot);
std::string render(const BarChart& chart);

// Places plots side by side in one document.
std::string combine(const std::vector<std::string>& documents);

}  // namespace ltc::svg
