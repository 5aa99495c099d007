#pragma once

// Minimal static line plots written as standalone SVG files.

#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace mito::cli {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  double x_min = 0.0, x_max = 1.0;
  double y_min = 0.0, y_max = 1.0;
  /// Optional vertical marker (e.g. an operating threshold); ignored when NaN.
  double marker_x = std::numeric_limits<double>::quiet_NaN();
};

void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace mito::cli
