#include "svg_plot.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mito/error.hpp"

namespace mito::cli {
namespace {

constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_line_plot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series) {
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double xs = spec.x_max > spec.x_min ? pw / (spec.x_max - spec.x_min) : 1.0;
  const double ys = spec.y_max > spec.y_min ? ph / (spec.y_max - spec.y_min) : 1.0;
  auto px = [&](double x) { return kLeft + (x - spec.x_min) * xs; };
  auto py = [&](double y) { return kTop + ph - (y - spec.y_min) * ys; };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
      << escape(spec.title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double fx = spec.x_min + (spec.x_max - spec.x_min) * i / 5.0;
    const double fy = spec.y_min + (spec.y_max - spec.y_min) * i / 5.0;
    svg << "<line x1=\"" << px(fx) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(fx) << "\" y2=\"" << kTop + ph + 5
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << px(fx) << "\" y=\"" << kTop + ph + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << std::setprecision(3) << fx
        << "</text>\n";
    svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << kLeft << "\" y2=\"" << py(fy)
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(fy) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << fy << "</text>\n";
    svg << std::setprecision(2);
  }
  svg << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(spec.x_label)
      << "</text>\n";
  svg << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"12\" transform=\"rotate(-90 18 " << kTop + ph / 2 << ")\">" << escape(spec.y_label)
      << "</text>\n";

  if (!std::isnan(spec.marker_x)) {
    svg << "<line x1=\"" << px(spec.marker_x) << "\" y1=\"" << kTop << "\" x2=\"" << px(spec.marker_x) << "\" y2=\""
        << kTop + ph << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[s].points) svg << px(x) << "," << py(y) << " ";
    svg << "\"/>\n";
    svg << "<text x=\"" << kLeft + 10 << "\" y=\"" << kTop + 16 + 15 * s << "\" fill=\"" << color
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << escape(series[s].label) << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << svg.str();
}

}  // namespace mito::cli
