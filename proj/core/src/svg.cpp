#include "adaptfeat/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "adaptfeat/csv.hpp"

namespace adaptfeat::svg {

namespace {

constexpr std::array<int, 3> kDark = {8, 48, 107};
constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                 "#ff7f0e", "#9467bd", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string heatmap_color(double value, double max_value) {
  if (!(max_value > 0.0)) throw DomainError("heatmap: max_value must be positive");
  double t = value / max_value;
  if (!(t > 0.0)) t = 0.0;
  t = std::min(t, 1.0);
  char buf[8];
  int rgb[3];
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<int>(std::lround(255.0 - t * (255.0 - kDark[static_cast<std::size_t>(c)])));
  }
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string heatmap(const Matrix& values, double max_value, int cell) {
  if (cell <= 0) throw DomainError("heatmap: cell size must be positive");
  std::ostringstream out;
  const Index w = values.cols() * cell;
  const Index h = values.rows() * cell;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\" shape-rendering=\"crispEdges\">\n";
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      out << "<rect x=\"" << j * cell << "\" y=\"" << i * cell << "\" width=\"" << cell
          << "\" height=\"" << cell << "\" fill=\"" << heatmap_color(values(i, j), max_value) << "\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string line_plot(const Vector& x, const std::vector<Series>& series, int width, int height) {
  if (x.size() < 2) throw ShapeError("line_plot: need at least two points");
  double ymin = 0.0;
  double ymax = 0.0;
  for (const Series& s : series) {
    if (s.y.size() != x.size()) throw ShapeError("line_plot: series length mismatch");
    ymin = std::min(ymin, s.y.minCoeff());
    ymax = std::max(ymax, s.y.maxCoeff());
  }
  if (ymax <= ymin) ymax = ymin + 1.0;
  const double xmin = x.minCoeff();
  const double xmax = x.maxCoeff() > xmin ? x.maxCoeff() : xmin + 1.0;
  const double margin = 40.0;
  const double pw = width - 2 * margin;
  const double ph = height - 2 * margin;
  const auto px = [&](double v) { return margin + (v - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double v) { return height - margin - (v - ymin) / (ymax - ymin) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(py(ymin)) << "\" x2=\"" << fmt(margin + pw)
      << "\" y2=\"" << fmt(py(ymin)) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << fmt(margin) << "\" y1=\"" << fmt(py(ymin)) << "\" x2=\"" << fmt(margin)
      << "\" y2=\"" << fmt(py(ymax)) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << fmt(margin) << "\" y=\"" << fmt(height - margin / 3) << "\" font-size=\"10\">"
      << csv::format_double(xmin) << "</text>\n";
  out << "<text x=\"" << fmt(margin + pw) << "\" y=\"" << fmt(height - margin / 3)
      << "\" font-size=\"10\" text-anchor=\"end\">" << csv::format_double(xmax) << "</text>\n";
  out << "<text x=\"2\" y=\"" << fmt(py(ymax) + 4) << "\" font-size=\"10\">" << csv::format_double(ymax)
      << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* colour = kPalette[s % kPalette.size()];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
    for (Index i = 0; i < x.size(); ++i) {
      if (i > 0) out << ' ';
      out << fmt(px(x(i))) << ',' << fmt(py(series[s].y(i)));
    }
    out << "\"/>\n";
    out << "<text x=\"" << fmt(margin + 8) << "\" y=\"" << fmt(margin + 12.0 * (s + 1))
        << "\" font-size=\"10\" fill=\"" << colour << "\">" << series[s].name << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace adaptfeat::svg
