#pragma once

#include <string>
#include <vector>

#include "adaptfeat/numerics.hpp"

namespace adaptfeat::svg {

/// Fill colour for clamp(value / max, 0, 1) on a white → dark blue ramp.
std::string heatmap_color(double value, double max_value);

/// One rect per matrix entry, row i drawn at y = i * cell.
std::string heatmap(const Matrix& values, double max_value, int cell = 4);

struct Series {
  std::string name;
  Vector y;
};

/// Polyline plot of each series against x, axes scaled to the data range.
std::string line_plot(const Vector& x, const std::vector<Series>& series, int width = 480,
                      int height = 320);

}  // namespace adaptfeat::svg
