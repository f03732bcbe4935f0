#pragma once

#include "fmsolve/numeric.hpp"
#include "fmsolve/ode.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fmsolve::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool line = true;
  bool markers = false;
  bool dashed = false;
  std::vector<std::string> annotations;  ///< optional text next to each marker
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 480;
};

/// Line/marker chart with linear or log10 axes. Non-finite points (and
/// non-positive ones on log axes) are skipped.
std::string line_plot(const Plot& plot, const std::vector<Series>& series);

/// 2D scatter of the first two columns.
std::string scatter(const Plot& plot, const PointBatch& points, const std::string& color);

/// Bar chart over [edges[i], edges[i+1]).
std::string histogram(const Plot& plot, const std::vector<double>& edges,
                      const std::vector<double>& heights);

/// Filled stability regions, one translucent layer per raster. Inside cells
/// are merged into horizontal runs.
std::string stability_regions(const Plot& plot, const std::vector<ode::StabilityRaster>& rasters);

/// Two charts side by side in one document.
std::string side_by_side(const std::string& left, const std::string& right, int width,
                         int height);

void write(const std::filesystem::path& path, const std::string& document);

/// Default palette, cycled by index.
const std::string& color(std::size_t index);

}  // namespace fmsolve::svg
