#include "fmsolve/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/format.h>

namespace fmsolve::svg {

namespace {

constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 20.0;
constexpr double kMarginTop = 36.0;
constexpr double kMarginBottom = 50.0;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

// Maps data coordinates to pixels, with optional log10 axes.
class Frame {
 public:
  Frame(const Plot& plot, double x0, double x1, double y0, double y1)
      : plot_(plot), x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (x1_ <= x0_) {
      x0_ -= 0.5;
      x1_ += 0.5;
    }
    if (y1_ <= y0_) {
      y0_ -= 0.5;
      y1_ += 0.5;
    }
  }

  // Axis-space value (log10 applied where requested); NaN when unplottable.
  [[nodiscard]] double ax(double v) const { return axis_value(v, plot_.log_x); }
  [[nodiscard]] double ay(double v) const { return axis_value(v, plot_.log_y); }

  [[nodiscard]] double px(double axis_x) const {
    return kMarginLeft + (axis_x - x0_) / (x1_ - x0_) * inner_width();
  }
  [[nodiscard]] double py(double axis_y) const {
    return plot_.height - kMarginBottom - (axis_y - y0_) / (y1_ - y0_) * inner_height();
  }
  [[nodiscard]] double inner_width() const { return plot_.width - kMarginLeft - kMarginRight; }
  [[nodiscard]] double inner_height() const {
    return plot_.height - kMarginTop - kMarginBottom;
  }

  [[nodiscard]] std::string axes() const {
    std::string s;
    s += fmt::format(
        "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
        "stroke=\"#333\"/>\n",
        kMarginLeft, kMarginTop, inner_width(), inner_height());
    for (double v : ticks(x0_, x1_, plot_.log_x)) {
      const double x = px(v);
      s += fmt::format(
          "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#ddd\"/>\n"
          "<text x=\"{0:.1f}\" y=\"{3:.1f}\" font-size=\"11\" text-anchor=\"middle\">{4}</text>\n",
          x, kMarginTop, plot_.height - kMarginBottom, plot_.height - kMarginBottom + 16,
          tick_label(v, plot_.log_x));
    }
    for (double v : ticks(y0_, y1_, plot_.log_y)) {
      const double y = py(v);
      s += fmt::format(
          "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#ddd\"/>\n"
          "<text x=\"{3:.1f}\" y=\"{4:.1f}\" font-size=\"11\" text-anchor=\"end\">{5}</text>\n",
          kMarginLeft, y, plot_.width - kMarginRight, kMarginLeft - 6, y + 4,
          tick_label(v, plot_.log_y));
    }
    s += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        plot_.width / 2.0, 22.0, escape(plot_.title));
    s += fmt::format(
        "<text x=\"{:.1f}\" y=\"{:.1f}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        kMarginLeft + inner_width() / 2.0, plot_.height - 12.0, escape(plot_.x_label));
    s += fmt::format(
        "<text x=\"16\" y=\"{0:.1f}\" font-size=\"12\" text-anchor=\"middle\" "
        "transform=\"rotate(-90 16 {0:.1f})\">{1}</text>\n",
        kMarginTop + inner_height() / 2.0, escape(plot_.y_label));
    return s;
  }

 private:
  static double axis_value(double v, bool log) {
    if (!std::isfinite(v) || (log && v <= 0.0)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return log ? std::log10(v) : v;
  }

  static std::vector<double> ticks(double lo, double hi, bool log) {
    std::vector<double> out;
    if (log) {
      for (double v = std::ceil(lo); v <= hi + 1e-9; v += 1.0) {
        out.push_back(v);
      }
      if (out.size() > 12) {
        std::vector<double> thinned;
        const auto stride = (out.size() + 9) / 10;
        for (std::size_t i = 0; i < out.size(); i += stride) {
          thinned.push_back(out[i]);
        }
        out = std::move(thinned);
      }
      return out;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
      if (m * mag >= raw) {
        step = m * mag;
        break;
      }
    }
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
      out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    }
    return out;
  }

  static std::string tick_label(double v, bool log) {
    if (log) {
      return fmt::format("1e{}", static_cast<int>(std::lround(v)));
    }
    return fmt::format("{:.3g}", v);
  }

  const Plot& plot_;
  double x0_;
  double x1_;
  double y0_;
  double y1_;
};

std::string header(int width, int height) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n",
      width, height);
}

struct Bounds {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -std::numeric_limits<double>::infinity();
  double y0 = std::numeric_limits<double>::infinity();
  double y1 = -std::numeric_limits<double>::infinity();

  void add(double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
      return;
    }
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  [[nodiscard]] bool empty() const { return !(x0 <= x1); }
};

std::string legend(const std::vector<Series>& series, double right, double top) {
  std::string s;
  double y = top + 14.0;
  for (const Series& sr : series) {
    if (sr.label.empty()) {
      continue;
    }
    s += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" "
        "stroke-width=\"2\"{4}/>\n"
        "<text x=\"{5:.1f}\" y=\"{6:.1f}\" font-size=\"11\">{7}</text>\n",
        right - 130, y, right - 110, sr.color, sr.dashed ? " stroke-dasharray=\"5,3\"" : "",
        right - 104, y + 4, escape(sr.label));
    y += 16.0;
  }
  return s;
}

}  // namespace

const std::string& color(std::size_t index) {
  static const std::array<std::string, 8> palette = {
      "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return palette[index % palette.size()];
}

std::string line_plot(const Plot& plot, const std::vector<Series>& series) {
  Bounds b;
  auto to_axis = [&plot](double v, bool log) {
    if (!std::isfinite(v) || (log && v <= 0.0)) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    return log ? std::log10(v) : v;
  };
  for (const Series& s : series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      b.add(to_axis(s.x[i], plot.log_x), to_axis(s.y[i], plot.log_y));
    }
  }
  if (b.empty()) {
    b = Bounds{0.0, 1.0, 0.0, 1.0};
  }
  const double pad_x = 0.04 * (b.x1 - b.x0);
  const double pad_y = 0.06 * (b.y1 - b.y0);
  const Frame frame(plot, b.x0 - pad_x, b.x1 + pad_x, b.y0 - pad_y, b.y1 + pad_y);

  std::string doc = header(plot.width, plot.height) + frame.axes();
  for (const Series& s : series) {
    std::string points;
    std::string marks;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      const double ax = frame.ax(s.x[i]);
      const double ay = frame.ay(s.y[i]);
      if (std::isnan(ax) || std::isnan(ay)) {
        continue;
      }
      points += fmt::format("{:.2f},{:.2f} ", frame.px(ax), frame.py(ay));
      if (s.markers) {
        marks += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n",
                             frame.px(ax), frame.py(ay), s.color);
        if (i < s.annotations.size() && !s.annotations[i].empty()) {
          marks += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"9\">{}</text>\n",
                               frame.px(ax) + 4, frame.py(ay) - 4, escape(s.annotations[i]));
        }
      }
    }
    if (s.line && !points.empty()) {
      doc += fmt::format(
          "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"{}/>\n", points,
          s.color, s.dashed ? " stroke-dasharray=\"5,3\"" : "");
    }
    doc += marks;
  }
  doc += legend(series, plot.width - kMarginRight, kMarginTop);
  doc += "</svg>\n";
  return doc;
}

std::string scatter(const Plot& plot, const PointBatch& points, const std::string& color) {
  Bounds b;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    b.add(points(i, 0), points.cols() > 1 ? points(i, 1) : 0.0);
  }
  if (b.empty()) {
    b = Bounds{0.0, 1.0, 0.0, 1.0};
  }
  const double pad_x = 0.05 * (b.x1 - b.x0);
  const double pad_y = 0.05 * (b.y1 - b.y0);
  Plot linear = plot;
  linear.log_x = linear.log_y = false;
  const Frame frame(linear, b.x0 - pad_x, b.x1 + pad_x, b.y0 - pad_y, b.y1 + pad_y);
  std::string doc = header(plot.width, plot.height) + frame.axes();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0);
    const double y = points.cols() > 1 ? points(i, 1) : 0.0;
    if (!std::isfinite(x) || !std::isfinite(y)) {
      continue;
    }
    doc += fmt::format(
        "<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.5\" fill=\"{}\" fill-opacity=\"0.6\"/>\n",
        frame.px(x), frame.py(y), color);
  }
  doc += "</svg>\n";
  return doc;
}

std::string histogram(const Plot& plot, const std::vector<double>& edges,
                      const std::vector<double>& heights) {
  double top = 0.0;
  for (double h : heights) {
    if (std::isfinite(h)) {
      top = std::max(top, h);
    }
  }
  if (top <= 0.0) {
    top = 1.0;
  }
  Plot linear = plot;
  linear.log_x = linear.log_y = false;
  const double lo = edges.empty() ? 0.0 : edges.front();
  const double hi = edges.empty() ? 1.0 : edges.back();
  const Frame frame(linear, lo, hi, 0.0, 1.08 * top);
  std::string doc = header(plot.width, plot.height) + frame.axes();
  for (std::size_t i = 0; i + 1 < edges.size() && i < heights.size(); ++i) {
    if (!std::isfinite(heights[i]) || heights[i] <= 0.0) {
      continue;
    }
    const double x0 = frame.px(edges[i]);
    const double x1 = frame.px(edges[i + 1]);
    const double y = frame.py(heights[i]);
    doc += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#1f77b4\" "
        "stroke=\"white\"/>\n",
        x0, y, std::max(0.0, x1 - x0), frame.py(0.0) - y);
  }
  doc += "</svg>\n";
  return doc;
}

std::string stability_regions(const Plot& plot, const std::vector<ode::StabilityRaster>& rasters) {
  if (rasters.empty()) {
    return header(plot.width, plot.height) + "</svg>\n";
  }
  Plot linear = plot;
  linear.log_x = linear.log_y = false;
  const ode::StabilityRaster& first = rasters.front();
  const Frame frame(linear, first.re_min, first.re_max, first.im_min, first.im_max);
  std::string doc = header(plot.width, plot.height) + frame.axes();
  std::vector<Series> legend_entries;
  for (std::size_t k = 0; k < rasters.size(); ++k) {
    const ode::StabilityRaster& r = rasters[k];
    const std::string& fill = color(k);
    const double dx = r.re_spacing();
    const double dy = r.im_spacing();
    doc += fmt::format("<g fill=\"{}\" fill-opacity=\"0.25\">\n", fill);
    for (int j = 0; j < r.n_im; ++j) {
      int i = 0;
      while (i < r.n_re) {
        if (!r.is_inside(i, j)) {
          ++i;
          continue;
        }
        const int start = i;
        while (i < r.n_re && r.is_inside(i, j)) {
          ++i;
        }
        const double x0 = frame.px(r.re_at(start) - 0.5 * dx);
        const double x1 = frame.px(r.re_at(i - 1) + 0.5 * dx);
        const double y0 = frame.py(r.im_at(j) + 0.5 * dy);
        const double y1 = frame.py(r.im_at(j) - 0.5 * dy);
        doc += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\"/>\n",
                           x0, y0, x1 - x0, y1 - y0);
      }
    }
    doc += "</g>\n";
    Series entry;
    entry.label = std::string(ode::to_string(r.method));
    entry.color = fill;
    legend_entries.push_back(entry);
  }
  doc += legend(legend_entries, plot.width - kMarginRight, kMarginTop);
  doc += "</svg>\n";
  return doc;
}

std::string side_by_side(const std::string& left, const std::string& right, int width,
                         int height) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\">\n<g>\n{2}</g>\n<g transform=\"translate({3} 0)\">\n{4}</g>\n"
      "</svg>\n",
      2 * width, height, left, width, right);
}

void write(const std::filesystem::path& path, const std::string& document) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot open '{}' for writing", path.string()));
  }
  out << document;
}

}  // namespace fmsolve::svg
