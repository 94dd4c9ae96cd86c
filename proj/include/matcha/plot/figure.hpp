#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "matcha/error.hpp"
#include "matcha/matrix.hpp"
#include "matcha/ops.hpp"
#include "matcha/plot/marching_squares.hpp"

namespace matcha::plot {

inline constexpr std::size_t kDefaultGrid = 100;
inline constexpr int kDefaultWidth = 640;
inline constexpr int kDefaultHeight = 480;
inline constexpr std::size_t kMaxDefaultLevels = 8;

struct ScatterElement {
  std::vector<double> x, y;
  std::optional<std::vector<double>> color;  // color-mapped when present
  std::string fill = "#1f77b4";
  double color_min = 0.0, color_max = 1.0;
};

struct LineElement {
  std::vector<double> x, y;
  std::string stroke = "#1f77b4";
  std::string linestyle = "solid";
  double width = 1.5;
};

struct ContourLevel {
  double value = 0.0;
  std::string stroke;
  std::string linestyle = "solid";
  std::vector<Polyline> lines;
};

struct ContourElement {
  Grid grid;
  bool filled = false;  // pseudocolor fill under the iso-lines
  double value_min = 0.0, value_max = 0.0;
  std::size_t non_finite = 0;
  std::vector<ContourLevel> levels;
};

using Element = std::variant<ScatterElement, LineElement, ContourElement>;

// Options for contour_decision_function. Without levels the field is drawn
// as a filled pseudocolor map with default iso-lines on top.
struct ContourOptions {
  std::vector<double> levels;
  std::vector<std::string> colors;      // cycled over levels
  std::vector<std::string> linestyles;  // cycled over levels
  std::size_t grid = kDefaultGrid;
};

struct Colorbar {
  double min = 0.0, max = 1.0;
  std::string colormap = "viridis";
};

// Single-letter color codes as in the reference plotting API; anything else
// passes through as an SVG color.
inline std::string resolve_color(const std::string& c) {
  if (c.size() == 1) {
    switch (c[0]) {
      case 'r': return "#ff0000";
      case 'g': return "#008000";
      case 'b': return "#0000ff";
      case 'c': return "#00bfbf";
      case 'm': return "#bf00bf";
      case 'y': return "#bfbf00";
      case 'k': return "#000000";
      case 'w': return "#ffffff";
      default: break;
    }
  }
  return c;
}

inline std::string resolve_linestyle(const std::string& s) {
  if (s == "solid" || s == "-") return "solid";
  if (s == "dashed" || s == "--") return "dashed";
  if (s == "dotted" || s == ":") return "dotted";
  if (s == "dashdot" || s == "-.") return "dashdot";
  throw ValueError("unknown line style '" + s + "'");
}

// Round-number tick positions (steps of 1, 2 or 5 times a power of ten)
// inside [lo, hi], at most `max_ticks` of them.
inline std::vector<double> nice_ticks(double lo, double hi, std::size_t max_ticks = 8) {
  std::vector<double> out;
  if (!(hi > lo) || max_ticks == 0) return out;
  const double span = hi - lo;
  double step = std::pow(10.0, std::floor(std::log10(span / static_cast<double>(max_ticks))));
  for (int guard = 0; guard < 64; ++guard) {
    for (double m : {1.0, 2.0, 5.0}) {
      const double s = step * m;
      const double first = std::ceil(lo / s - 1e-9);
      const double last = std::floor(hi / s + 1e-9);
      if (last - first + 1 <= static_cast<double>(max_ticks)) {
        for (double k = first; k <= last; k += 1.0) {
          const double v = k * s;
          out.push_back(std::fabs(v) < s * 1e-9 ? 0.0 : v);
        }
        return out;
      }
    }
    step *= 10.0;
  }
  return out;
}

class Figure {
 public:
  explicit Figure(int width = kDefaultWidth, int height = kDefaultHeight) { set_size(width, height); }

  void set_size(int width, int height) {
    if (width < 100 || height < 100) throw ValueError("figure must be at least 100 x 100 pixels");
    width_ = width;
    height_ = height;
  }

  // x and y are vectors (n x 1 or 1 x n) of equal length. Colors, when given,
  // run through the colormap over their own [min, max].
  void scatter(const Matrix& x, const Matrix& y, const std::optional<Matrix>& color = std::nullopt) {
    ScatterElement s;
    s.x = values_of(x, "scatter x");
    s.y = values_of(y, "scatter y");
    if (s.x.size() != s.y.size()) {
      throw ShapeError("scatter x has " + std::to_string(s.x.size()) + " points, y has " + std::to_string(s.y.size()));
    }
    if (color) {
      auto c = values_of(*color, "scatter color");
      if (c.size() != s.x.size()) throw ShapeError("scatter color must have one value per point");
      s.color_min = *std::min_element(c.begin(), c.end());
      s.color_max = *std::max_element(c.begin(), c.end());
      s.color = std::move(c);
      mapped_ = std::pair{s.color_min, s.color_max};
    }
    elements_.emplace_back(std::move(s));
  }

  void line(const Matrix& x, const Matrix& y, const std::string& color = "#1f77b4",
            const std::string& linestyle = "solid") {
    LineElement l;
    l.x = values_of(x, "line x");
    l.y = values_of(y, "line y");
    if (l.x.size() != l.y.size()) throw ShapeError("line x and y differ in length");
    l.stroke = resolve_color(color);
    l.linestyle = resolve_linestyle(linestyle);
    elements_.emplace_back(std::move(l));
  }

  // Samples f on a grid over the rectangle and draws iso-lines at the
  // requested levels. Non-finite samples are clamped to the finite range and
  // counted.
  void contour_decision_function(double xmin, double xmax, double ymin, double ymax, const ContourOptions& opts,
                                 const std::function<double(double, double)>& f) {
    if (!(xmin < xmax) || !(ymin < ymax)) throw ValueError("contour rectangle needs xmin < xmax and ymin < ymax");
    if (!std::isfinite(xmin) || !std::isfinite(xmax) || !std::isfinite(ymin) || !std::isfinite(ymax)) {
      throw ValueError("contour rectangle must be finite");
    }
    if (opts.grid < 2) throw ValueError("contour grid needs at least 2 samples per side");
    ContourElement c;
    c.grid = Grid{opts.grid, opts.grid, xmin, xmax, ymin, ymax, {}};
    c.grid.values.resize(opts.grid * opts.grid);
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t j = 0; j < opts.grid; ++j) {
      for (std::size_t i = 0; i < opts.grid; ++i) {
        const double v = f(c.grid.x_at(i), c.grid.y_at(j));
        c.grid.values[j * opts.grid + i] = v;
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
    if (!std::isfinite(lo)) lo = hi = 0.0;
    for (auto& v : c.grid.values) {
      if (std::isfinite(v)) continue;
      ++c.non_finite;
      v = v > 0 ? hi : lo;  // NaN compares false and lands on the minimum
    }
    non_finite_ += c.non_finite;
    c.value_min = lo;
    c.value_max = hi;

    std::vector<double> levels = opts.levels;
    if (levels.empty()) {
      c.filled = true;
      mapped_ = std::pair{lo, hi};
      for (double t : nice_ticks(lo, hi, kMaxDefaultLevels))
        if (t > lo && t < hi) levels.push_back(t);
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
      ContourLevel lv;
      lv.value = levels[k];
      if (!opts.colors.empty()) lv.stroke = resolve_color(opts.colors[k % opts.colors.size()]);
      else lv.stroke = c.filled ? "#333333" : "#000000";
      if (!opts.linestyles.empty()) lv.linestyle = resolve_linestyle(opts.linestyles[k % opts.linestyles.size()]);
      lv.lines = marching_squares(c.grid, lv.value);
      c.levels.push_back(std::move(lv));
    }
    elements_.emplace_back(std::move(c));
  }

  void xlabel(std::string text) { xlabel_ = std::move(text); }
  void ylabel(std::string text) { ylabel_ = std::move(text); }
  void title(std::string text) { title_ = std::move(text); }

  // One entry per element, in element order.
  void legend(std::vector<std::string> entries) { legend_ = std::move(entries); }

  // Vertical colorbar for the most recent color-mapped element.
  void colorbar() {
    if (!mapped_) throw ValueError("colorbar needs a color-mapped scatter or filled contour");
    colorbar_ = Colorbar{mapped_->first, mapped_->second, "viridis"};
  }

  void xlim(double lo, double hi) { xlim_ = checked_range(lo, hi); }
  void ylim(double lo, double hi) { ylim_ = checked_range(lo, hi); }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<Element>& elements() const noexcept { return elements_; }
  const std::string& xlabel() const noexcept { return xlabel_; }
  const std::string& ylabel() const noexcept { return ylabel_; }
  const std::string& title() const noexcept { return title_; }
  const std::vector<std::string>& legend_entries() const noexcept { return legend_; }
  const std::optional<Colorbar>& colorbar_spec() const noexcept { return colorbar_; }
  // Total number of non-finite function values clamped in contours.
  std::size_t non_finite_values() const noexcept { return non_finite_; }

  // Plotted x and y ranges: explicit limits, or the union of element bounds
  // padded by 3% per side.
  std::pair<std::pair<double, double>, std::pair<double, double>> ranges() const {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    auto take = [&](double x, double y) {
      if (!std::isfinite(x) || !std::isfinite(y)) return;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    };
    for (const auto& e : elements_) {
      if (const auto* s = std::get_if<ScatterElement>(&e)) {
        for (std::size_t k = 0; k < s->x.size(); ++k) take(s->x[k], s->y[k]);
      } else if (const auto* l = std::get_if<LineElement>(&e)) {
        for (std::size_t k = 0; k < l->x.size(); ++k) take(l->x[k], l->y[k]);
      } else if (const auto* c = std::get_if<ContourElement>(&e)) {
        take(c->grid.xmin, c->grid.ymin);
        take(c->grid.xmax, c->grid.ymax);
      }
    }
    return {xlim_ ? *xlim_ : pad(x0, x1), ylim_ ? *ylim_ : pad(y0, y1)};
  }

 private:
  static std::vector<double> values_of(const Matrix& m, const char* what) {
    if (m.empty()) throw ShapeError(std::string(what) + " is empty");
    if (m.rows() != 1 && m.cols() != 1) throw ShapeError(std::string(what) + " must be a vector, got " + shape_string(m));
    const auto v = m.to_vector();
    return {v.begin(), v.end()};
  }

  static std::pair<double, double> checked_range(double lo, double hi) {
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ValueError("axis limits need finite lo < hi");
    return {lo, hi};
  }

  static std::pair<double, double> pad(double lo, double hi) {
    if (!std::isfinite(lo)) return {0.0, 1.0};
    if (hi - lo <= 0.0) {
      const double w = std::max(0.5, std::fabs(lo) * 0.05);
      return {lo - w, hi + w};
    }
    const double m = 0.03 * (hi - lo);
    return {lo - m, hi + m};
  }

  int width_ = kDefaultWidth, height_ = kDefaultHeight;
  std::vector<Element> elements_;
  std::string xlabel_, ylabel_, title_;
  std::vector<std::string> legend_;
  std::optional<Colorbar> colorbar_;
  std::optional<std::pair<double, double>> mapped_;
  std::optional<std::pair<double, double>> xlim_, ylim_;
  std::size_t non_finite_ = 0;
};

}  // namespace matcha::plot
