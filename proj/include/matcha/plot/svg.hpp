#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <variant>

#include "matcha/error.hpp"
#include "matcha/plot/colormap.hpp"
#include "matcha/plot/figure.hpp"

namespace matcha::plot {

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", std::fabs(v) < 1e-12 ? 0.0 : v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string dash(const std::string& style) {
  if (style == "dashed") return " stroke-dasharray=\"6,4\"";
  if (style == "dotted") return " stroke-dasharray=\"1.5,3\"";
  if (style == "dashdot") return " stroke-dasharray=\"6,3,1.5,3\"";
  return "";
}

// Data to pixel mapping for the plot area; y grows upwards in data space.
struct Frame {
  double left, top, width, height;
  double x0, x1, y0, y1;
  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

inline void render_contour(std::string& out, const ContourElement& c, const Frame& f) {
  const Grid& g = c.grid;
  if (c.filled) {
    out += "<g class=\"pcolor\" clip-path=\"url(#plot-area)\" shape-rendering=\"crispEdges\">\n";
    for (std::size_t j = 0; j + 1 < g.ny; ++j) {
      const double ya = f.py(g.y_at(j + 1)), yb = f.py(g.y_at(j));
      std::size_t run = 0;
      std::string run_color;
      auto flush = [&](std::size_t end) {
        const double xa = f.px(g.x_at(run)), xb = f.px(g.x_at(end));
        out += "<rect x=\"" + num(xa) + "\" y=\"" + num(ya) + "\" width=\"" + num(xb - xa) + "\" height=\"" +
               num(yb - ya) + "\" fill=\"" + run_color + "\"/>\n";
      };
      for (std::size_t i = 0; i + 1 < g.nx; ++i) {
        const double avg = (g(i, j) + g(i + 1, j) + g(i + 1, j + 1) + g(i, j + 1)) / 4.0;
        const std::string color = hex(viridis(normalize(avg, c.value_min, c.value_max)));
        if (i == 0) {
          run_color = color;
        } else if (color != run_color) {
          flush(i);
          run = i;
          run_color = color;
        }
      }
      flush(g.nx - 1);
    }
    out += "</g>\n";
  }
  for (const auto& lv : c.levels) {
    out += "<g class=\"contour\" data-level=\"" + label(lv.value) + "\" fill=\"none\" stroke=\"" + escape(lv.stroke) +
           "\" stroke-width=\"1.5\"" + dash(lv.linestyle) + " clip-path=\"url(#plot-area)\"";
    if (c.non_finite) out += " data-non-finite=\"" + std::to_string(c.non_finite) + "\"";
    out += ">\n";
    for (const auto& pl : lv.lines) {
      out += "<path d=\"";
      for (std::size_t k = 0; k < pl.points.size(); ++k) {
        out += (k == 0 ? "M" : " L") + num(f.px(pl.points[k].x)) + " " + num(f.py(pl.points[k].y));
      }
      if (pl.closed) out += " Z";
      out += "\"/>\n";
    }
    out += "</g>\n";
  }
}

inline std::string marker_fill(const ScatterElement& s, std::size_t k) {
  if (!s.color) return s.fill;
  return hex(viridis(normalize((*s.color)[k], s.color_min, s.color_max)));
}

inline void render_legend(std::string& out, const Figure& fig, const Frame& f) {
  const auto& entries = fig.legend_entries();
  if (entries.empty()) return;
  std::size_t longest = 0;
  for (const auto& e : entries) longest = std::max(longest, e.size());
  const double row = 18.0, w = 40.0 + 6.5 * static_cast<double>(longest), h = 8.0 + row * static_cast<double>(entries.size());
  const double x = f.left + f.width - w - 8.0, y = f.top + 8.0;
  out += "<g class=\"legend\">\n<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" +
         num(h) + "\" fill=\"#ffffff\" fill-opacity=\"0.85\" stroke=\"#999999\"/>\n";
  const auto& elems = fig.elements();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const double cy = y + 4.0 + row * (static_cast<double>(k) + 0.5);
    out += "<g class=\"legend-entry\">";
    if (k < elems.size()) {
      const auto& e = elems[k];
      if (const auto* s = std::get_if<ScatterElement>(&e)) {
        out += "<circle cx=\"" + num(x + 16.0) + "\" cy=\"" + num(cy) + "\" r=\"3.5\" fill=\"" + marker_fill(*s, 0) + "\"/>";
      } else {
        std::string stroke = "#000000", style = "solid";
        if (const auto* l = std::get_if<LineElement>(&e)) {
          stroke = l->stroke;
          style = l->linestyle;
        } else if (const auto* c = std::get_if<ContourElement>(&e); c && !c->levels.empty() && !c->filled) {
          stroke = c->levels.front().stroke;
          style = c->levels.front().linestyle;
        } else {
          stroke = hex(viridis(0.5));
        }
        out += "<line x1=\"" + num(x + 6.0) + "\" y1=\"" + num(cy) + "\" x2=\"" + num(x + 26.0) + "\" y2=\"" + num(cy) +
               "\" stroke=\"" + escape(stroke) + "\" stroke-width=\"2\"" + dash(style) + "/>";
      }
    }
    out += "<text x=\"" + num(x + 32.0) + "\" y=\"" + num(cy + 4.0) + "\" font-size=\"11\">" + escape(entries[k]) +
           "</text></g>\n";
  }
  out += "</g>\n";
}

inline void render_colorbar(std::string& out, const Colorbar& cb, const Frame& f) {
  constexpr int slices = 64;
  const double x = f.left + f.width + 20.0, w = 16.0, top = f.top, h = f.height;
  out += "<g class=\"colorbar\" data-min=\"" + label(cb.min) + "\" data-max=\"" + label(cb.max) +
         "\" shape-rendering=\"crispEdges\">\n";
  for (int s = 0; s < slices; ++s) {
    const double y0 = top + h - h * (s + 1) / slices, y1 = top + h - h * s / slices;
    out += "<rect x=\"" + num(x) + "\" y=\"" + num(y0) + "\" width=\"" + num(w) + "\" height=\"" + num(y1 - y0) +
           "\" fill=\"" + hex(viridis((s + 0.5) / slices)) + "\"/>\n";
  }
  out += "<rect x=\"" + num(x) + "\" y=\"" + num(top) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (double t : nice_ticks(cb.min, cb.max, 6)) {
    const double y = top + h - normalize(t, cb.min, cb.max) * h;
    out += "<line x1=\"" + num(x + w) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x + w + 4.0) + "\" y2=\"" + num(y) +
           "\" stroke=\"#000000\"/><text x=\"" + num(x + w + 6.0) + "\" y=\"" + num(y + 4.0) +
           "\" font-size=\"10\">" + label(t) + "</text>\n";
  }
  out += "</g>\n";
}

}  // namespace detail

// Standalone SVG 1.1 document for the figure. Pure: the figure is not
// modified and identical figures give identical bytes.
inline std::string render(const Figure& fig) {
  if (fig.elements().empty()) throw EmptyFigureError("figure has nothing to draw");
  const auto [xr, yr] = fig.ranges();
  const double W = fig.width(), H = fig.height();
  const double left = 64.0, bottom = 48.0, top = fig.title().empty() ? 16.0 : 36.0;
  const double right = fig.colorbar_spec() ? 88.0 : 16.0;
  const detail::Frame f{left, top, W - left - right, H - top - bottom, xr.first, xr.second, yr.first, yr.second};
  using detail::num;

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(fig.width()) +
         "\" height=\"" + std::to_string(fig.height()) + "\" viewBox=\"0 0 " + std::to_string(fig.width()) + " " +
         std::to_string(fig.height()) + "\" font-family=\"sans-serif\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out += "<defs><clipPath id=\"plot-area\"><rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" +
         num(f.width) + "\" height=\"" + num(f.height) + "\"/></clipPath></defs>\n";

  for (const auto& e : fig.elements()) {
    if (const auto* c = std::get_if<ContourElement>(&e)) {
      detail::render_contour(out, *c, f);
    } else if (const auto* s = std::get_if<ScatterElement>(&e)) {
      out += "<g class=\"scatter\" clip-path=\"url(#plot-area)\">\n";
      for (std::size_t k = 0; k < s->x.size(); ++k) {
        if (!std::isfinite(s->x[k]) || !std::isfinite(s->y[k])) continue;
        out += "<circle class=\"marker\" cx=\"" + num(f.px(s->x[k])) + "\" cy=\"" + num(f.py(s->y[k])) +
               "\" r=\"3.5\" fill=\"" + detail::marker_fill(*s, k) + "\" stroke=\"#000000\" stroke-width=\"0.5\"/>\n";
      }
      out += "</g>\n";
    } else if (const auto* l = std::get_if<LineElement>(&e)) {
      out += "<polyline class=\"line\" fill=\"none\" stroke=\"" + detail::escape(l->stroke) + "\" stroke-width=\"" +
             num(l->width) + "\"" + detail::dash(l->linestyle) + " clip-path=\"url(#plot-area)\" points=\"";
      for (std::size_t k = 0; k < l->x.size(); ++k) {
        out += (k ? " " : "") + num(f.px(l->x[k])) + "," + num(f.py(l->y[k]));
      }
      out += "\"/>\n";
    }
  }

  out += "<g class=\"axes\" font-size=\"10\">\n";
  out += "<rect x=\"" + num(f.left) + "\" y=\"" + num(f.top) + "\" width=\"" + num(f.width) + "\" height=\"" +
         num(f.height) + "\" fill=\"none\" stroke=\"#000000\"/>\n";
  for (double t : nice_ticks(f.x0, f.x1)) {
    const double x = f.px(t), y = f.top + f.height;
    out += "<line x1=\"" + num(x) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x) + "\" y2=\"" + num(y + 5.0) +
           "\" stroke=\"#000000\"/><text x=\"" + num(x) + "\" y=\"" + num(y + 17.0) + "\" text-anchor=\"middle\">" +
           detail::label(t) + "</text>\n";
  }
  for (double t : nice_ticks(f.y0, f.y1)) {
    const double y = f.py(t);
    out += "<line x1=\"" + num(f.left - 5.0) + "\" y1=\"" + num(y) + "\" x2=\"" + num(f.left) + "\" y2=\"" + num(y) +
           "\" stroke=\"#000000\"/><text x=\"" + num(f.left - 8.0) + "\" y=\"" + num(y + 3.5) +
           "\" text-anchor=\"end\">" + detail::label(t) + "</text>\n";
  }
  out += "</g>\n";
  if (!fig.xlabel().empty()) {
    out += "<text class=\"xlabel\" x=\"" + num(f.left + f.width / 2.0) + "\" y=\"" + num(H - 10.0) +
           "\" text-anchor=\"middle\" font-size=\"12\">" + detail::escape(fig.xlabel()) + "</text>\n";
  }
  if (!fig.ylabel().empty()) {
    const double cy = f.top + f.height / 2.0;
    out += "<text class=\"ylabel\" x=\"16\" y=\"" + num(cy) + "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " +
           num(cy) + ")\">" + detail::escape(fig.ylabel()) + "</text>\n";
  }
  if (!fig.title().empty()) {
    out += "<text class=\"title\" x=\"" + num(f.left + f.width / 2.0) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" +
           detail::escape(fig.title()) + "</text>\n";
  }
  detail::render_legend(out, fig, f);
  if (fig.colorbar_spec()) detail::render_colorbar(out, *fig.colorbar_spec(), f);
  out += "</svg>\n";
  return out;
}

// Writes render(fig) to `path`.
inline void show(const Figure& fig, const std::string& path) {
  const std::string doc = render(fig);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os.write(doc.data(), static_cast<std::streamsize>(doc.size()));
  os.close();
  if (!os) throw IoError("failed writing '" + path + "'");
}

}  // namespace matcha::plot
