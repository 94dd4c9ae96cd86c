#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "matcha/error.hpp"

namespace matcha::plot {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Scalar field sampled at nx x ny points spanning a rectangle; values are
// stored row by row with y increasing.
struct Grid {
  std::size_t nx = 0, ny = 0;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  std::vector<double> values;

  double x_at(std::size_t i) const noexcept { return xmin + (xmax - xmin) * static_cast<double>(i) / static_cast<double>(nx - 1); }
  double y_at(std::size_t j) const noexcept { return ymin + (ymax - ymin) * static_cast<double>(j) / static_cast<double>(ny - 1); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values[j * nx + i]; }
};

// A connected piece of an iso-line. edges[k] names the grid edge that
// points[k] lies on; closed chains do not repeat their first point.
struct Polyline {
  std::vector<Point> points;
  std::vector<std::size_t> edges;
  bool closed = false;
};

// Grid edges are numbered horizontals first (between (i,j) and (i+1,j)),
// then verticals (between (i,j) and (i,j+1)).
struct EdgeIndex {
  std::size_t nx, ny;
  std::size_t horizontal(std::size_t i, std::size_t j) const noexcept { return j * (nx - 1) + i; }
  std::size_t vertical(std::size_t i, std::size_t j) const noexcept { return (nx - 1) * ny + j * nx + i; }
  std::size_t count() const noexcept { return (nx - 1) * ny + nx * (ny - 1); }
  bool is_horizontal(std::size_t e) const noexcept { return e < (nx - 1) * ny; }
};

namespace detail {

enum Side : std::uint8_t { bottom, right, top, left };

// Crossing pairs for each corner configuration (bit 0 bottom-left, 1
// bottom-right, 2 top-right, 3 top-left set when the corner is >= level).
// Saddles 5 and 10 list the pairing used when the cell centre is below the
// level; the other pairing applies when it is above.
struct CaseSegments {
  std::uint8_t n;
  std::array<std::array<Side, 2>, 2> seg;
};

inline constexpr std::array<CaseSegments, 16> kCases = {{
    {0, {}},
    {1, {{{left, bottom}}}},
    {1, {{{bottom, right}}}},
    {1, {{{left, right}}}},
    {1, {{{right, top}}}},
    {2, {{{left, bottom}, {right, top}}}},
    {1, {{{bottom, top}}}},
    {1, {{{left, top}}}},
    {1, {{{top, left}}}},
    {1, {{{bottom, top}}}},
    {2, {{{bottom, right}, {top, left}}}},
    {1, {{{right, top}}}},
    {1, {{{left, right}}}},
    {1, {{{bottom, right}}}},
    {1, {{{left, bottom}}}},
    {0, {}},
}};

}  // namespace detail

// Iso-lines of `grid` at `level`, chained into polylines through shared
// cell edges. Values must be finite.
inline std::vector<Polyline> marching_squares(const Grid& grid, double level) {
  if (grid.nx < 2 || grid.ny < 2 || grid.values.size() != grid.nx * grid.ny) {
    throw ShapeError("contour grid needs at least 2 x 2 samples");
  }
  const EdgeIndex ei{grid.nx, grid.ny};
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<Point> where(ei.count());
  std::vector<bool> placed(ei.count(), false);
  auto crossing = [&](std::size_t e) {
    if (placed[e]) return;
    std::size_t i0, j0, i1, j1;
    if (ei.is_horizontal(e)) {
      j0 = j1 = e / (grid.nx - 1);
      i0 = e % (grid.nx - 1);
      i1 = i0 + 1;
    } else {
      const std::size_t v = e - (grid.nx - 1) * grid.ny;
      j0 = v / grid.nx;
      i0 = i1 = v % grid.nx;
      j1 = j0 + 1;
    }
    const double a = grid(i0, j0), b = grid(i1, j1);
    const double t = (level - a) / (b - a);
    where[e] = {grid.x_at(i0) + t * (grid.x_at(i1) - grid.x_at(i0)), grid.y_at(j0) + t * (grid.y_at(j1) - grid.y_at(j0))};
    placed[e] = true;
  };

  std::vector<std::array<std::size_t, 2>> segs;
  for (std::size_t j = 0; j + 1 < grid.ny; ++j) {
    for (std::size_t i = 0; i + 1 < grid.nx; ++i) {
      const double bl = grid(i, j), br = grid(i + 1, j), tr = grid(i + 1, j + 1), tl = grid(i, j + 1);
      const unsigned c = (bl >= level ? 1u : 0u) | (br >= level ? 2u : 0u) | (tr >= level ? 4u : 0u) |
                         (tl >= level ? 8u : 0u);
      auto cs = detail::kCases[c];
      if (cs.n == 0) continue;
      if (c == 5 || c == 10) {
        if ((bl + br + tr + tl) / 4.0 >= level) cs = detail::kCases[c == 5 ? 10 : 5];
      }
      const std::array<std::size_t, 4> side = {ei.horizontal(i, j), ei.vertical(i + 1, j), ei.horizontal(i, j + 1),
                                               ei.vertical(i, j)};
      for (std::size_t s = 0; s < cs.n; ++s) {
        const std::size_t a = side[cs.seg[s][0]], b = side[cs.seg[s][1]];
        crossing(a);
        crossing(b);
        segs.push_back({a, b});
      }
    }
  }

  // Each crossed edge touches at most two segments (one per adjacent cell).
  std::vector<std::array<std::size_t, 2>> touching(ei.count(), {none, none});
  for (std::size_t s = 0; s < segs.size(); ++s)
    for (std::size_t e : segs[s]) (touching[e][0] == none ? touching[e][0] : touching[e][1]) = s;

  std::vector<bool> used(segs.size(), false);
  auto next_segment = [&](std::size_t e, std::size_t from) {
    for (std::size_t s : touching[e])
      if (s != none && s != from && !used[s]) return s;
    return none;
  };
  std::vector<Polyline> out;
  for (std::size_t s0 = 0; s0 < segs.size(); ++s0) {
    if (used[s0]) continue;
    used[s0] = true;
    std::vector<std::size_t> forward = {segs[s0][0], segs[s0][1]};
    for (std::size_t cur = s0, e = segs[s0][1];;) {
      const std::size_t s = next_segment(e, cur);
      if (s == none) break;
      used[s] = true;
      e = segs[s][0] == e ? segs[s][1] : segs[s][0];
      forward.push_back(e);
      cur = s;
    }
    std::vector<std::size_t> backward;
    if (forward.back() != forward.front()) {
      for (std::size_t cur = s0, e = segs[s0][0];;) {
        const std::size_t s = next_segment(e, cur);
        if (s == none) break;
        used[s] = true;
        e = segs[s][0] == e ? segs[s][1] : segs[s][0];
        backward.push_back(e);
        cur = s;
      }
    }
    Polyline pl;
    pl.edges.assign(backward.rbegin(), backward.rend());
    pl.edges.insert(pl.edges.end(), forward.begin(), forward.end());
    if (pl.edges.size() > 2 && pl.edges.front() == pl.edges.back()) {
      pl.edges.pop_back();
      pl.closed = true;
    }
    for (std::size_t e : pl.edges) pl.points.push_back(where[e]);
    out.push_back(std::move(pl));
  }
  return out;
}

}  // namespace matcha::plot
