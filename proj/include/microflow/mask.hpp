#pragma once

#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "microflow/core.hpp"

namespace microflow {

enum class Cell : uint8_t { SOLID = 0, FLUID = 1 };

enum class Edge { LEFT, RIGHT, TOP, BOTTOM };

inline Edge edge_from_string(const std::string& s) {
  if (s == "left") return Edge::LEFT;
  if (s == "right") return Edge::RIGHT;
  if (s == "top") return Edge::TOP;
  if (s == "bottom") return Edge::BOTTOM;
  throw Error(ErrorCode::BAD_ANNOTATION, "unknown edge '" + s + "'");
}

/// A contiguous run of border pixels on one raster edge, inclusive range
/// along the edge coordinate (x for top/bottom, y for left/right).
struct BorderSegment {
  Edge edge = Edge::LEFT;
  int from = 0;
  int to = 0;
};

/// Binary fluid/solid raster with inlet/outlet annotations.
/// Pixel (ix, iy) covers [ix*h, (ix+1)*h] x [iy*h, (iy+1)*h] in meters,
/// with iy the image row (y grows with the row index).
struct ChannelMask {
  int width = 0;
  int height = 0;
  Grid<Cell> cells;
  BorderSegment inlet;
  std::vector<BorderSegment> outlets;
  std::vector<int> inlet_pixels;   // linear indices iy*width+ix
  std::vector<int> outlet_pixels;
  double v_inlet = 0.0;     // mean inlet speed, m/s
  double pixel_size = 1.0;  // meters per pixel

  bool fluid(int ix, int iy) const {
    return cells.contains(ix, iy) && cells(ix, iy) == Cell::FLUID;
  }
  int index(int ix, int iy) const { return iy * width + ix; }
};

namespace detail {

inline std::vector<int> segment_pixels(const ChannelMask& m, const BorderSegment& s) {
  std::vector<int> out;
  const int lo = std::min(s.from, s.to);
  const int hi = std::max(s.from, s.to);
  for (int c = lo; c <= hi; ++c) {
    int ix, iy;
    switch (s.edge) {
      case Edge::LEFT: ix = 0; iy = c; break;
      case Edge::RIGHT: ix = m.width - 1; iy = c; break;
      case Edge::TOP: ix = c; iy = 0; break;
      case Edge::BOTTOM: ix = c; iy = m.height - 1; break;
      default: ix = iy = 0;
    }
    if (!m.cells.contains(ix, iy))
      throw Error(ErrorCode::BAD_ANNOTATION, "border segment out of raster bounds");
    out.push_back(m.index(ix, iy));
  }
  return out;
}

// Skips PGM whitespace and '#' comments, then reads one unsigned integer.
inline int read_pnm_int(std::istream& in) {
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    }
    c = in.get();
  }
  if (c == EOF || !std::isdigit(c)) throw Error(ErrorCode::BAD_FORMAT, "malformed PGM header");
  int value = 0;
  while (c != EOF && std::isdigit(c)) {
    value = value * 10 + (c - '0');
    c = in.get();
  }
  return value;
}

}  // namespace detail

/// BFS over the FLUID region (4-connected) from a seed set.
inline Grid<uint8_t> flood_fill(const ChannelMask& m, const std::vector<int>& seeds) {
  Grid<uint8_t> visited(m.width, m.height, 0);
  std::queue<int> q;
  for (int idx : seeds) {
    const int ix = idx % m.width, iy = idx / m.width;
    if (m.fluid(ix, iy) && !visited(ix, iy)) {
      visited(ix, iy) = 1;
      q.push(idx);
    }
  }
  static constexpr std::array<std::array<int, 2>, 4> kSteps{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
  while (!q.empty()) {
    const int idx = q.front();
    q.pop();
    const int ix = idx % m.width, iy = idx / m.width;
    for (const auto& d : kSteps) {
      const int nx = ix + d[0], ny = iy + d[1];
      if (m.fluid(nx, ny) && !visited(nx, ny)) {
        visited(nx, ny) = 1;
        q.push(m.index(nx, ny));
      }
    }
  }
  return visited;
}

/// Validates annotations and inlet->outlet connectivity; throws on violation.
inline void validate_mask(const ChannelMask& m) {
  if (m.width < 8 || m.height < 8)
    throw Error(ErrorCode::BAD_FORMAT, "mask smaller than 8x8");
  if (m.pixel_size <= 0) throw Error(ErrorCode::BAD_FORMAT, "pixel_size must be positive");
  if (m.inlet_pixels.empty() || m.outlet_pixels.empty())
    throw Error(ErrorCode::BAD_ANNOTATION, "empty inlet or outlet segment");
  for (int idx : m.inlet_pixels)
    if (m.cells.data()[idx] != Cell::FLUID)
      throw Error(ErrorCode::BAD_ANNOTATION, "inlet pixel is SOLID");
  for (int idx : m.outlet_pixels)
    if (m.cells.data()[idx] != Cell::FLUID)
      throw Error(ErrorCode::BAD_ANNOTATION, "outlet pixel is SOLID");
  const Grid<uint8_t> reach = flood_fill(m, m.inlet_pixels);
  for (int idx : m.outlet_pixels)
    if (!reach.data()[idx])
      throw Error(ErrorCode::NOT_CONNECTED, "outlet not reachable from inlet through FLUID");
}

/// Parses a binary PGM (P5, 8-bit) where 0 = SOLID and 255 = FLUID.
inline ChannelMask load_mask_pgm(std::istream& in, double pixel_size,
                                 const BorderSegment& inlet, double v_inlet,
                                 const std::vector<BorderSegment>& outlets) {
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (in.gcount() != 2 || magic != "P5")
    throw Error(ErrorCode::BAD_FORMAT, "not a binary PGM (P5)");
  const int width = detail::read_pnm_int(in);
  const int height = detail::read_pnm_int(in);
  const int maxval = detail::read_pnm_int(in);
  if (maxval != 255) throw Error(ErrorCode::BAD_FORMAT, "PGM maxval must be 255");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::BAD_FORMAT, "bad PGM dimensions");

  ChannelMask m;
  m.width = width;
  m.height = height;
  m.pixel_size = pixel_size;
  m.cells = Grid<Cell>(width, height, Cell::SOLID);
  std::vector<uint8_t> raw(static_cast<size_t>(width) * height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<size_t>(in.gcount()) != raw.size())
    throw Error(ErrorCode::BAD_FORMAT, "truncated PGM pixel data");
  for (size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != 0 && raw[i] != 255)
      throw Error(ErrorCode::BAD_FORMAT, "PGM pixels must be 0 or 255");
    m.cells.data()[i] = raw[i] ? Cell::FLUID : Cell::SOLID;
  }
  m.inlet = inlet;
  m.outlets = outlets;
  m.v_inlet = v_inlet;
  m.inlet_pixels = detail::segment_pixels(m, inlet);
  for (const auto& seg : outlets)
    for (int idx : detail::segment_pixels(m, seg)) m.outlet_pixels.push_back(idx);
  validate_mask(m);
  return m;
}

inline ChannelMask load_mask_pgm_file(const std::string& path, double pixel_size,
                                      const BorderSegment& inlet, double v_inlet,
                                      const std::vector<BorderSegment>& outlets) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::BAD_FORMAT, "cannot open mask file " + path);
  return load_mask_pgm(in, pixel_size, inlet, v_inlet, outlets);
}

inline void save_mask_pgm(const ChannelMask& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  out << "P5\n" << m.width << " " << m.height << "\n255\n";
  for (Cell c : m.cells.data()) out.put(c == Cell::FLUID ? char(255) : char(0));
}

/// Builds a mask directly from an in-memory cell grid (test/fixture path).
inline ChannelMask make_mask(Grid<Cell> cells, double pixel_size, const BorderSegment& inlet,
                             double v_inlet, const std::vector<BorderSegment>& outlets) {
  ChannelMask m;
  m.width = cells.width();
  m.height = cells.height();
  m.cells = std::move(cells);
  m.pixel_size = pixel_size;
  m.inlet = inlet;
  m.outlets = outlets;
  m.v_inlet = v_inlet;
  m.inlet_pixels = detail::segment_pixels(m, inlet);
  for (const auto& seg : outlets)
    for (int idx : detail::segment_pixels(m, seg)) m.outlet_pixels.push_back(idx);
  validate_mask(m);
  return m;
}

}  // namespace microflow
