#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "microflow/core.hpp"
#include "microflow/mask.hpp"
#include "microflow/simloop.hpp"

namespace microflow {

/// Path overlay on the channel mask: SOLID pixels dark, paths as polylines.
inline void svg_path_overlay(const ChannelMask& mask,
                             const std::vector<std::pair<std::vector<Vec2>, std::string>>& paths,
                             const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + out_path + " for writing");
  const double h = mask.pixel_size;
  const int scale = 4;  // screen pixels per mask pixel
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << mask.width * scale
      << "' height='" << mask.height * scale << "' viewBox='0 0 " << mask.width << ' '
      << mask.height << "'>\n";
  out << "<rect width='" << mask.width << "' height='" << mask.height
      << "' fill='#eef6fb'/>\n";
  for (int j = 0; j < mask.height; ++j) {
    int run = -1;
    for (int i = 0; i <= mask.width; ++i) {
      const bool solid = i < mask.width && !mask.fluid(i, j);
      if (solid && run < 0) run = i;
      if (!solid && run >= 0) {
        out << "<rect x='" << run << "' y='" << j << "' width='" << i - run
            << "' height='1' fill='#37474f'/>\n";
        run = -1;
      }
    }
  }
  for (const auto& [path, color] : paths) {
    if (path.empty()) continue;
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='0.5' points='";
    for (const auto& p : path) out << p.x() / h << ',' << p.y() / h << ' ';
    out << "'/>\n";
  }
  out << "</svg>\n";
}

/// Reference vs actual trajectory plus error curve, in one figure.
inline void svg_tracking_plot(const SimTrace& trace, const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + out_path + " for writing");
  if (trace.size() == 0) throw Error(ErrorCode::INVALID_ARGUMENT, "empty trace");
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300, max_e = 0;
  for (size_t k = 0; k < trace.size(); ++k) {
    for (const Vec2& p : {trace.x[k], trace.x_d[k]}) {
      min_x = std::min(min_x, p.x());
      max_x = std::max(max_x, p.x());
      min_y = std::min(min_y, p.y());
      max_y = std::max(max_y, p.y());
    }
    max_e = std::max(max_e, trace.e[k].norm());
  }
  const double span_x = std::max(max_x - min_x, 1e-12);
  const double span_y = std::max(max_y - min_y, 1e-12);
  const double T = trace.t.back() > 0 ? trace.t.back() : 1.0;
  const int W = 900, Hp = 400;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << Hp
      << "'>\n<rect width='" << W << "' height='" << Hp << "' fill='white'/>\n";
  auto tx = [&](double x) { return 20 + 360 * (x - min_x) / span_x; };
  auto ty = [&](double y) { return 380 - 360 * (y - min_y) / span_y; };
  auto poly = [&](auto getter, const char* color) {
    out << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (size_t k = 0; k < trace.size(); ++k) {
      const Vec2 p = getter(k);
      out << tx(p.x()) << ',' << ty(p.y()) << ' ';
    }
    out << "'/>\n";
  };
  poly([&](size_t k) { return trace.x_d[k]; }, "#9e9e9e");
  poly([&](size_t k) { return trace.x[k]; }, "#d32f2f");
  out << "<text x='30' y='20' font-size='12'>trajectory (gray: reference, red: actual)"
      << "</text>\n";
  out << "<polyline fill='none' stroke='#1565c0' stroke-width='1.5' points='";
  for (size_t k = 0; k < trace.size(); ++k)
    out << 460 + 420 * trace.t[k] / T << ','
        << 380 - 360 * trace.e[k].norm() / std::max(max_e, 1e-300) << ' ';
  out << "'/>\n<text x='470' y='20' font-size='12'>tracking error over time (max "
      << max_e << " m)</text>\n</svg>\n";
}

}  // namespace microflow
