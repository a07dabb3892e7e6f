#pragma once

#include <cstring>
#include <fstream>
#include <memory>
#include <optional>
#include <string>

#include "microflow/core.hpp"
#include "microflow/mask.hpp"

namespace microflow {

struct FluidProps {
  double rho = 1000.0;  // kg/m^3
  double nu = 1e-6;     // viscosity coefficient of the momentum equations

  void validate() const {
    if (rho <= 0 || nu <= 0)
      throw Error(ErrorCode::INVALID_ARGUMENT, "fluid properties must be positive");
  }
};

/// Collocated per-pixel velocity and pressure maps over a ChannelMask.
struct FlowField {
  GridD vx, vy, p;
  double pixel_size = 1.0;
  std::shared_ptr<const ChannelMask> mask;  // may be null for raw imports

  int width() const { return vx.width(); }
  int height() const { return vx.height(); }

  static FlowField zeros(const std::shared_ptr<const ChannelMask>& mask) {
    FlowField f;
    f.vx = GridD(mask->width, mask->height, 0.0);
    f.vy = GridD(mask->width, mask->height, 0.0);
    f.p = GridD(mask->width, mask->height, 0.0);
    f.pixel_size = mask->pixel_size;
    f.mask = mask;
    return f;
  }

  void check_conforms(const ChannelMask& m) const {
    if (width() != m.width || height() != m.height || !vx.same_shape(vy) || !vx.same_shape(p))
      throw Error(ErrorCode::DIMENSION_MISMATCH, "field does not conform to mask");
  }
};

/// Bilinear velocity sample at a continuous position (meters). Pixel centers
/// sit at ((i+0.5)h, (j+0.5)h); SOLID pixels hold zero velocity by invariant,
/// so they contribute zero to the interpolation.
inline Vec2 sample_velocity(const FlowField& f, const Vec2& pos) {
  const double h = f.pixel_size;
  const int W = f.width(), H = f.height();
  if (pos.x() < 0 || pos.y() < 0 || pos.x() > W * h || pos.y() > H * h)
    throw Error(ErrorCode::OUT_OF_BOUNDS, "sample position outside field extent");
  // Continuous index of the surrounding 2x2 pixel-center cell.
  double gx = pos.x() / h - 0.5;
  double gy = pos.y() / h - 0.5;
  int i0 = static_cast<int>(std::floor(gx));
  int j0 = static_cast<int>(std::floor(gy));
  i0 = std::clamp(i0, 0, W - 2);
  j0 = std::clamp(j0, 0, H - 2);
  const double tx = std::clamp(gx - i0, 0.0, 1.0);
  const double ty = std::clamp(gy - j0, 0.0, 1.0);
  auto lerp2 = [&](const GridD& g) {
    const double a = g(i0, j0) * (1 - tx) + g(i0 + 1, j0) * tx;
    const double b = g(i0, j0 + 1) * (1 - tx) + g(i0 + 1, j0 + 1) * tx;
    return a * (1 - ty) + b * ty;
  };
  return {lerp2(f.vx), lerp2(f.vy)};
}

/// Nearest pixel to a continuous position; throws OUT_OF_BOUNDS outside raster.
inline std::pair<int, int> nearest_pixel(const ChannelMask& m, const Vec2& pos) {
  const double h = m.pixel_size;
  const int ix = static_cast<int>(std::floor(pos.x() / h));
  const int iy = static_cast<int>(std::floor(pos.y() / h));
  if (!m.cells.contains(ix, iy))
    throw Error(ErrorCode::OUT_OF_BOUNDS, "position outside raster");
  return {ix, iy};
}

// ---- MFN1 on-disk format ----
// "MFN1", u32 width, u32 height (little-endian), then row-major f64 planes
// vx, vy, p, then f64 pixel_size_m.

namespace detail {

template <typename T>
void write_le(std::ostream& out, T value) {
  // Host is little-endian on all supported targets.
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != sizeof(T)) throw Error(ErrorCode::BAD_FORMAT, "truncated field file");
  return value;
}

inline void write_plane(std::ostream& out, const GridD& g) {
  out.write(reinterpret_cast<const char*>(g.data().data()),
            static_cast<std::streamsize>(g.size() * sizeof(double)));
}

inline void read_plane(std::istream& in, GridD& g) {
  in.read(reinterpret_cast<char*>(g.data().data()),
          static_cast<std::streamsize>(g.size() * sizeof(double)));
  if (static_cast<size_t>(in.gcount()) != g.size() * sizeof(double))
    throw Error(ErrorCode::BAD_FORMAT, "truncated field plane");
}

}  // namespace detail

inline void export_field(const FlowField& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out.write("MFN1", 4);
  detail::write_le<uint32_t>(out, static_cast<uint32_t>(f.width()));
  detail::write_le<uint32_t>(out, static_cast<uint32_t>(f.height()));
  detail::write_plane(out, f.vx);
  detail::write_plane(out, f.vy);
  detail::write_plane(out, f.p);
  detail::write_le<double>(out, f.pixel_size);
}

inline FlowField import_field(const std::string& path,
                              std::shared_ptr<const ChannelMask> mask = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::BAD_FORMAT, "cannot open field file " + path);
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "MFN1", 4) != 0)
    throw Error(ErrorCode::BAD_FORMAT, "bad field file magic");
  const auto w = detail::read_le<uint32_t>(in);
  const auto h = detail::read_le<uint32_t>(in);
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    throw Error(ErrorCode::BAD_FORMAT, "implausible field dimensions");
  FlowField f;
  f.vx = GridD(static_cast<int>(w), static_cast<int>(h));
  f.vy = GridD(static_cast<int>(w), static_cast<int>(h));
  f.p = GridD(static_cast<int>(w), static_cast<int>(h));
  detail::read_plane(in, f.vx);
  detail::read_plane(in, f.vy);
  detail::read_plane(in, f.p);
  f.pixel_size = detail::read_le<double>(in);
  if (mask) {
    if (static_cast<int>(w) != mask->width || static_cast<int>(h) != mask->height)
      throw Error(ErrorCode::DIMENSION_MISMATCH, "field dimensions disagree with mask");
    f.mask = std::move(mask);
  }
  return f;
}

}  // namespace microflow
