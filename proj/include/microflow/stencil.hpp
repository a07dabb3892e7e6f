#pragma once

#include "microflow/core.hpp"

namespace microflow {

enum class Axis { X, Y };

/// First-derivative convolution, kernel (1/2)[-1 0 1], in pixel units.
/// Border pixels fall back to one-sided differences.
inline GridD stencil_d1(const GridD& f, Axis axis) {
  const int W = f.width(), H = f.height();
  if ((axis == Axis::X && W < 3) || (axis == Axis::Y && H < 3))
    throw Error(ErrorCode::DIMENSION_MISMATCH, "map too small for stencil_d1");
  GridD out(W, H, 0.0);
  for (int j = 0; j < H; ++j) {
    for (int i = 0; i < W; ++i) {
      if (axis == Axis::X) {
        if (i == 0)
          out(i, j) = f(1, j) - f(0, j);
        else if (i == W - 1)
          out(i, j) = f(W - 1, j) - f(W - 2, j);
        else
          out(i, j) = 0.5 * (f(i + 1, j) - f(i - 1, j));
      } else {
        if (j == 0)
          out(i, j) = f(i, 1) - f(i, 0);
        else if (j == H - 1)
          out(i, j) = f(i, H - 1) - f(i, H - 2);
        else
          out(i, j) = 0.5 * (f(i, j + 1) - f(i, j - 1));
      }
    }
  }
  return out;
}

/// Second-derivative convolution, kernel (1/4)[[0,-1,0],[-1,4,-1],[0,-1,0]],
/// applied verbatim (equals -1/4 of the five-point Laplacian). Out-of-range
/// neighbors are edge-replicated; only interior pixels are consumed by the
/// residual assembly.
inline GridD stencil_d2(const GridD& f) {
  const int W = f.width(), H = f.height();
  if (W < 3 || H < 3) throw Error(ErrorCode::DIMENSION_MISMATCH, "map too small for stencil_d2");
  GridD out(W, H, 0.0);
  auto at = [&](int i, int j) { return f(std::clamp(i, 0, W - 1), std::clamp(j, 0, H - 1)); };
  for (int j = 0; j < H; ++j)
    for (int i = 0; i < W; ++i)
      out(i, j) =
          0.25 * (4.0 * f(i, j) - at(i - 1, j) - at(i + 1, j) - at(i, j - 1) - at(i, j + 1));
  return out;
}

}  // namespace microflow
