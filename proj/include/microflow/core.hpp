#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace microflow {

using Vec2 = Eigen::Vector2d;

enum class ErrorCode {
  NOT_CONNECTED,
  BAD_FORMAT,
  BAD_ANNOTATION,
  OUT_OF_BOUNDS,
  TOO_FEW_SAMPLES,
  DIMENSION_MISMATCH,
  DIVERGED,
  OBS_OUTSIDE_FLUID,
  ZERO_LENGTH_EDGE,
  EMPTY_GRAPH,
  NO_PATH,
  START_GOAL_UNMAPPED,
  UNREACHABLE,
  NOT_ARRIVED,
  NON_FINITE,
  INVALID_ARGUMENT,
};

inline const char* to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::NOT_CONNECTED: return "NOT_CONNECTED";
    case ErrorCode::BAD_FORMAT: return "BAD_FORMAT";
    case ErrorCode::BAD_ANNOTATION: return "BAD_ANNOTATION";
    case ErrorCode::OUT_OF_BOUNDS: return "OUT_OF_BOUNDS";
    case ErrorCode::TOO_FEW_SAMPLES: return "TOO_FEW_SAMPLES";
    case ErrorCode::DIMENSION_MISMATCH: return "DIMENSION_MISMATCH";
    case ErrorCode::DIVERGED: return "DIVERGED";
    case ErrorCode::OBS_OUTSIDE_FLUID: return "OBS_OUTSIDE_FLUID";
    case ErrorCode::ZERO_LENGTH_EDGE: return "ZERO_LENGTH_EDGE";
    case ErrorCode::EMPTY_GRAPH: return "EMPTY_GRAPH";
    case ErrorCode::NO_PATH: return "NO_PATH";
    case ErrorCode::START_GOAL_UNMAPPED: return "START_GOAL_UNMAPPED";
    case ErrorCode::UNREACHABLE: return "UNREACHABLE";
    case ErrorCode::NOT_ARRIVED: return "NOT_ARRIVED";
    case ErrorCode::NON_FINITE: return "NON_FINITE";
    case ErrorCode::INVALID_ARGUMENT: return "INVALID_ARGUMENT";
  }
  return "UNKNOWN";
}

/// Library error type; carries a machine-readable code plus context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Dense row-major 2-D array addressed as (ix, iy) with ix the column
/// (x direction) and iy the row (y direction).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  size_t size() const { return data_.size(); }

  T& operator()(int ix, int iy) { return data_[static_cast<size_t>(iy) * width_ + ix]; }
  const T& operator()(int ix, int iy) const {
    return data_[static_cast<size_t>(iy) * width_ + ix];
  }

  bool contains(int ix, int iy) const {
    return ix >= 0 && ix < width_ && iy >= 0 && iy < height_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Grid& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using GridD = Grid<double>;

inline bool all_finite(const GridD& g) {
  for (double v : g.data())
    if (!std::isfinite(v)) return false;
  return true;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

}  // namespace microflow
