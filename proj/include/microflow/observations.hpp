#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "microflow/core.hpp"
#include "microflow/field.hpp"

namespace microflow {

enum class ObsSource { ROBOT_OBSERVER, FILE };

struct Observation {
  Vec2 position;  // meters
  Vec2 velocity;  // m/s
};

struct ObservationSet {
  std::vector<Observation> entries;
  ObsSource source = ObsSource::FILE;

  void check_inside_fluid(const ChannelMask& mask) const {
    for (const auto& o : entries) {
      const auto [ix, iy] = nearest_pixel(mask, o.position);
      if (!mask.fluid(ix, iy))
        throw Error(ErrorCode::OBS_OUTSIDE_FLUID, "observation lies in a SOLID pixel");
    }
  }
};

/// One raw velocity sample recorded along the robot trajectory.
struct RawSample {
  Vec2 position;
  Vec2 velocity;
};

namespace detail {

/// Least-squares polynomial fit of y(s), evaluated back at the sample points.
/// Arc length is mapped to [-1, 1] before building the Vandermonde matrix.
inline std::vector<double> polyfit_eval(const std::vector<double>& s,
                                        const std::vector<double>& y, int degree) {
  const int n = static_cast<int>(s.size());
  const int d = std::min(degree, n - 1);
  const double lo = *std::min_element(s.begin(), s.end());
  const double hi = *std::max_element(s.begin(), s.end());
  const double span = (hi > lo) ? (hi - lo) : 1.0;
  Eigen::MatrixXd A(n, d + 1);
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * (s[i] - lo) / span - 1.0;
    double pw = 1.0;
    for (int j = 0; j <= d; ++j) {
      A(i, j) = pw;
      pw *= t;
    }
  }
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
  Eigen::VectorXd coef = A.colPivHouseholderQr().solve(b);
  Eigen::VectorXd fit = A * coef;
  return {fit.data(), fit.data() + n};
}

}  // namespace detail

/// Trims the lowest/highest 20% of speed magnitudes, then replaces each
/// velocity component with a least-squares polynomial in arc length
/// evaluated at the retained sample positions.
inline ObservationSet preprocess_observations(const std::vector<RawSample>& raw,
                                              int poly_degree = 3) {
  if (raw.size() < 10)
    throw Error(ErrorCode::TOO_FEW_SAMPLES, "need at least 10 raw samples");
  const int n = static_cast<int>(raw.size());
  const int k = static_cast<int>(std::floor(0.2 * n));

  // Order sample indices by speed magnitude (stable on ties), drop k from
  // each end, then restore trajectory order.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return raw[a].velocity.norm() < raw[b].velocity.norm();
  });
  std::vector<int> kept(order.begin() + k, order.end() - k);
  std::sort(kept.begin(), kept.end());
  if (static_cast<int>(kept.size()) < 10)
    throw Error(ErrorCode::TOO_FEW_SAMPLES, "fewer than 10 samples survive trimming");

  // Arc length along the original trajectory, restricted to kept samples.
  std::vector<double> arc(n, 0.0);
  for (int i = 1; i < n; ++i)
    arc[i] = arc[i - 1] + (raw[i].position - raw[i - 1].position).norm();

  std::vector<double> s, vx, vy;
  for (int i : kept) {
    s.push_back(arc[i]);
    vx.push_back(raw[i].velocity.x());
    vy.push_back(raw[i].velocity.y());
  }
  const std::vector<double> fx = detail::polyfit_eval(s, vx, poly_degree);
  const std::vector<double> fy = detail::polyfit_eval(s, vy, poly_degree);

  ObservationSet out;
  out.source = ObsSource::ROBOT_OBSERVER;
  out.entries.reserve(kept.size());
  for (size_t i = 0; i < kept.size(); ++i)
    out.entries.push_back({raw[kept[i]].position, Vec2(fx[i], fy[i])});
  return out;
}

// ---- CSV I/O: header x_m,y_m,vx_mps,vy_mps ----

inline void save_observations_csv(const ObservationSet& obs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << "x_m,y_m,vx_mps,vy_mps\n";
  out.precision(17);
  for (const auto& o : obs.entries)
    out << o.position.x() << ',' << o.position.y() << ',' << o.velocity.x() << ','
        << o.velocity.y() << '\n';
}

inline ObservationSet load_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BAD_FORMAT, "cannot open observations file " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("x_m,y_m,vx_mps,vy_mps", 0) != 0)
    throw Error(ErrorCode::BAD_FORMAT, "missing observations CSV header");
  ObservationSet obs;
  obs.source = ObsSource::FILE;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    Observation o;
    char c1, c2, c3;
    if (!(ss >> o.position.x() >> c1 >> o.position.y() >> c2 >> o.velocity.x() >> c3 >>
          o.velocity.y()) ||
        c1 != ',' || c2 != ',' || c3 != ',')
      throw Error(ErrorCode::BAD_FORMAT, "malformed observations row: " + line);
    if (!o.position.allFinite() || !o.velocity.allFinite())
      throw Error(ErrorCode::BAD_FORMAT, "non-finite observation entry");
    obs.entries.push_back(o);
  }
  return obs;
}

}  // namespace microflow
