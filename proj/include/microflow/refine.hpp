#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <vector>

#include "microflow/core.hpp"
#include "microflow/field.hpp"
#include "microflow/observations.hpp"
#include "microflow/stencil.hpp"

namespace microflow {

/// Per-pixel residual maps of the continuity and momentum equations,
/// evaluated only where the full 3x3 stencil neighborhood is FLUID.
struct ResidualMaps {
  GridD r_cont, r_momx, r_momy;
};

enum class DescentMode { GRADIENT, ADAM };

struct RefineConfig {
  int max_iters = 20000;
  double step_size = 1e-2;   // initial backtracking step
  double tol_loss = 1e-10;   // relative loss-decrease stopping threshold
  int boundary_band = 1;     // Dirichlet clamp band width around SOLID
  double w_cont = 1.0, w_momx = 1.0, w_momy = 1.0;
  DescentMode mode = DescentMode::ADAM;

  void validate() const {
    if (step_size <= 0 || boundary_band < 1 || tol_loss < 0 || max_iters < 0)
      throw Error(ErrorCode::INVALID_ARGUMENT, "bad refine config");
    if (w_cont < 0 || w_momx < 0 || w_momy < 0 || (w_cont + w_momx + w_momy) == 0)
      throw Error(ErrorCode::INVALID_ARGUMENT, "refine loss weights must be >=0, not all zero");
  }
};

struct RefineResult {
  FlowField field;
  std::vector<double> loss_history;
  std::vector<std::array<double, 3>> term_history;  // (cont, momx, momy) sums
  bool step_failure = false;
  int iters_used = 0;
};

namespace detail {

/// Pixels whose full 3x3 neighborhood is FLUID and which do not touch the
/// raster border; central stencils are exact there.
inline Grid<uint8_t> stencil_interior(const ChannelMask& m) {
  Grid<uint8_t> in(m.width, m.height, 0);
  for (int j = 1; j < m.height - 1; ++j)
    for (int i = 1; i < m.width - 1; ++i) {
      bool ok = true;
      for (int dj = -1; dj <= 1 && ok; ++dj)
        for (int di = -1; di <= 1 && ok; ++di)
          if (!m.fluid(i + di, j + dj)) ok = false;
      in(i, j) = ok ? 1 : 0;
    }
  return in;
}

/// Chebyshev-distance band of FLUID pixels within `band` of SOLID or of the
/// raster border.
inline Grid<uint8_t> boundary_band_mask(const ChannelMask& m, int band) {
  Grid<uint8_t> out(m.width, m.height, 0);
  for (int j = 0; j < m.height; ++j)
    for (int i = 0; i < m.width; ++i) {
      if (!m.fluid(i, j)) continue;
      bool near = false;
      for (int dj = -band; dj <= band && !near; ++dj)
        for (int di = -band; di <= band && !near; ++di)
          if (!m.fluid(i + di, j + dj)) near = true;
      out(i, j) = near ? 1 : 0;
    }
  return out;
}

// Central-difference scatter adjoints; `src` must be zero outside the
// stencil interior so the clamped border variants never participate.
inline void scatter_d1_t(const GridD& src, Axis axis, double scale, GridD& out) {
  const int W = src.width(), H = src.height();
  for (int j = 1; j < H - 1; ++j)
    for (int i = 1; i < W - 1; ++i) {
      const double a = src(i, j) * scale * 0.5;
      if (a == 0.0) continue;
      if (axis == Axis::X) {
        out(i + 1, j) += a;
        out(i - 1, j) -= a;
      } else {
        out(i, j + 1) += a;
        out(i, j - 1) -= a;
      }
    }
}

inline void scatter_lap_t(const GridD& src, double scale, GridD& out) {
  const int W = src.width(), H = src.height();
  for (int j = 1; j < H - 1; ++j)
    for (int i = 1; i < W - 1; ++i) {
      const double a = src(i, j) * scale;
      if (a == 0.0) continue;
      out(i + 1, j) += a;
      out(i - 1, j) += a;
      out(i, j + 1) += a;
      out(i, j - 1) += a;
      out(i, j) -= 4.0 * a;
    }
}

}  // namespace detail

/// Assembles the PDE residuals from the stencil kernels. First derivatives
/// are scaled by 1/pixel_size; the second-derivative kernel is scaled by
/// -4/pixel_size^2 so the assembled term is the conventional Laplacian.
inline ResidualMaps pde_residuals(const FlowField& field, const FluidProps& props) {
  if (!field.mask) throw Error(ErrorCode::DIMENSION_MISMATCH, "field has no mask reference");
  const ChannelMask& m = *field.mask;
  field.check_conforms(m);
  const double h = field.pixel_size;
  const double inv_h = 1.0 / h;
  const double lap_scale = -4.0 / (h * h);

  const GridD dvx_dx = stencil_d1(field.vx, Axis::X);
  const GridD dvx_dy = stencil_d1(field.vx, Axis::Y);
  const GridD dvy_dx = stencil_d1(field.vy, Axis::X);
  const GridD dvy_dy = stencil_d1(field.vy, Axis::Y);
  const GridD dp_dx = stencil_d1(field.p, Axis::X);
  const GridD dp_dy = stencil_d1(field.p, Axis::Y);
  const GridD k2vx = stencil_d2(field.vx);
  const GridD k2vy = stencil_d2(field.vy);

  const Grid<uint8_t> interior = detail::stencil_interior(m);
  ResidualMaps r;
  r.r_cont = GridD(m.width, m.height, 0.0);
  r.r_momx = GridD(m.width, m.height, 0.0);
  r.r_momy = GridD(m.width, m.height, 0.0);
  for (int j = 0; j < m.height; ++j)
    for (int i = 0; i < m.width; ++i) {
      if (!interior(i, j)) continue;
      r.r_cont(i, j) = (dvx_dx(i, j) + dvy_dy(i, j)) * inv_h;
      r.r_momx(i, j) =
          props.rho * (field.vx(i, j) * dvx_dx(i, j) + field.vy(i, j) * dvx_dy(i, j)) * inv_h +
          dp_dx(i, j) * inv_h - props.nu * k2vx(i, j) * lap_scale;
      r.r_momy(i, j) =
          props.rho * (field.vx(i, j) * dvy_dx(i, j) + field.vy(i, j) * dvy_dy(i, j)) * inv_h +
          dp_dy(i, j) * inv_h - props.nu * k2vy(i, j) * lap_scale;
    }
  return r;
}

namespace detail {

struct RefineProblem {
  const ChannelMask* mask;
  FluidProps props;
  RefineConfig cfg;
  Grid<uint8_t> free_v;  // descent may move vx,vy here
  Grid<uint8_t> free_p;  // descent may move p here

  std::array<double, 3> term_sums(const ResidualMaps& r) const {
    double sc = 0, sx = 0, sy = 0;
    for (size_t q = 0; q < r.r_cont.size(); ++q) {
      sc += r.r_cont.data()[q] * r.r_cont.data()[q];
      sx += r.r_momx.data()[q] * r.r_momx.data()[q];
      sy += r.r_momy.data()[q] * r.r_momy.data()[q];
    }
    return {sc, sx, sy};
  }

  double loss(const FlowField& f, std::array<double, 3>* terms = nullptr) const {
    const ResidualMaps r = pde_residuals(f, props);
    const auto t = term_sums(r);
    if (terms) *terms = t;
    return cfg.w_cont * t[0] + cfg.w_momx * t[1] + cfg.w_momy * t[2];
  }

  /// Exact gradient of the loss by transposed stencil application,
  /// restricted to free pixels.
  void gradient(const FlowField& f, GridD& gvx, GridD& gvy, GridD& gp) const {
    const double h = f.pixel_size;
    const double inv_h = 1.0 / h;
    const double inv_h2 = inv_h * inv_h;
    const int W = f.width(), H = f.height();
    const ResidualMaps r = pde_residuals(f, props);

    const GridD dvx_dx = stencil_d1(f.vx, Axis::X);
    const GridD dvx_dy = stencil_d1(f.vx, Axis::Y);
    const GridD dvy_dx = stencil_d1(f.vy, Axis::X);
    const GridD dvy_dy = stencil_d1(f.vy, Axis::Y);

    gvx = GridD(W, H, 0.0);
    gvy = GridD(W, H, 0.0);
    gp = GridD(W, H, 0.0);

    // Weighted residuals (zero outside the stencil interior).
    GridD ac(W, H, 0.0), ax(W, H, 0.0), ay(W, H, 0.0);
    for (size_t q = 0; q < ac.size(); ++q) {
      ac.data()[q] = 2.0 * cfg.w_cont * r.r_cont.data()[q];
      ax.data()[q] = 2.0 * cfg.w_momx * r.r_momx.data()[q];
      ay.data()[q] = 2.0 * cfg.w_momy * r.r_momy.data()[q];
    }

    // Continuity: r_c = (Dx vx + Dy vy)/h.
    scatter_d1_t(ac, Axis::X, inv_h, gvx);
    scatter_d1_t(ac, Axis::Y, inv_h, gvy);

    // x-momentum: r_x = rho(vx Dx vx + vy Dy vx)/h + Dx p / h - nu Lap vx / h^2.
    GridD tmp(W, H, 0.0);
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) {
        const double a = ax(i, j);
        if (a != 0.0) {
          gvx(i, j) += props.rho * dvx_dx(i, j) * inv_h * a;
          gvy(i, j) += props.rho * dvx_dy(i, j) * inv_h * a;
        }
      }
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) tmp(i, j) = ax(i, j) * f.vx(i, j);
    scatter_d1_t(tmp, Axis::X, props.rho * inv_h, gvx);
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) tmp(i, j) = ax(i, j) * f.vy(i, j);
    scatter_d1_t(tmp, Axis::Y, props.rho * inv_h, gvx);
    scatter_lap_t(ax, -props.nu * inv_h2, gvx);
    scatter_d1_t(ax, Axis::X, inv_h, gp);

    // y-momentum, symmetric.
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) {
        const double a = ay(i, j);
        if (a != 0.0) {
          gvx(i, j) += props.rho * dvy_dx(i, j) * inv_h * a;
          gvy(i, j) += props.rho * dvy_dy(i, j) * inv_h * a;
        }
      }
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) tmp(i, j) = ay(i, j) * f.vx(i, j);
    scatter_d1_t(tmp, Axis::X, props.rho * inv_h, gvy);
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) tmp(i, j) = ay(i, j) * f.vy(i, j);
    scatter_d1_t(tmp, Axis::Y, props.rho * inv_h, gvy);
    scatter_lap_t(ay, -props.nu * inv_h2, gvy);
    scatter_d1_t(ay, Axis::Y, inv_h, gp);

    // Clamped pixels do not move.
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < W; ++i) {
        if (!free_v(i, j)) gvx(i, j) = gvy(i, j) = 0.0;
        if (!free_p(i, j)) gp(i, j) = 0.0;
      }
  }
};

}  // namespace detail

/// Physics-informed refinement: descend the residual loss over the free
/// interior pixels while observation pixels and the near-boundary band stay
/// clamped. The loss history is monotone non-increasing (backtracking).
inline RefineResult refine_field(const FlowField& initial, const ObservationSet& obs,
                                 const FluidProps& props, const RefineConfig& cfg = {}) {
  cfg.validate();
  props.validate();
  if (!initial.mask) throw Error(ErrorCode::DIMENSION_MISMATCH, "initial field has no mask");
  const ChannelMask& m = *initial.mask;
  initial.check_conforms(m);
  const int W = m.width, H = m.height;

  detail::RefineProblem prob;
  prob.mask = &m;
  prob.props = props;
  prob.cfg = cfg;

  // Observation clamps: nearest pixel centers, collisions averaged.
  std::map<int, std::pair<Vec2, int>> obs_px;
  for (const auto& o : obs.entries) {
    const auto [ix, iy] = nearest_pixel(m, o.position);
    if (!m.fluid(ix, iy))
      throw Error(ErrorCode::OBS_OUTSIDE_FLUID, "observation maps to a SOLID pixel");
    auto [it, fresh] = obs_px.try_emplace(m.index(ix, iy), Vec2::Zero(), 0);
    it->second.first += o.velocity;
    it->second.second += 1;
  }

  const Grid<uint8_t> band = detail::boundary_band_mask(m, cfg.boundary_band);
  prob.free_v = Grid<uint8_t>(W, H, 0);
  prob.free_p = Grid<uint8_t>(W, H, 0);
  for (int j = 0; j < H; ++j)
    for (int i = 0; i < W; ++i) {
      const bool fluid = m.fluid(i, j);
      prob.free_v(i, j) = (fluid && !band(i, j) && !obs_px.count(m.index(i, j))) ? 1 : 0;
      prob.free_p(i, j) = fluid ? 1 : 0;
    }
  if (!m.outlet_pixels.empty()) {
    const int pin = m.outlet_pixels.front();
    prob.free_p(pin % W, pin / W) = 0;  // pressure level pin
  }

  RefineResult res;
  res.field = initial;
  res.field.mask = initial.mask;
  for (const auto& [idx, acc] : obs_px) {
    const Vec2 v = acc.first / acc.second;
    res.field.vx.data()[idx] = v.x();
    res.field.vy.data()[idx] = v.y();
  }

  std::array<double, 3> terms{};
  double cur = prob.loss(res.field, &terms);
  res.loss_history.push_back(cur);
  res.term_history.push_back(terms);

  // Adam moments (flattened over the three planes).
  GridD m1x(W, H, 0.0), m1y(W, H, 0.0), m1p(W, H, 0.0);
  GridD m2x(W, H, 0.0), m2y(W, H, 0.0), m2p(W, H, 0.0);
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;

  double step = cfg.step_size;
  GridD gvx, gvy, gp;
  FlowField trial = res.field;
  for (int it = 0; it < cfg.max_iters; ++it) {
    prob.gradient(res.field, gvx, gvy, gp);

    GridD dvx = gvx, dvy = gvy, dp = gp;  // descent direction = -d
    if (cfg.mode == DescentMode::ADAM) {
      const double c1 = 1.0 - std::pow(beta1, it + 1);
      const double c2 = 1.0 - std::pow(beta2, it + 1);
      auto adamize = [&](GridD& g, GridD& mm1, GridD& mm2, GridD& d) {
        for (size_t q = 0; q < g.size(); ++q) {
          mm1.data()[q] = beta1 * mm1.data()[q] + (1 - beta1) * g.data()[q];
          mm2.data()[q] = beta2 * mm2.data()[q] + (1 - beta2) * g.data()[q] * g.data()[q];
          d.data()[q] = (mm1.data()[q] / c1) / (std::sqrt(mm2.data()[q] / c2) + eps);
        }
      };
      adamize(gvx, m1x, m2x, dvx);
      adamize(gvy, m1y, m2y, dvy);
      adamize(gp, m1p, m2p, dp);
    }

    // Backtracking line search along -d.
    bool accepted = false;
    double t = step;
    for (int bt = 0; bt < 60; ++bt) {
      for (size_t q = 0; q < trial.vx.size(); ++q) {
        trial.vx.data()[q] = res.field.vx.data()[q] - t * dvx.data()[q];
        trial.vy.data()[q] = res.field.vy.data()[q] - t * dvy.data()[q];
        trial.p.data()[q] = res.field.p.data()[q] - t * dp.data()[q];
      }
      std::array<double, 3> trial_terms{};
      const double lt = prob.loss(trial, &trial_terms);
      if (lt <= cur) {
        std::swap(res.field.vx, trial.vx);
        std::swap(res.field.vy, trial.vy);
        std::swap(res.field.p, trial.p);
        const double prev = cur;
        cur = lt;
        terms = trial_terms;
        accepted = true;
        step = std::min(t * 2.0, 1e3);
        res.loss_history.push_back(cur);
        res.term_history.push_back(terms);
        res.iters_used = it + 1;
        if (prev - cur <= cfg.tol_loss * std::max(prev, 1e-300)) {
          return res;
        }
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.step_failure = true;
      break;
    }
  }
  return res;
}

inline void save_loss_csv(const RefineResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << "iter,loss,r_cont,r_momx,r_momy\n";
  out.precision(17);
  for (size_t i = 0; i < r.loss_history.size(); ++i)
    out << i << ',' << r.loss_history[i] << ',' << r.term_history[i][0] << ','
        << r.term_history[i][1] << ',' << r.term_history[i][2] << '\n';
}

}  // namespace microflow
