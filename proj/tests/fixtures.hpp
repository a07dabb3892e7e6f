#pragma once

// Shared test fixtures: canonical masks, analytic fields, and independent
// oracles (Dijkstra, BFS reachability) kept separate from the library path.

#include <limits>
#include <queue>
#include <random>
#include <vector>

#include "microflow/field.hpp"
#include "microflow/fvm.hpp"
#include "microflow/mask.hpp"
#include "microflow/planner.hpp"

namespace microflow::testfix {

/// Straight channel: SOLID top and bottom rows, FLUID rows 1..H-2, inlet on
/// the left edge, outlet on the right.
inline std::shared_ptr<const ChannelMask> straight_channel(int W, int H, double pixel_size,
                                                           double v_inlet) {
  Grid<Cell> cells(W, H, Cell::FLUID);
  for (int i = 0; i < W; ++i) {
    cells(i, 0) = Cell::SOLID;
    cells(i, H - 1) = Cell::SOLID;
  }
  const BorderSegment inlet{Edge::LEFT, 1, H - 2};
  const BorderSegment outlet{Edge::RIGHT, 1, H - 2};
  return std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), pixel_size, inlet, v_inlet, {outlet}));
}

/// All-FLUID open box with left-edge inlet and right-edge outlet.
inline std::shared_ptr<const ChannelMask> open_box(int W, int H, double pixel_size,
                                                   double v_inlet) {
  Grid<Cell> cells(W, H, Cell::FLUID);
  const BorderSegment inlet{Edge::LEFT, 0, H - 1};
  const BorderSegment outlet{Edge::RIGHT, 0, H - 1};
  return std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), pixel_size, inlet, v_inlet, {outlet}));
}

/// Symmetric Y-bifurcation (mirror symmetry about the horizontal midline):
/// inlet channel on the left splits into two equal-width branches that exit
/// on the right edge. Height must be even and >= 32.
inline std::shared_ptr<const ChannelMask> y_bifurcation(int W, int H, double pixel_size,
                                                        double v_inlet) {
  Grid<Cell> cells(W, H, Cell::SOLID);
  const int bw = H / 8;               // branch half-width parameter
  const int in_lo = H / 2 - bw;       // inlet rows [in_lo, H-1-in_lo]
  const int in_hi = H - 1 - in_lo;
  const int stem_end = W / 3;
  const int split_end = W / 2;
  const int b1_lo = H / 8, b1_hi = b1_lo + 2 * bw - 1;           // upper branch
  const int b2_hi = H - 1 - b1_lo, b2_lo = H - 1 - b1_hi;        // mirrored lower
  for (int j = in_lo; j <= in_hi; ++j)
    for (int i = 0; i < stem_end; ++i) cells(i, j) = Cell::FLUID;
  // Transition chamber joining the stem to both branches.
  for (int j = b1_lo; j <= b2_hi; ++j)
    for (int i = stem_end; i < split_end; ++i) cells(i, j) = Cell::FLUID;
  for (int i = split_end; i < W; ++i) {
    for (int j = b1_lo; j <= b1_hi; ++j) cells(i, j) = Cell::FLUID;
    for (int j = b2_lo; j <= b2_hi; ++j) cells(i, j) = Cell::FLUID;
  }
  const BorderSegment inlet{Edge::LEFT, in_lo, in_hi};
  const BorderSegment out1{Edge::RIGHT, b1_lo, b1_hi};
  const BorderSegment out2{Edge::RIGHT, b2_lo, b2_hi};
  return std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), pixel_size, inlet, v_inlet, {out1, out2}));
}

/// Sudden expansion: a narrow inlet channel opening into a wider channel at
/// W/3. Inertia makes the downstream field viscosity-dependent, unlike a
/// straight channel.
inline std::shared_ptr<const ChannelMask> sudden_expansion(int W, int H, double pixel_size,
                                                           double v_inlet) {
  Grid<Cell> cells(W, H, Cell::SOLID);
  const int nlo = H / 2 - H / 8, nhi = H / 2 + H / 8 - 1;
  for (int i = 0; i < W / 3; ++i)
    for (int j = nlo; j <= nhi; ++j) cells(i, j) = Cell::FLUID;
  for (int i = W / 3; i < W; ++i)
    for (int j = 1; j < H - 1; ++j) cells(i, j) = Cell::FLUID;
  return std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), pixel_size, BorderSegment{Edge::LEFT, nlo, nhi}, v_inlet,
                {BorderSegment{Edge::RIGHT, 1, H - 2}}));
}

/// Root-mean-square velocity difference over FLUID pixels.
inline double rmse_velocity(const FlowField& a, const FlowField& b, const ChannelMask& m) {
  double ss = 0;
  int n = 0;
  for (int j = 0; j < m.height; ++j)
    for (int i = 0; i < m.width; ++i) {
      if (!m.fluid(i, j)) continue;
      const double dx = a.vx(i, j) - b.vx(i, j);
      const double dy = a.vy(i, j) - b.vy(i, j);
      ss += dx * dx + dy * dy;
      ++n;
    }
  return std::sqrt(ss / n);
}

/// Analytic plane Poiseuille profile for a straight_channel mask: no-slip
/// surfaces at the top of row 0 and the bottom of row H-1.
struct Poiseuille {
  double H_phys;     // fluid gap, meters
  double u_mean;     // mean speed
  double wall_y;     // y of the upper no-slip surface (top wall lower face)
  double grad_p;     // pressure gradient magnitude, -dp/dx

  Poiseuille(const ChannelMask& m, double mu) {
    const int fluid_rows = m.height - 2;
    H_phys = fluid_rows * m.pixel_size;
    u_mean = m.v_inlet;
    wall_y = m.pixel_size;
    grad_p = 12.0 * mu * u_mean / (H_phys * H_phys);
  }

  double vx_at(double y) const {
    const double xi = (y - wall_y) / H_phys;
    if (xi <= 0 || xi >= 1) return 0.0;
    return 6.0 * u_mean * xi * (1.0 - xi);
  }
};

/// Collocated analytic Poiseuille field (with its exact linear pressure) on
/// a straight_channel mask.
inline FlowField poiseuille_field(const std::shared_ptr<const ChannelMask>& mask, double mu) {
  const ChannelMask& m = *mask;
  const Poiseuille an(m, mu);
  FlowField f = FlowField::zeros(mask);
  const double h = m.pixel_size;
  for (int j = 0; j < m.height; ++j)
    for (int i = 0; i < m.width; ++i) {
      if (!m.fluid(i, j)) continue;
      f.vx(i, j) = an.vx_at((j + 0.5) * h);
      f.p(i, j) = an.grad_p * (m.width * h - (i + 0.5) * h);
    }
  return f;
}

/// Uniform-velocity field over an arbitrary mask (FLUID pixels only).
inline FlowField uniform_field(const std::shared_ptr<const ChannelMask>& mask, double vx,
                               double vy) {
  FlowField f = FlowField::zeros(mask);
  for (int j = 0; j < mask->height; ++j)
    for (int i = 0; i < mask->width; ++i)
      if (mask->fluid(i, j)) {
        f.vx(i, j) = vx;
        f.vy(i, j) = vy;
      }
  return f;
}

/// Random connected channel: straight channel with random rectangular
/// obstacles, rejected and resampled until inlet-outlet connectivity holds.
inline std::shared_ptr<const ChannelMask> random_channel(std::mt19937& rng, int W, int H,
                                                         double pixel_size, double v_inlet,
                                                         int n_obstacles = 3) {
  std::uniform_int_distribution<int> ox(4, W - 8), oy(1, H - 4);
  std::uniform_int_distribution<int> ow(2, W / 4), oh(2, H / 3);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Grid<Cell> cells(W, H, Cell::FLUID);
    for (int i = 0; i < W; ++i) {
      cells(i, 0) = Cell::SOLID;
      cells(i, H - 1) = Cell::SOLID;
    }
    for (int ob = 0; ob < n_obstacles; ++ob) {
      const int x0 = ox(rng), y0 = oy(rng), w = ow(rng), hh = oh(rng);
      for (int j = y0; j < std::min(H - 1, y0 + hh); ++j)
        for (int i = x0; i < std::min(W - 1, x0 + w); ++i) cells(i, j) = Cell::SOLID;
    }
    // Keep inlet/outlet columns clear.
    for (int j = 1; j < H - 1; ++j) {
      cells(0, j) = Cell::FLUID;
      cells(W - 1, j) = Cell::FLUID;
    }
    try {
      return std::make_shared<const ChannelMask>(
          make_mask(std::move(cells), pixel_size, BorderSegment{Edge::LEFT, 1, H - 2},
                    v_inlet, {BorderSegment{Edge::RIGHT, 1, H - 2}}));
    } catch (const Error&) {
      continue;  // disconnected sample, retry
    }
  }
  throw std::runtime_error("random_channel: no connected sample in 100 attempts");
}

/// Independent Dijkstra oracle over a FlowGraph with the same anisotropic
/// edge weights; no heuristic involved.
inline double dijkstra_cost(const FlowGraph& g, int s, int t) {
  const int n = static_cast<int>(g.positions.size());
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  dist[s] = 0;
  pq.emplace(0.0, s);
  while (!pq.empty()) {
    const auto [d, node] = pq.top();
    pq.pop();
    if (d > dist[node]) continue;
    if (node == t) return d;
    for (int nb : g.neighbors[node]) {
      const double c =
          edge_cost(g.positions[node], g.positions[nb], g.velocities[node], g.v_max);
      if (dist[node] + c < dist[nb]) {
        dist[nb] = dist[node] + c;
        pq.emplace(dist[nb], nb);
      }
    }
  }
  return dist[t];
}

/// Brute-force BFS reachability oracle over FLUID 4-connectivity.
inline bool bfs_reachable(const ChannelMask& m, const std::vector<int>& from,
                          const std::vector<int>& to) {
  std::vector<uint8_t> seen(static_cast<size_t>(m.width) * m.height, 0);
  std::queue<int> q;
  for (int idx : from)
    if (m.cells.data()[idx] == Cell::FLUID && !seen[idx]) {
      seen[idx] = 1;
      q.push(idx);
    }
  while (!q.empty()) {
    const int idx = q.front();
    q.pop();
    const int ix = idx % m.width, iy = idx / m.width;
    const int steps[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : steps) {
      const int nx = ix + d[0], ny = iy + d[1];
      if (m.fluid(nx, ny)) {
        const int nidx = m.index(nx, ny);
        if (!seen[nidx]) {
          seen[nidx] = 1;
          q.push(nidx);
        }
      }
    }
  }
  for (int idx : to)
    if (!seen[idx]) return false;
  return true;
}

}  // namespace microflow::testfix
