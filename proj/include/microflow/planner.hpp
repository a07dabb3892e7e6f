#pragma once

#include <algorithm>
#include <limits>
#include <memory>
#include <queue>
#include <vector>

#include "microflow/core.hpp"
#include "microflow/field.hpp"

namespace microflow {

namespace detail {

/// Static 2-D k-d tree over node positions.
class KdTree2 {
 public:
  explicit KdTree2(const std::vector<Vec2>& points) : pts_(points) {
    order_.resize(points.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    if (!order_.empty()) build(0, static_cast<int>(order_.size()), 0);
  }

  /// Indices of the k nearest points to `query`, nearest first; ties broken
  /// by smaller index for determinism.
  std::vector<int> knn(const Vec2& query, int k) const {
    if (order_.empty() || k <= 0) return {};
    using Entry = std::pair<double, int>;  // (squared distance, index)
    std::priority_queue<Entry> heap;       // max-heap of current best k
    search(0, static_cast<int>(order_.size()), 0, query, k, heap);
    std::vector<Entry> out;
    while (!heap.empty()) {
      out.push_back(heap.top());
      heap.pop();
    }
    std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
      return a.first != b.first ? a.first < b.first : a.second < b.second;
    });
    std::vector<int> idx;
    idx.reserve(out.size());
    for (const auto& e : out) idx.push_back(e.second);
    return idx;
  }

  int nearest(const Vec2& query) const {
    auto r = knn(query, 1);
    return r.empty() ? -1 : r[0];
  }

 private:
  void build(int lo, int hi, int depth) {
    if (hi - lo <= 1) return;
    const int mid = (lo + hi) / 2;
    const int axis = depth % 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](int a, int b) {
                       const double pa = pts_[a][axis], pb = pts_[b][axis];
                       return pa != pb ? pa < pb : a < b;
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void search(int lo, int hi, int depth, const Vec2& q, int k,
              std::priority_queue<std::pair<double, int>>& heap) const {
    if (lo >= hi) return;
    const int mid = (lo + hi) / 2;
    const int idx = order_[mid];
    const double d2 = (pts_[idx] - q).squaredNorm();
    if (static_cast<int>(heap.size()) < k) {
      heap.emplace(d2, idx);
    } else if (d2 < heap.top().first ||
               (d2 == heap.top().first && idx < heap.top().second)) {
      heap.pop();
      heap.emplace(d2, idx);
    }
    const int axis = depth % 2;
    const double delta = q[axis] - pts_[idx][axis];
    const int near_lo = delta < 0 ? lo : mid + 1;
    const int near_hi = delta < 0 ? mid : hi;
    const int far_lo = delta < 0 ? mid + 1 : lo;
    const int far_hi = delta < 0 ? hi : mid;
    search(near_lo, near_hi, depth + 1, q, k, heap);
    if (static_cast<int>(heap.size()) < k || delta * delta <= heap.top().first)
      search(far_lo, far_hi, depth + 1, q, k, heap);
  }

  const std::vector<Vec2>& pts_;
  std::vector<int> order_;
};

/// Pixel supercover traversal: true iff the segment (meters) touches no
/// SOLID pixel. Exact corner crossings require both side pixels FLUID.
inline bool line_of_sight(const ChannelMask& m, const Vec2& a, const Vec2& b) {
  const double h = m.pixel_size;
  const double ax = a.x() / h, ay = a.y() / h, bx = b.x() / h, by = b.y() / h;
  int ix = static_cast<int>(std::floor(ax)), iy = static_cast<int>(std::floor(ay));
  const int tx = static_cast<int>(std::floor(bx)), ty = static_cast<int>(std::floor(by));
  auto blocked = [&](int i, int j) { return !m.fluid(i, j); };
  if (blocked(ix, iy) || blocked(tx, ty)) return false;
  const double dx = bx - ax, dy = by - ay;
  const int step_x = dx > 0 ? 1 : -1, step_y = dy > 0 ? 1 : -1;
  const double inf = std::numeric_limits<double>::infinity();
  double t_max_x = dx != 0 ? (dx > 0 ? (ix + 1 - ax) : (ax - ix)) / std::abs(dx) : inf;
  double t_max_y = dy != 0 ? (dy > 0 ? (iy + 1 - ay) : (ay - iy)) / std::abs(dy) : inf;
  const double t_delta_x = dx != 0 ? 1.0 / std::abs(dx) : inf;
  const double t_delta_y = dy != 0 ? 1.0 / std::abs(dy) : inf;
  int guard = std::abs(tx - ix) + std::abs(ty - iy) + 4;
  while ((ix != tx || iy != ty) && guard-- > 0) {
    if (std::abs(t_max_x - t_max_y) < 1e-12) {
      // exact corner: both side pixels must be free
      if (blocked(ix + step_x, iy) || blocked(ix, iy + step_y)) return false;
      ix += step_x;
      iy += step_y;
      t_max_x += t_delta_x;
      t_max_y += t_delta_y;
    } else if (t_max_x < t_max_y) {
      ix += step_x;
      t_max_x += t_delta_x;
    } else {
      iy += step_y;
      t_max_y += t_delta_y;
    }
    if (blocked(ix, iy)) return false;
  }
  return true;
}

}  // namespace detail

/// Planner node graph: FLUID lattice nodes with local flow velocities and a
/// k-nearest adjacency restricted to FLUID-visible pairs.
struct FlowGraph {
  std::vector<Vec2> positions;   // meters
  std::vector<Vec2> velocities;  // node flow, m/s
  std::vector<std::vector<int>> neighbors;
  double v_max = 0;
  int stride = 1;
  double pixel_size = 1.0;
  std::shared_ptr<const ChannelMask> mask;
};

struct PlanResult {
  std::vector<int> node_path;     // graph node indices, start..goal
  std::vector<Vec2> path;         // node positions
  double total_cost = 0.0;        // accumulated edge-cost sum
  double travel_time = std::numeric_limits<double>::quiet_NaN();
  int expanded = 0;
};

/// Edge cost: ||dx|| * || dx/||dx|| - v_cur/v_max ||.
inline double edge_cost(const Vec2& x_cur, const Vec2& x_neig, const Vec2& v_cur,
                        double v_max) {
  if (v_max <= 0) throw Error(ErrorCode::INVALID_ARGUMENT, "v_max must be positive");
  const Vec2 dx = x_neig - x_cur;
  const double len = dx.norm();
  if (len == 0) throw Error(ErrorCode::ZERO_LENGTH_EDGE, "edge endpoints coincide");
  return len * (dx / len - v_cur / v_max).norm();
}

/// Heuristic: the edge-cost form evaluated toward the goal; zero at the goal.
inline double heuristic(const Vec2& x_cur, const Vec2& x_goal, const Vec2& v_cur,
                        double v_max) {
  if (v_max <= 0) throw Error(ErrorCode::INVALID_ARGUMENT, "v_max must be positive");
  const Vec2 dx = x_goal - x_cur;
  const double len = dx.norm();
  if (len == 0) return 0.0;
  return len * (dx / len - v_cur / v_max).norm();
}

/// Samples FLUID pixel centers on the stride lattice and connects k-nearest
/// line-of-sight neighbors, symmetrically closed.
inline FlowGraph build_graph(const FlowField& field, int stride, int k, double v_max) {
  if (!field.mask) throw Error(ErrorCode::DIMENSION_MISMATCH, "field has no mask reference");
  if (stride < 1 || k < 1 || v_max <= 0)
    throw Error(ErrorCode::INVALID_ARGUMENT, "bad graph parameters");
  const ChannelMask& m = *field.mask;
  field.check_conforms(m);
  const double h = m.pixel_size;

  FlowGraph g;
  g.v_max = v_max;
  g.stride = stride;
  g.pixel_size = h;
  g.mask = field.mask;
  for (int j = 0; j < m.height; j += stride)
    for (int i = 0; i < m.width; i += stride) {
      if (!m.fluid(i, j)) continue;
      g.positions.emplace_back((i + 0.5) * h, (j + 0.5) * h);
      g.velocities.emplace_back(field.vx(i, j), field.vy(i, j));
    }
  if (g.positions.empty()) throw Error(ErrorCode::EMPTY_GRAPH, "no FLUID nodes on lattice");

  const detail::KdTree2 tree(g.positions);
  const int n = static_cast<int>(g.positions.size());
  g.neighbors.assign(n, {});
  for (int i = 0; i < n; ++i) {
    for (int nb : tree.knn(g.positions[i], k + 1)) {
      if (nb == i) continue;
      if (static_cast<int>(g.neighbors[i].size()) >= k) break;
      if (detail::line_of_sight(m, g.positions[i], g.positions[nb]))
        g.neighbors[i].push_back(nb);
    }
  }
  // Symmetric closure.
  for (int i = 0; i < n; ++i)
    for (int nb : g.neighbors[i])
      if (std::find(g.neighbors[nb].begin(), g.neighbors[nb].end(), i) ==
          g.neighbors[nb].end())
        g.neighbors[nb].push_back(i);
  for (auto& adj : g.neighbors) std::sort(adj.begin(), adj.end());
  return g;
}

/// Best-first search on f = g + h with flow-aware edge costs. Deterministic
/// tie-breaking on (f, h, node index).
inline PlanResult astar(const FlowGraph& graph, const Vec2& start, const Vec2& goal) {
  const detail::KdTree2 tree(graph.positions);
  const int s = tree.nearest(start);
  const int t = tree.nearest(goal);
  const double map_radius = 2.0 * graph.stride * graph.pixel_size;
  if (s < 0 || t < 0 || (graph.positions[s] - start).norm() > map_radius ||
      (graph.positions[t] - goal).norm() > map_radius)
    throw Error(ErrorCode::START_GOAL_UNMAPPED, "start/goal too far from any graph node");

  PlanResult res;
  if (s == t) {
    res.total_cost = 0;
    return res;
  }

  const int n = static_cast<int>(graph.positions.size());
  std::vector<double> gcost(n, std::numeric_limits<double>::infinity());
  std::vector<int> parent(n, -1);
  std::vector<uint8_t> closed(n, 0);
  struct Entry {
    double f, h;
    int node;
    bool operator>(const Entry& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return node > o.node;
    }
  };
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  gcost[s] = 0;
  open.push({heuristic(graph.positions[s], graph.positions[t], graph.velocities[s],
                       graph.v_max),
             0, s});
  while (!open.empty()) {
    const Entry cur = open.top();
    open.pop();
    if (closed[cur.node]) continue;
    closed[cur.node] = 1;
    ++res.expanded;
    if (cur.node == t) break;
    const Vec2& xc = graph.positions[cur.node];
    const Vec2& vc = graph.velocities[cur.node];
    for (int nb : graph.neighbors[cur.node]) {
      if (closed[nb]) continue;
      const double cand = gcost[cur.node] + edge_cost(xc, graph.positions[nb], vc, graph.v_max);
      if (cand < gcost[nb]) {
        gcost[nb] = cand;
        parent[nb] = cur.node;
        const double h =
            heuristic(graph.positions[nb], graph.positions[t], graph.velocities[nb],
                      graph.v_max);
        open.push({cand + h, h, nb});
      }
    }
  }
  if (!closed[t]) throw Error(ErrorCode::NO_PATH, "open list exhausted before reaching goal");
  for (int at = t; at != -1; at = parent[at]) res.node_path.push_back(at);
  std::reverse(res.node_path.begin(), res.node_path.end());
  for (int idx : res.node_path) res.path.push_back(graph.positions[idx]);
  res.total_cost = gcost[t];
  return res;
}

/// Plain-A* variant: Euclidean edge costs and heuristic (zero-flow search on
/// the same graph), used for the planner comparison protocol.
inline PlanResult astar_euclidean(const FlowGraph& graph, const Vec2& start, const Vec2& goal) {
  FlowGraph g0 = graph;
  for (auto& v : g0.velocities) v.setZero();
  return astar(g0, start, goal);
}

/// Waypoint-following time simulation: pure pursuit at full self-speed
/// u_max with cross-flow compensation, waypoint acceptance radius of one
/// pixel. Throws UNREACHABLE when a leg cannot be completed.
inline double travel_time(const std::vector<Vec2>& path, const FlowField& field, double u_max,
                          double dt) {
  if (path.size() < 2) return 0.0;
  if (u_max <= 0 || dt <= 0)
    throw Error(ErrorCode::INVALID_ARGUMENT, "u_max and dt must be positive");
  const double radius = field.pixel_size;
  double length = 0;
  for (size_t i = 1; i < path.size(); ++i) length += (path[i] - path[i - 1]).norm();
  const double budget = 50.0 * length / u_max + 1000.0 * dt;

  const double W = field.width() * field.pixel_size;
  const double H = field.height() * field.pixel_size;
  Vec2 x = path.front();
  double t = 0;
  for (size_t wp = 1; wp < path.size(); ++wp) {
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    while ((x - path[wp]).norm() > radius) {
      if (t > budget || stall > 20000)
        throw Error(ErrorCode::UNREACHABLE, "waypoint not reached within time budget");
      const Vec2 clamped(std::clamp(x.x(), 0.0, W), std::clamp(x.y(), 0.0, H));
      const Vec2 v = sample_velocity(field, clamped);
      const Vec2 d = path[wp] - x;
      const Vec2 dir = d.normalized();
      const double v_par = v.dot(dir);
      const Vec2 v_perp = v - v_par * dir;
      Vec2 ground;
      if (v_perp.norm() < u_max) {
        const double u_along = std::sqrt(u_max * u_max - v_perp.squaredNorm());
        ground = (u_along + v_par) * dir;
      } else {
        ground = u_max * dir + v;  // cannot cancel drift, aim straight
      }
      x += ground * dt;
      t += dt;
      const double dist = (x - path[wp]).norm();
      if (dist < best - 1e-15) {
        best = dist;
        stall = 0;
      } else {
        ++stall;
      }
    }
  }
  return t;
}

/// Midpoint-relaxation smoothing with collision rejection; endpoints fixed.
inline std::vector<Vec2> smooth_path(const ChannelMask& mask, std::vector<Vec2> path,
                                     int iterations = 10) {
  if (path.size() < 3) return path;
  const double lambda = 0.5;
  for (int it = 0; it < iterations; ++it) {
    for (size_t i = 1; i + 1 < path.size(); ++i) {
      const Vec2 target = 0.5 * (path[i - 1] + path[i + 1]);
      const Vec2 cand = path[i] + lambda * (target - path[i]);
      if (detail::line_of_sight(mask, path[i - 1], cand) &&
          detail::line_of_sight(mask, cand, path[i + 1]))
        path[i] = cand;
    }
  }
  return path;
}

}  // namespace microflow
