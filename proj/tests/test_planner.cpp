#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"

using namespace microflow;
using namespace microflow::testfix;

namespace {

int count_components(const FlowGraph& g) {
  const int n = static_cast<int>(g.positions.size());
  std::vector<int> comp(n, -1);
  int ncomp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    std::queue<int> q;
    q.push(s);
    comp[s] = ncomp;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int nb : g.neighbors[v])
        if (comp[nb] < 0) {
          comp[nb] = ncomp;
          q.push(nb);
        }
    }
    ++ncomp;
  }
  return ncomp;
}

/// Smooth solenoidal test flow with |v| <= cap everywhere.
FlowField vortex_field(const std::shared_ptr<const ChannelMask>& mask, double cap) {
  FlowField f = FlowField::zeros(mask);
  const double W = mask->width * mask->pixel_size;
  const double H = mask->height * mask->pixel_size;
  for (int j = 0; j < mask->height; ++j)
    for (int i = 0; i < mask->width; ++i) {
      if (!mask->fluid(i, j)) continue;
      const double x = (i + 0.5) * mask->pixel_size / W;
      const double y = (j + 0.5) * mask->pixel_size / H;
      f.vx(i, j) = cap * 0.7 * std::sin(2 * M_PI * y);
      f.vy(i, j) = cap * 0.7 * std::sin(2 * M_PI * x);
    }
  return f;
}

}  // namespace

TEST_CASE("edge_cost: zero flow, perfect downstream, dead upstream") {
  const Vec2 o(0, 0), e(1, 0);
  CHECK(edge_cost(o, e, Vec2(0, 0), 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(edge_cost(o, e, Vec2(1.0, 0), 1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(edge_cost(o, e, Vec2(-1.0, 0), 1.0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("edge_cost: invalid arguments") {
  CHECK_THROWS_AS(edge_cost(Vec2(0, 0), Vec2(0, 0), Vec2(0, 0), 1.0), Error);
  CHECK_THROWS_AS(edge_cost(Vec2(0, 0), Vec2(1, 0), Vec2(0, 0), 0.0), Error);
}

TEST_CASE("edge_cost: bounded by ||dx||(1 +- |v|/v_max) for |v| <= v_max") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double v_max = 2.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 a(u(rng), u(rng));
    Vec2 b(u(rng), u(rng));
    if ((b - a).norm() < 1e-6) b += Vec2(0.5, 0.5);
    Vec2 v(u(rng), u(rng));
    if (v.norm() > v_max) v *= v_max / v.norm();
    const double len = (b - a).norm();
    const double c = edge_cost(a, b, v, v_max);
    CHECK(c >= len * (1.0 - v.norm() / v_max) - 1e-12);
    CHECK(c <= len * (1.0 + v.norm() / v_max) + 1e-12);
  }
}

TEST_CASE("heuristic: zero at goal, Euclidean under zero flow, aligned-flow cancellation") {
  CHECK(heuristic(Vec2(3, 4), Vec2(3, 4), Vec2(1, 1), 2.0) == 0.0);
  CHECK(heuristic(Vec2(0, 0), Vec2(3, 4), Vec2(0, 0), 2.0) ==
        doctest::Approx(5.0).epsilon(1e-15));
  CHECK(heuristic(Vec2(0, 0), Vec2(0, 2), Vec2(0, 2.0), 2.0) ==
        doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("build_graph: straight-channel structure, symmetry, no SOLID crossings") {
  auto mask = straight_channel(128, 32, 1e-5, 1e-3);
  const FlowField f = uniform_field(mask, 1e-3, 0.0);
  const FlowGraph g = build_graph(f, 4, 8, 2e-3);
  REQUIRE(!g.positions.empty());
  const int n = static_cast<int>(g.positions.size());
  for (int i = 0; i < n; ++i) {
    const Vec2& p = g.positions[i];
    const bool interior = p.x() > 8 * 1e-5 && p.x() < 120 * 1e-5;
    if (interior) CHECK(g.neighbors[i].size() >= 3);
    for (int nb : g.neighbors[i]) {
      CHECK(detail::line_of_sight(*mask, p, g.positions[nb]));
      CHECK(std::find(g.neighbors[nb].begin(), g.neighbors[nb].end(), i) !=
            g.neighbors[nb].end());
    }
  }
}

TEST_CASE("build_graph: fluid pocket sealed off from the channel gives 2 components") {
  Grid<Cell> cells(32, 16, Cell::SOLID);
  for (int j = 5; j <= 14; ++j)
    for (int i = 0; i < 32; ++i) cells(i, j) = Cell::FLUID;  // main channel
  for (int j = 1; j <= 2; ++j)
    for (int i = 10; i <= 20; ++i) cells(i, j) = Cell::FLUID;  // sealed pocket
  auto mask = std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), 1e-5, BorderSegment{Edge::LEFT, 5, 14}, 1e-3,
                {BorderSegment{Edge::RIGHT, 5, 14}}));
  const FlowField f = FlowField::zeros(mask);
  const FlowGraph g = build_graph(f, 1, 8, 1e-3);
  CHECK(count_components(g) == 2);

  // Planning into the pocket must fail with NO_PATH.
  const double h = mask->pixel_size;
  CHECK_THROWS_AS(astar(g, Vec2(1.5 * h, 9.5 * h), Vec2(15.5 * h, 1.5 * h)), Error);
  try {
    astar(g, Vec2(1.5 * h, 9.5 * h), Vec2(15.5 * h, 1.5 * h));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NO_PATH);
  }
}

TEST_CASE("build_graph: k=1 on 3 collinear nodes closes to 2 neighbors in the middle") {
  Grid<Cell> cells(12, 9, Cell::SOLID);
  for (int i = 0; i < 12; ++i) cells(i, 4) = Cell::FLUID;
  auto mask = std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), 1e-5, BorderSegment{Edge::LEFT, 4, 4}, 1e-3,
                {BorderSegment{Edge::RIGHT, 4, 4}}));
  const FlowField f = FlowField::zeros(mask);
  const FlowGraph g = build_graph(f, 4, 1, 1e-3);
  REQUIRE(g.positions.size() == 3);
  // Nodes are at x-pixel 0, 4, 8 on the single FLUID row.
  int middle = -1;
  for (int i = 0; i < 3; ++i)
    if (g.positions[i].x() == doctest::Approx(4.5e-5)) middle = i;
  REQUIRE(middle >= 0);
  CHECK(g.neighbors[middle].size() == 2);
}

TEST_CASE("build_graph: parameter validation and EMPTY_GRAPH") {
  auto mask = straight_channel(32, 8, 1e-5, 1e-3);
  const FlowField f = FlowField::zeros(mask);
  CHECK_THROWS_AS(build_graph(f, 0, 8, 1e-3), Error);
  CHECK_THROWS_AS(build_graph(f, 1, 0, 1e-3), Error);
  CHECK_THROWS_AS(build_graph(f, 1, 8, 0.0), Error);
}

TEST_CASE("astar: zero flow equals the Dijkstra oracle exactly on random channels") {
  std::mt19937 rng(21);
  for (int inst = 0; inst < 8; ++inst) {
    auto mask = random_channel(rng, 32, 32, 1e-5, 1e-3, 3);
    const FlowField f = FlowField::zeros(mask);
    const FlowGraph g = build_graph(f, 2, 8, 1e-3);
    const double h = mask->pixel_size;
    const Vec2 start(0.5 * h, (mask->height / 2 + 0.5) * h);
    const Vec2 goal((mask->width - 0.5) * h, (mask->height / 2 + 0.5) * h);
    const PlanResult res = astar(g, start, goal);
    const detail::KdTree2 tree(g.positions);
    const double oracle = dijkstra_cost(g, tree.nearest(start), tree.nearest(goal));
    CHECK(res.total_cost == oracle);
  }
}

TEST_CASE("astar: with flow the cost stays within 10% of the Dijkstra optimum") {
  std::mt19937 rng(22);
  for (int inst = 0; inst < 8; ++inst) {
    auto mask = random_channel(rng, 32, 32, 1e-5, 1e-3, 3);
    const double v_max = 1e-3;
    const FlowField f = vortex_field(mask, v_max);
    const FlowGraph g = build_graph(f, 2, 8, v_max);
    const double h = mask->pixel_size;
    const Vec2 start(0.5 * h, (mask->height / 2 + 0.5) * h);
    const Vec2 goal((mask->width - 0.5) * h, (mask->height / 2 + 0.5) * h);
    const PlanResult res = astar(g, start, goal);
    const detail::KdTree2 tree(g.positions);
    const double oracle = dijkstra_cost(g, tree.nearest(start), tree.nearest(goal));
    CHECK(res.total_cost >= oracle - 1e-15);
    CHECK(res.total_cost <= 1.10 * oracle);
  }
}

TEST_CASE("astar: uniform downstream flow at half v_max halves the path cost") {
  auto mask = straight_channel(64, 16, 1e-5, 1e-3);
  const double v_max = 2e-3;
  const FlowField f = uniform_field(mask, 0.5 * v_max, 0.0);
  const FlowGraph g = build_graph(f, 2, 8, v_max);
  const double h = mask->pixel_size;
  const Vec2 start(2.5 * h, 8.5 * h);
  const Vec2 goal(60.5 * h, 8.5 * h);
  const PlanResult res = astar(g, start, goal);
  const double dist = (goal - start).norm();
  CHECK(res.total_cost == doctest::Approx(0.5 * dist).epsilon(1e-9));
  // Consecutive path nodes must be graph neighbors.
  for (size_t k = 1; k < res.node_path.size(); ++k) {
    const auto& adj = g.neighbors[res.node_path[k - 1]];
    CHECK(std::find(adj.begin(), adj.end(), res.node_path[k]) != adj.end());
  }
}

TEST_CASE("astar: start == goal returns an empty path with zero cost") {
  auto mask = straight_channel(32, 8, 1e-5, 1e-3);
  const FlowField f = FlowField::zeros(mask);
  const FlowGraph g = build_graph(f, 2, 8, 1e-3);
  const Vec2 p(4.5e-5, 4.5e-5);
  const PlanResult res = astar(g, p, p);
  CHECK(res.node_path.empty());
  CHECK(res.total_cost == 0.0);
}

TEST_CASE("astar: start far outside the lattice is rejected") {
  auto mask = straight_channel(32, 8, 1e-5, 1e-3);
  const FlowField f = FlowField::zeros(mask);
  const FlowGraph g = build_graph(f, 2, 8, 1e-3);
  CHECK_THROWS_AS(astar(g, Vec2(1.0, 1.0), Vec2(4.5e-5, 4.5e-5)), Error);
}

TEST_CASE("travel_time: straight leg in still fluid takes L/u within 2 dt") {
  auto mask = straight_channel(64, 16, 1e-5, 1e-3);
  const FlowField f = FlowField::zeros(mask);
  const double h = mask->pixel_size;
  const double u = 1e-3;
  const double dt = h / u;  // one pixel per step
  const std::vector<Vec2> path{Vec2(1.5 * h, 8.5 * h), Vec2(50.5 * h, 8.5 * h)};
  const double L = (path[1] - path[0]).norm();
  const double t = travel_time(path, f, u, dt);
  CHECK(std::abs(t - L / u) <= 2 * dt + 1e-12);
}

TEST_CASE("travel_time: upstream/downstream ratio is 2.0 +- 5% at flow u_max/3") {
  auto mask = straight_channel(64, 16, 1e-5, 1e-3);
  const double u = 1e-3;
  const FlowField f = uniform_field(mask, u / 3.0, 0.0);
  const double h = mask->pixel_size;
  const double dt = 0.05 * h / u;
  const std::vector<Vec2> down{Vec2(4.5 * h, 8.5 * h), Vec2(59.5 * h, 8.5 * h)};
  const std::vector<Vec2> up{down[1], down[0]};
  const double td = travel_time(down, f, u, dt);
  const double tu = travel_time(up, f, u, dt);
  CHECK(tu / td == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("travel_time: upstream leg against super-maximal flow is UNREACHABLE") {
  auto mask = straight_channel(64, 16, 1e-5, 1e-3);
  const double u = 1e-3;
  const FlowField f = uniform_field(mask, 2.0 * u, 0.0);
  const double h = mask->pixel_size;
  const std::vector<Vec2> up{Vec2(59.5 * h, 8.5 * h), Vec2(4.5 * h, 8.5 * h)};
  CHECK_THROWS_AS(travel_time(up, f, u, 0.1 * h / u), Error);
  try {
    travel_time(up, f, u, 0.1 * h / u);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UNREACHABLE);
  }
}

TEST_CASE("smooth_path: collinear path is unchanged") {
  auto mask = open_box(16, 16, 1e-5, 1e-3);
  const double h = mask->pixel_size;
  const std::vector<Vec2> path{Vec2(2.5 * h, 8.5 * h), Vec2(8.5 * h, 8.5 * h),
                               Vec2(14.5 * h, 8.5 * h)};
  const auto out = smooth_path(*mask, path);
  REQUIRE(out.size() == path.size());
  for (size_t i = 0; i < path.size(); ++i) {
    CHECK(out[i].x() == path[i].x());
    CHECK(out[i].y() == path[i].y());
  }
}

TEST_CASE("smooth_path: right angle in open space bends toward the chord") {
  auto mask = open_box(16, 16, 1e-5, 1e-3);
  const double h = mask->pixel_size;
  const std::vector<Vec2> path{Vec2(2.5 * h, 2.5 * h), Vec2(2.5 * h, 10.5 * h),
                               Vec2(10.5 * h, 10.5 * h)};
  const Vec2 chord_mid = 0.5 * (path.front() + path.back());
  const auto out = smooth_path(*mask, path);
  CHECK(out.front() == path.front());
  CHECK(out.back() == path.back());
  CHECK((out[1] - chord_mid).norm() < (path[1] - chord_mid).norm());
}

TEST_CASE("smooth_path: corner hugging SOLID stays put") {
  // L-shaped corridor; the inner block forbids any straightening.
  Grid<Cell> cells(16, 16, Cell::SOLID);
  for (int j = 0; j < 15; ++j)
    for (int i = 1; i <= 2; ++i) cells(i, j) = Cell::FLUID;  // vertical arm
  for (int i = 1; i < 16; ++i)
    for (int j = 13; j <= 14; ++j) cells(i, j) = Cell::FLUID;  // horizontal arm
  auto mask = std::make_shared<const ChannelMask>(
      make_mask(std::move(cells), 1e-5, BorderSegment{Edge::TOP, 1, 2}, 1e-3,
                {BorderSegment{Edge::RIGHT, 13, 14}}));
  const double h = mask->pixel_size;
  const std::vector<Vec2> path{Vec2(2.5 * h, 1.5 * h), Vec2(2.5 * h, 13.5 * h),
                               Vec2(14.5 * h, 13.5 * h)};
  const auto out = smooth_path(*mask, path);
  for (size_t i = 0; i < path.size(); ++i) {
    CHECK(out[i].x() == path[i].x());
    CHECK(out[i].y() == path[i].y());
  }
}
