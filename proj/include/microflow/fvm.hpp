#pragma once

#include <array>
#include <fstream>
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "microflow/core.hpp"
#include "microflow/field.hpp"
#include "microflow/mask.hpp"

namespace microflow {

struct SolverConfig {
  int max_outer_iters = 5000;
  double tol_continuity = 1e-6;  // RMS mass imbalance / inlet flux
  double relax_u = 0.7;
  double relax_p = 0.3;

  void validate() const {
    if (relax_u <= 0 || relax_u > 1 || relax_p <= 0 || relax_p > 1)
      throw Error(ErrorCode::INVALID_ARGUMENT, "under-relaxation factors must be in (0,1]");
    if (tol_continuity <= 0 || max_outer_iters < 1)
      throw Error(ErrorCode::INVALID_ARGUMENT, "bad solver config");
  }
};

struct ResidualReport {
  double continuity_l2 = 0.0;
  double momentum_x_l2 = 0.0;
  double momentum_y_l2 = 0.0;
  int iters_used = 0;
  bool converged = false;
  // Per-outer-iteration residual history (continuity, momx, momy).
  std::vector<std::array<double, 3>> history;
};

inline void save_residual_csv(const ResidualReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << "iter,continuity,momx,momy\n";
  out.precision(17);
  for (size_t i = 0; i < r.history.size(); ++i)
    out << i << ',' << r.history[i][0] << ',' << r.history[i][1] << ',' << r.history[i][2]
        << '\n';
}

namespace detail {

enum class FaceKind : uint8_t { FIXED, INTERIOR, OUTLET };

/// Staggered (MAC) layout over a ChannelMask: u on vertical faces
/// ((W+1) x H), v on horizontal faces (W x (H+1)), p on cells.
struct Staggered {
  const ChannelMask* m = nullptr;
  int W = 0, H = 0;
  Grid<FaceKind> u_kind, v_kind;
  GridD u, v, p;
  GridD apu, apv;               // relaxed central momentum coefficients
  Grid<uint8_t> p_fixed;        // outlet cells carry reference pressure 0
  double inlet_flux = 0.0;      // rho * h * sum of inlet face speeds

  explicit Staggered(const ChannelMask& mask, double rho) : m(&mask) {
    W = mask.width;
    H = mask.height;
    u_kind = Grid<FaceKind>(W + 1, H, FaceKind::FIXED);
    v_kind = Grid<FaceKind>(W, H + 1, FaceKind::FIXED);
    u = GridD(W + 1, H, 0.0);
    v = GridD(W, H + 1, 0.0);
    p = GridD(W, H, 0.0);
    apu = GridD(W + 1, H, 1.0);
    apv = GridD(W, H + 1, 1.0);
    p_fixed = Grid<uint8_t>(W, H, 0);
    classify();
    apply_inlet_profile(rho);
  }

  bool fluid(int i, int j) const { return m->fluid(i, j); }

  bool in_segment(const BorderSegment& s, Edge edge, int along) const {
    return s.edge == edge && along >= std::min(s.from, s.to) && along <= std::max(s.from, s.to);
  }

  bool is_outlet(Edge edge, int along) const {
    for (const auto& s : m->outlets)
      if (in_segment(s, edge, along)) return true;
    return false;
  }

  void classify() {
    for (int j = 0; j < H; ++j)
      for (int i = 0; i <= W; ++i) {
        const bool fl = fluid(i - 1, j), fr = fluid(i, j);
        if (fl && fr) {
          u_kind(i, j) = FaceKind::INTERIOR;
        } else if (i == 0 && fr) {
          if (in_segment(m->inlet, Edge::LEFT, j))
            u_kind(i, j) = FaceKind::FIXED;  // value set by apply_inlet_profile
          else if (is_outlet(Edge::LEFT, j))
            u_kind(i, j) = FaceKind::OUTLET;
        } else if (i == W && fl) {
          if (in_segment(m->inlet, Edge::RIGHT, j))
            u_kind(i, j) = FaceKind::FIXED;
          else if (is_outlet(Edge::RIGHT, j))
            u_kind(i, j) = FaceKind::OUTLET;
        }
      }
    for (int j = 0; j <= H; ++j)
      for (int i = 0; i < W; ++i) {
        const bool fb = fluid(i, j - 1), ff = fluid(i, j);
        if (fb && ff) {
          v_kind(i, j) = FaceKind::INTERIOR;
        } else if (j == 0 && ff) {
          if (in_segment(m->inlet, Edge::TOP, i))
            v_kind(i, j) = FaceKind::FIXED;
          else if (is_outlet(Edge::TOP, i))
            v_kind(i, j) = FaceKind::OUTLET;
        } else if (j == H && fb) {
          if (in_segment(m->inlet, Edge::BOTTOM, i))
            v_kind(i, j) = FaceKind::FIXED;
          else if (is_outlet(Edge::BOTTOM, i))
            v_kind(i, j) = FaceKind::OUTLET;
        }
      }
    // Outlet cells hold the pressure reference.
    for (int idx : m->outlet_pixels) p_fixed.data()[idx] = 1;
  }

  /// Parabolic inlet profile, discretely normalized to mean v_inlet.
  void apply_inlet_profile(double rho) {
    const double h = m->pixel_size;
    const BorderSegment& s = m->inlet;
    const int lo = std::min(s.from, s.to), hi = std::max(s.from, s.to);
    const double span = (hi - lo + 1);
    std::vector<double> prof(hi - lo + 1);
    double sum = 0;
    for (int c = lo; c <= hi; ++c) {
      const double xi = (c - lo + 0.5) / span;
      prof[c - lo] = 6.0 * m->v_inlet * xi * (1.0 - xi);
      sum += prof[c - lo];
    }
    const double scale = m->v_inlet * span / sum;
    for (double& pv : prof) pv *= scale;

    inlet_flux = 0.0;
    for (int c = lo; c <= hi; ++c) {
      const double speed = prof[c - lo];
      switch (s.edge) {
        case Edge::LEFT: u(0, c) = speed; break;
        case Edge::RIGHT: u(W, c) = -speed; break;
        case Edge::TOP: v(c, 0) = speed; break;
        case Edge::BOTTOM: v(c, H) = -speed; break;
      }
      inlet_flux += rho * h * speed;
    }
  }

  /// Outward flux sign convention for an outlet face on a given edge.
  static double outward(Edge e, double face_value) {
    switch (e) {
      case Edge::LEFT: return -face_value;
      case Edge::RIGHT: return face_value;
      case Edge::TOP: return -face_value;
      case Edge::BOTTOM: return face_value;
    }
    return 0;
  }

  struct OutletFace {
    bool is_u;
    int i, j;
    Edge edge;
  };

  std::vector<OutletFace> outlet_faces() const {
    std::vector<OutletFace> out;
    for (int j = 0; j < H; ++j) {
      if (u_kind(0, j) == FaceKind::OUTLET) out.push_back({true, 0, j, Edge::LEFT});
      if (u_kind(W, j) == FaceKind::OUTLET) out.push_back({true, W, j, Edge::RIGHT});
    }
    for (int i = 0; i < W; ++i) {
      if (v_kind(i, 0) == FaceKind::OUTLET) out.push_back({false, i, 0, Edge::TOP});
      if (v_kind(i, H) == FaceKind::OUTLET) out.push_back({false, i, H, Edge::BOTTOM});
    }
    return out;
  }

  /// Zero-gradient outlet extrapolation followed by a global scaling that
  /// makes total outflow equal the inlet flux exactly.
  void update_outlets(double rho) {
    const double h = m->pixel_size;
    auto faces = outlet_faces();
    if (faces.empty()) return;
    double raw = 0;
    for (const auto& f : faces) {
      double neigh;
      if (f.is_u)
        neigh = (f.edge == Edge::LEFT) ? u(1, f.j) : u(W - 1, f.j);
      else
        neigh = (f.edge == Edge::TOP) ? v(f.i, 1) : v(f.i, H - 1);
      if (f.is_u)
        u(f.i, f.j) = neigh;
      else
        v(f.i, f.j) = neigh;
      raw += rho * h * outward(f.edge, f.is_u ? u(f.i, f.j) : v(f.i, f.j));
    }
    if (raw > 1e-12 * std::max(inlet_flux, 1e-300)) {
      const double scale = inlet_flux / raw;
      for (const auto& f : faces) {
        if (f.is_u)
          u(f.i, f.j) *= scale;
        else
          v(f.i, f.j) *= scale;
      }
    } else {
      const double uniform = inlet_flux / (rho * h * faces.size());
      for (const auto& f : faces) {
        const double val = (f.edge == Edge::LEFT || f.edge == Edge::TOP) ? -uniform : uniform;
        if (f.is_u)
          u(f.i, f.j) = val;
        else
          v(f.i, f.j) = val;
      }
    }
  }
};

struct FaceEq {
  double aP = 0;                       // unrelaxed central coefficient
  std::array<double, 4> anb{};         // W, E, S, N
  std::array<std::array<int, 2>, 4> nb{};  // neighbor face indices
  std::array<bool, 4> nb_interior{};
  double rhs = 0;  // pressure source + known-neighbor contributions
};

/// Upwind/central momentum coefficients for one interior u face.
inline FaceEq u_face_eq(const Staggered& s, const FluidProps& props, int i, int j) {
  const double h = s.m->pixel_size;
  const double mu = props.nu;
  const double rhoh = props.rho * h;
  const double Fe = rhoh * 0.5 * (s.u(i, j) + s.u(i + 1, j));
  const double Fw = rhoh * 0.5 * (s.u(i - 1, j) + s.u(i, j));
  const double Fn = rhoh * 0.5 * (s.v(i - 1, j + 1) + s.v(i, j + 1));
  const double Fs = rhoh * 0.5 * (s.v(i - 1, j) + s.v(i, j));

  FaceEq eq;
  const bool wall_n = !s.fluid(i - 1, j + 1) && !s.fluid(i, j + 1);
  const bool wall_s = !s.fluid(i - 1, j - 1) && !s.fluid(i, j - 1);
  const double aW = mu + std::max(Fw, 0.0);
  const double aE = mu + std::max(-Fe, 0.0);
  const double aS = wall_s ? 2.0 * mu : mu + std::max(Fs, 0.0);
  const double aN = wall_n ? 2.0 * mu : mu + std::max(-Fn, 0.0);
  eq.anb = {aW, aE, aS, aN};
  eq.nb = {{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
  for (int d = 0; d < 4; ++d) {
    const auto [ni, nj] = eq.nb[d];
    const bool tangential_wall = (d >= 2) && (nj < 0 || nj >= s.H || ((d == 2) ? wall_s : wall_n));
    if (!tangential_wall && s.u_kind.contains(ni, nj) &&
        s.u_kind(ni, nj) == FaceKind::INTERIOR) {
      eq.nb_interior[d] = true;
    } else {
      const double val = (!tangential_wall && s.u_kind.contains(ni, nj)) ? s.u(ni, nj) : 0.0;
      eq.rhs += eq.anb[d] * val;
    }
  }
  eq.aP = aW + aE + aS + aN + (Fe - Fw + Fn - Fs);
  eq.rhs += (s.p(i - 1, j) - s.p(i, j)) * h;
  return eq;
}

inline FaceEq v_face_eq(const Staggered& s, const FluidProps& props, int i, int j) {
  const double h = s.m->pixel_size;
  const double mu = props.nu;
  const double rhoh = props.rho * h;
  const double Fe = rhoh * 0.5 * (s.u(i + 1, j - 1) + s.u(i + 1, j));
  const double Fw = rhoh * 0.5 * (s.u(i, j - 1) + s.u(i, j));
  const double Fn = rhoh * 0.5 * (s.v(i, j) + s.v(i, j + 1));
  const double Fs = rhoh * 0.5 * (s.v(i, j - 1) + s.v(i, j));

  FaceEq eq;
  const bool wall_e = !s.fluid(i + 1, j - 1) && !s.fluid(i + 1, j);
  const bool wall_w = !s.fluid(i - 1, j - 1) && !s.fluid(i - 1, j);
  const double aW = wall_w ? 2.0 * mu : mu + std::max(Fw, 0.0);
  const double aE = wall_e ? 2.0 * mu : mu + std::max(-Fe, 0.0);
  const double aS = mu + std::max(Fs, 0.0);
  const double aN = mu + std::max(-Fn, 0.0);
  eq.anb = {aW, aE, aS, aN};
  eq.nb = {{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
  for (int d = 0; d < 4; ++d) {
    const auto [ni, nj] = eq.nb[d];
    const bool tangential_wall = (d < 2) && (ni < 0 || ni >= s.W || ((d == 0) ? wall_w : wall_e));
    if (!tangential_wall && s.v_kind.contains(ni, nj) &&
        s.v_kind(ni, nj) == FaceKind::INTERIOR) {
      eq.nb_interior[d] = true;
    } else {
      const double val = (!tangential_wall && s.v_kind.contains(ni, nj)) ? s.v(ni, nj) : 0.0;
      eq.rhs += eq.anb[d] * val;
    }
  }
  eq.aP = aW + aE + aS + aN + (Fe - Fw + Fn - Fs);
  eq.rhs += (s.p(i, j - 1) - s.p(i, j)) * h;
  return eq;
}

/// RMS mass imbalance over fluid cells divided by the inlet flux.
inline double continuity_rms(const Staggered& s, double rho) {
  const double h = s.m->pixel_size;
  double ss = 0;
  int count = 0;
  for (int j = 0; j < s.H; ++j)
    for (int i = 0; i < s.W; ++i) {
      if (!s.fluid(i, j)) continue;
      const double b =
          rho * h * (s.u(i + 1, j) - s.u(i, j) + s.v(i, j + 1) - s.v(i, j));
      ss += b * b;
      ++count;
    }
  if (count == 0) return 0;
  return std::sqrt(ss / count) / std::max(s.inlet_flux, 1e-300);
}

}  // namespace detail

/// Steady incompressible solve on the masked grid: staggered SIMPLE with
/// first-order upwind convection and central diffusion. Returns collocated
/// per-pixel maps (face averages) plus the residual report.
inline std::pair<FlowField, ResidualReport> solve_steady(
    const std::shared_ptr<const ChannelMask>& mask_ptr, const FluidProps& props,
    const SolverConfig& cfg = {}) {
  cfg.validate();
  props.validate();
  const ChannelMask& mask = *mask_ptr;
  validate_mask(mask);
  using namespace detail;
  Staggered s(mask, props.rho);
  s.update_outlets(props.rho);
  const double h = mask.pixel_size;
  const double mom_scale = std::max(s.inlet_flux * mask.v_inlet, 1e-300);

  // Compact unknown numbering.
  Grid<int> u_id(s.W + 1, s.H, -1), v_id(s.W, s.H + 1, -1), p_id(s.W, s.H, -1);
  int nu_ = 0, nv_ = 0, np_ = 0;
  for (int j = 0; j < s.H; ++j)
    for (int i = 0; i <= s.W; ++i)
      if (s.u_kind(i, j) == FaceKind::INTERIOR) u_id(i, j) = nu_++;
  for (int j = 0; j <= s.H; ++j)
    for (int i = 0; i < s.W; ++i)
      if (s.v_kind(i, j) == FaceKind::INTERIOR) v_id(i, j) = nv_++;
  for (int j = 0; j < s.H; ++j)
    for (int i = 0; i < s.W; ++i)
      if (s.fluid(i, j) && !s.p_fixed(i, j)) p_id(i, j) = np_++;

  ResidualReport report;
  double init_cont = -1, init_momx = -1, init_momy = -1;

  using Sp = Eigen::SparseMatrix<double>;
  using Trip = Eigen::Triplet<double>;

  auto solve_momentum = [&](bool is_u) -> double {
    const int n = is_u ? nu_ : nv_;
    if (n == 0) return 0.0;
    std::vector<Trip> trips;
    trips.reserve(n * 5);
    Eigen::VectorXd rhs(n), x0(n);
    const int Wf = is_u ? s.W + 1 : s.W;
    const int Hf = is_u ? s.H : s.H + 1;
    double res_ss = 0;
    for (int j = 0; j < Hf; ++j)
      for (int i = 0; i < Wf; ++i) {
        const int row = is_u ? u_id(i, j) : v_id(i, j);
        if (row < 0) continue;
        const FaceEq eq = is_u ? u_face_eq(s, props, i, j) : v_face_eq(s, props, i, j);
        const double relax = cfg.relax_u;
        const double aP_rel = eq.aP / relax;
        const double old = is_u ? s.u(i, j) : s.v(i, j);
        double r = eq.rhs - eq.aP * old;
        trips.emplace_back(row, row, aP_rel);
        for (int d = 0; d < 4; ++d) {
          if (!eq.nb_interior[d]) continue;
          const auto [ni, nj] = eq.nb[d];
          const int col = is_u ? u_id(ni, nj) : v_id(ni, nj);
          trips.emplace_back(row, col, -eq.anb[d]);
          r += eq.anb[d] * (is_u ? s.u(ni, nj) : s.v(ni, nj));
        }
        res_ss += r * r;
        rhs(row) = eq.rhs + (1.0 - relax) * aP_rel * old;
        x0(row) = old;
        if (is_u)
          s.apu(i, j) = aP_rel;
        else
          s.apv(i, j) = aP_rel;
      }
    Sp A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::BiCGSTAB<Sp> solver;
    solver.setTolerance(1e-10);
    solver.setMaxIterations(1000);
    solver.compute(A);
    Eigen::VectorXd x = solver.solveWithGuess(rhs, x0);
    if (!x.allFinite()) throw Error(ErrorCode::DIVERGED, "momentum solve produced non-finite values");
    for (int j = 0; j < Hf; ++j)
      for (int i = 0; i < Wf; ++i) {
        const int row = is_u ? u_id(i, j) : v_id(i, j);
        if (row < 0) continue;
        if (is_u)
          s.u(i, j) = x(row);
        else
          s.v(i, j) = x(row);
      }
    return std::sqrt(res_ss / n) / mom_scale;
  };

  Eigen::SimplicialLDLT<Sp> p_solver;
  bool p_pattern_ready = false;
  Sp Ap(np_, np_);

  auto pressure_correct = [&]() {
    if (np_ == 0) return;
    std::vector<Trip> trips;
    trips.reserve(np_ * 5);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(np_);
    const double rhoh = props.rho * h;
    for (int j = 0; j < s.H; ++j)
      for (int i = 0; i < s.W; ++i) {
        const int row = p_id(i, j);
        if (row < 0) continue;
        double diag = 0;
        b(row) = -rhoh * (s.u(i + 1, j) - s.u(i, j) + s.v(i, j + 1) - s.v(i, j));
        struct FaceRef {
          bool is_u;
          int fi, fj, ci, cj;
        };
        const FaceRef faces[4] = {{true, i, j, i - 1, j},
                                  {true, i + 1, j, i + 1, j},
                                  {false, i, j, i, j - 1},
                                  {false, i, j + 1, i, j + 1}};
        for (const auto& f : faces) {
          const FaceKind kind = f.is_u ? s.u_kind(f.fi, f.fj) : s.v_kind(f.fi, f.fj);
          if (kind != FaceKind::INTERIOR) continue;
          const double ap = f.is_u ? s.apu(f.fi, f.fj) : s.apv(f.fi, f.fj);
          const double coeff = rhoh * h / ap;
          diag += coeff;
          const int col = p_id(f.ci, f.cj);
          if (col >= 0)
            trips.emplace_back(row, col, -coeff);
          // fixed-pressure neighbor keeps p' = 0, contributes only to diag
        }
        if (diag == 0) diag = 1.0;  // isolated cell, pin its correction
        trips.emplace_back(row, row, diag);
      }
    Ap.setFromTriplets(trips.begin(), trips.end());
    if (!p_pattern_ready) {
      p_solver.analyzePattern(Ap);
      p_pattern_ready = true;
    }
    p_solver.factorize(Ap);
    if (p_solver.info() != Eigen::Success)
      throw Error(ErrorCode::DIVERGED, "pressure-correction factorization failed");
    Eigen::VectorXd pc = p_solver.solve(b);
    if (!pc.allFinite()) throw Error(ErrorCode::DIVERGED, "pressure correction non-finite");

    auto pcv = [&](int ci, int cj) {
      const int id = (ci >= 0 && ci < s.W && cj >= 0 && cj < s.H) ? p_id(ci, cj) : -1;
      return id >= 0 ? pc(id) : 0.0;
    };
    for (int j = 0; j < s.H; ++j)
      for (int i = 0; i <= s.W; ++i)
        if (s.u_kind(i, j) == FaceKind::INTERIOR)
          s.u(i, j) += h / s.apu(i, j) * (pcv(i - 1, j) - pcv(i, j));
    for (int j = 0; j <= s.H; ++j)
      for (int i = 0; i < s.W; ++i)
        if (s.v_kind(i, j) == FaceKind::INTERIOR)
          s.v(i, j) += h / s.apv(i, j) * (pcv(i, j - 1) - pcv(i, j));
    for (int j = 0; j < s.H; ++j)
      for (int i = 0; i < s.W; ++i)
        if (p_id(i, j) >= 0) s.p(i, j) += cfg.relax_p * pc(p_id(i, j));
  };

  for (int it = 0; it < cfg.max_outer_iters; ++it) {
    const double rx = solve_momentum(true);
    const double ry = solve_momentum(false);
    s.update_outlets(props.rho);
    const double rc = continuity_rms(s, props.rho);
    pressure_correct();

    report.history.push_back({rc, rx, ry});
    report.continuity_l2 = rc;
    report.momentum_x_l2 = rx;
    report.momentum_y_l2 = ry;
    report.iters_used = it + 1;
    // Initial values latch onto the first nonzero residual of each channel.
    if (init_cont < 0 && rc > 0) init_cont = rc;
    if (init_momx < 0 && rx > 0) init_momx = rx;
    if (init_momy < 0 && ry > 0) init_momy = ry;
    if (!std::isfinite(rc) || !std::isfinite(rx) || !std::isfinite(ry) ||
        (init_cont > 0 && rc > 1e6 * init_cont) ||
        (init_momx > 0 && rx > 1e6 * init_momx) ||
        (init_momy > 0 && ry > 1e6 * init_momy))
      throw Error(ErrorCode::DIVERGED, "residual exceeded 1e6 x initial");
    if (rc <= cfg.tol_continuity && it > 0) {
      report.converged = true;
      break;
    }
  }

  // Collocated output: face averages on FLUID cells, exact zero on SOLID.
  FlowField f = FlowField::zeros(mask_ptr);
  for (int j = 0; j < s.H; ++j)
    for (int i = 0; i < s.W; ++i) {
      if (!s.fluid(i, j)) continue;
      f.vx(i, j) = 0.5 * (s.u(i, j) + s.u(i + 1, j));
      f.vy(i, j) = 0.5 * (s.v(i, j) + s.v(i, j + 1));
      f.p(i, j) = s.p(i, j);
    }
  return {std::move(f), std::move(report)};
}

/// Evaluates the discrete FVM equations at a given collocated field: the
/// staggered face values are reconstructed by averaging, boundary faces take
/// their boundary values, and the unrelaxed equation imbalances are reported
/// with the same normalization the solver uses.
inline ResidualReport algebraic_residual(const FlowField& field, const ChannelMask& mask,
                                         const FluidProps& props) {
  field.check_conforms(mask);
  using namespace detail;
  Staggered s(mask, props.rho);
  const double h = mask.pixel_size;
  for (int j = 0; j < s.H; ++j)
    for (int i = 1; i < s.W; ++i)
      if (s.u_kind(i, j) == FaceKind::INTERIOR)
        s.u(i, j) = 0.5 * (field.vx(i - 1, j) + field.vx(i, j));
  for (int j = 1; j < s.H; ++j)
    for (int i = 0; i < s.W; ++i)
      if (s.v_kind(i, j) == FaceKind::INTERIOR)
        s.v(i, j) = 0.5 * (field.vy(i, j - 1) + field.vy(i, j));
  for (int j = 0; j < s.H; ++j)
    for (int i = 0; i < s.W; ++i)
      if (s.fluid(i, j)) s.p(i, j) = field.p(i, j);
  s.update_outlets(props.rho);

  const double mom_scale = std::max(s.inlet_flux * std::abs(mask.v_inlet), 1e-300);
  ResidualReport rep;
  double sx = 0, sy = 0;
  int cx = 0, cy = 0;
  for (int j = 0; j < s.H; ++j)
    for (int i = 0; i <= s.W; ++i) {
      if (s.u_kind(i, j) != FaceKind::INTERIOR) continue;
      const FaceEq eq = u_face_eq(s, props, i, j);
      double r = eq.rhs - eq.aP * s.u(i, j);
      for (int d = 0; d < 4; ++d)
        if (eq.nb_interior[d]) r += eq.anb[d] * s.u(eq.nb[d][0], eq.nb[d][1]);
      sx += r * r;
      ++cx;
    }
  for (int j = 0; j <= s.H; ++j)
    for (int i = 0; i < s.W; ++i) {
      if (s.v_kind(i, j) != FaceKind::INTERIOR) continue;
      const FaceEq eq = v_face_eq(s, props, i, j);
      double r = eq.rhs - eq.aP * s.v(i, j);
      for (int d = 0; d < 4; ++d)
        if (eq.nb_interior[d]) r += eq.anb[d] * s.v(eq.nb[d][0], eq.nb[d][1]);
      sy += r * r;
      ++cy;
    }
  rep.continuity_l2 = continuity_rms(s, props.rho);
  rep.momentum_x_l2 = cx ? std::sqrt(sx / cx) / mom_scale : 0.0;
  rep.momentum_y_l2 = cy ? std::sqrt(sy / cy) / mom_scale : 0.0;
  rep.iters_used = 0;
  rep.converged = true;
  return rep;
}

}  // namespace microflow
