#pragma once

#include <algorithm>
#include <functional>
#include <fstream>
#include <limits>
#include <memory>
#include <vector>

#include "microflow/control.hpp"
#include "microflow/core.hpp"
#include "microflow/field.hpp"

namespace microflow {

/// Flow evaluated at continuous positions: either an affine analytic field
/// v = A x + c or a gridded FlowField (clamped bilinear sampling).
class FlowSource {
 public:
  static FlowSource analytic_linear(const Eigen::Matrix2d& A, const Vec2& c = Vec2::Zero()) {
    FlowSource s;
    s.fn_ = [A, c](const Vec2& x) -> Vec2 { return A * x + c; };
    return s;
  }

  static FlowSource grid(std::shared_ptr<const FlowField> field) {
    FlowSource s;
    const double W = field->width() * field->pixel_size;
    const double H = field->height() * field->pixel_size;
    s.fn_ = [field, W, H](const Vec2& x) -> Vec2 {
      const Vec2 clamped(std::clamp(x.x(), 0.0, W), std::clamp(x.y(), 0.0, H));
      return sample_velocity(*field, clamped);
    };
    return s;
  }

  static FlowSource custom(std::function<Vec2(const Vec2&)> fn) {
    FlowSource s;
    s.fn_ = std::move(fn);
    return s;
  }

  Vec2 operator()(const Vec2& x) const { return fn_(x); }

 private:
  std::function<Vec2(const Vec2&)> fn_;
};

enum class ControllerVariant { FF_FB_FLOW_COMP, FF_FB_NO_COMP, FF_FB_OBSERVER };

inline const char* to_string(ControllerVariant v) {
  switch (v) {
    case ControllerVariant::FF_FB_FLOW_COMP: return "flow_comp";
    case ControllerVariant::FF_FB_NO_COMP: return "no_comp";
    case ControllerVariant::FF_FB_OBSERVER: return "observer";
  }
  return "?";
}

/// Uniform-dt time series of robot state, reference, inputs, and observer
/// estimates.
struct SimTrace {
  double dt = 0.0;
  std::vector<double> t;
  std::vector<Vec2> x, x_d, e, v_true, v_hat;
  std::vector<double> u, phi;

  size_t size() const { return t.size(); }
};

using ReferenceFn = std::function<Reference(double)>;

inline ReferenceFn make_lemniscate_ref(double period, double a, double b) {
  return [=](double t) { return ref_lemniscate(t, period, a, b); };
}

/// Closed-loop explicit-Euler simulation of the kinematic model. The plant
/// always sees the true flow; the controller sees the true flow, zero, or
/// the observer estimate depending on the variant.
inline SimTrace simulate_tracking(ControllerVariant variant, const FlowSource& flow,
                                  const ReferenceFn& ref_fn, const Gains& gains,
                                  const Vec2& x0, double duration, double dt,
                                  double u_cap = std::numeric_limits<double>::infinity()) {
  if (duration <= 0 || dt <= 0 || dt > duration)
    throw Error(ErrorCode::INVALID_ARGUMENT, "need 0 < dt <= duration");
  gains.validate();

  RobotState state{x0, 0.0};
  ObserverState obs;
  obs.x_hat = x0;
  obs.L_p = gains.L_p;
  double prev_phi = ref_fn(0.0).phi_d;

  const int n_steps = static_cast<int>(std::llround(duration / dt));
  SimTrace trace;
  trace.dt = dt;
  for (int k = 0; k <= n_steps; ++k) {
    const double t = k * dt;
    const Reference ref = ref_fn(t);
    const Vec2 v_true = flow(state.x);
    Vec2 v_ctrl;
    switch (variant) {
      case ControllerVariant::FF_FB_FLOW_COMP: v_ctrl = v_true; break;
      case ControllerVariant::FF_FB_NO_COMP: v_ctrl = Vec2::Zero(); break;
      case ControllerVariant::FF_FB_OBSERVER: v_ctrl = obs.v_hat; break;
    }
    ControlInput input = control_step(state, ref, v_ctrl, gains, prev_phi, dt);
    if (input.u > u_cap) {
      // Actuation limit: the magnetic drive saturates at u_cap self-speed.
      input.u = u_cap;
      input.f_rot = input.u / gains.k_f;
    }
    prev_phi = input.phi;

    trace.t.push_back(t);
    trace.x.push_back(state.x);
    trace.x_d.push_back(ref.x_d);
    trace.e.push_back(ref.x_d - state.x - v_ctrl * dt);
    trace.v_true.push_back(v_true);
    trace.v_hat.push_back(obs.v_hat);
    trace.u.push_back(input.u);
    trace.phi.push_back(input.phi);

    if (k == n_steps) break;
    const Vec2 u_vec(std::cos(input.phi) * input.u, std::sin(input.phi) * input.u);
    state.x += (u_vec + v_true) * dt;
    state.timestamp = (k + 1) * dt;
    if (!state.x.allFinite())
      throw Error(ErrorCode::NON_FINITE, "simulation state became non-finite");
    obs = observer_step(obs, state.x, input, dt);
  }
  return trace;
}

struct NavResult {
  SimTrace trace;
  double arrival_time = 0.0;
};

/// Navigation run: the (smoothed) plan path is time-parameterized at
/// commanded self-speed u_max with the local along-path flow added, then
/// tracked closed-loop. Arrival is within two pixels of the goal.
inline NavResult simulate_navigation(const std::vector<Vec2>& path, const FlowSource& flow,
                                     const Gains& gains, double u_max, double dt,
                                     double goal_radius) {
  if (path.size() < 2) throw Error(ErrorCode::INVALID_ARGUMENT, "plan path too short");
  if (u_max <= 0 || dt <= 0 || goal_radius <= 0)
    throw Error(ErrorCode::INVALID_ARGUMENT, "bad navigation parameters");

  // Arc-length samples along the path.
  std::vector<Vec2> pts;
  std::vector<double> arc;
  double length = 0;
  for (size_t i = 1; i < path.size(); ++i) length += (path[i] - path[i - 1]).norm();
  const double ds = std::max(length / 2000.0, 1e-12);
  for (size_t i = 1; i < path.size(); ++i) {
    const Vec2 seg = path[i] - path[i - 1];
    const double seg_len = seg.norm();
    const int n = std::max(1, static_cast<int>(std::ceil(seg_len / ds)));
    for (int q = (i == 1 ? 0 : 1); q <= n; ++q)
      pts.push_back(path[i - 1] + seg * (static_cast<double>(q) / n));
  }
  arc.resize(pts.size(), 0.0);
  for (size_t i = 1; i < pts.size(); ++i)
    arc[i] = arc[i - 1] + (pts[i] - pts[i - 1]).norm();

  // Nominal schedule: ground speed = u_max plus the along-path flow,
  // floored to keep the parameterization finite.
  std::vector<double> sched(pts.size(), 0.0);
  const double floor_speed = 0.01 * u_max;
  for (size_t i = 1; i < pts.size(); ++i) {
    const Vec2 tang = (pts[i] - pts[i - 1]).normalized();
    const double ground = std::max(floor_speed, u_max + flow(pts[i - 1]).dot(tang));
    sched[i] = sched[i - 1] + (arc[i] - arc[i - 1]) / ground;
  }
  const double nominal_time = sched.back();

  ReferenceFn ref_fn = [pts, arc, sched, u_max](double t) {
    Reference r;
    const auto it = std::lower_bound(sched.begin(), sched.end(), t);
    if (it == sched.end()) {
      r.x_d = pts.back();
      r.xdot_d = Vec2::Zero();
      r.phi_d = 0.0;
      return r;
    }
    const size_t i = std::max<size_t>(1, it - sched.begin());
    const double t0 = sched[i - 1], t1 = sched[i];
    const double w = (t1 > t0) ? (t - t0) / (t1 - t0) : 0.0;
    r.x_d = pts[i - 1] + (pts[i] - pts[i - 1]) * std::clamp(w, 0.0, 1.0);
    const double speed = (arc[i] - arc[i - 1]) / std::max(t1 - t0, 1e-300);
    r.xdot_d = (pts[i] - pts[i - 1]).normalized() * speed;
    r.phi_d = std::atan2(r.xdot_d.y(), r.xdot_d.x());
    return r;
  };

  const double budget = 3.0 * nominal_time + 100.0 * dt;
  NavResult res;
  res.trace = simulate_tracking(ControllerVariant::FF_FB_FLOW_COMP, flow, ref_fn, gains,
                                path.front(), budget, dt, u_max);
  for (size_t k = 0; k < res.trace.size(); ++k) {
    if ((res.trace.x[k] - path.back()).norm() <= goal_radius) {
      res.arrival_time = res.trace.t[k];
      // Trim the trace at arrival.
      res.trace.t.resize(k + 1);
      res.trace.x.resize(k + 1);
      res.trace.x_d.resize(k + 1);
      res.trace.e.resize(k + 1);
      res.trace.v_true.resize(k + 1);
      res.trace.v_hat.resize(k + 1);
      res.trace.u.resize(k + 1);
      res.trace.phi.resize(k + 1);
      return res;
    }
  }
  throw Error(ErrorCode::NOT_ARRIVED, "goal not reached within time budget");
}

struct TrackingMetrics {
  double rms_error = 0.0;      // over the second half of the run
  double final_error = 0.0;
  double settling_time = std::numeric_limits<double>::infinity();
  double mean_speed = 0.0;
};

inline TrackingMetrics metrics(const SimTrace& trace, double settle_eps) {
  if (trace.size() == 0) throw Error(ErrorCode::INVALID_ARGUMENT, "empty trace");
  TrackingMetrics out;
  const size_t n = trace.size();
  const size_t half = n / 2;
  double ss = 0;
  for (size_t k = half; k < n; ++k) ss += trace.e[k].squaredNorm();
  out.rms_error = std::sqrt(ss / (n - half));
  out.final_error = trace.e.back().norm();
  double us = 0;
  for (double u : trace.u) us += u;
  out.mean_speed = us / n;
  // First time after which the error stays below settle_eps.
  size_t first_bad_after = n;
  for (size_t k = n; k-- > 0;) {
    if (trace.e[k].norm() >= settle_eps) break;
    first_bad_after = k;
  }
  if (first_bad_after < n) out.settling_time = trace.t[first_bad_after];
  return out;
}

inline void save_trace_csv(const SimTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::BAD_FORMAT, "cannot open " + path + " for writing");
  out << "t,x,y,xd,yd,ex,ey,u,phi,vtx,vty,vhx,vhy\n";
  out.precision(17);
  for (size_t k = 0; k < trace.size(); ++k)
    out << trace.t[k] << ',' << trace.x[k].x() << ',' << trace.x[k].y() << ','
        << trace.x_d[k].x() << ',' << trace.x_d[k].y() << ',' << trace.e[k].x() << ','
        << trace.e[k].y() << ',' << trace.u[k] << ',' << trace.phi[k] << ','
        << trace.v_true[k].x() << ',' << trace.v_true[k].y() << ',' << trace.v_hat[k].x()
        << ',' << trace.v_hat[k].y() << '\n';
}

}  // namespace microflow
