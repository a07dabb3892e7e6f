#pragma once

#include <cmath>

#include "microflow/core.hpp"

namespace microflow {

struct RobotState {
  Vec2 x = Vec2::Zero();      // meters
  double timestamp = 0.0;     // seconds
};

/// Rotating-field drive input: forward speed, yaw, and the equivalent field
/// rotation frequency f_rot = u / k_f.
struct ControlInput {
  double u = 0.0;      // m/s, >= 0
  double phi = 0.0;    // rad, (-pi, pi]
  double f_rot = 0.0;  // Hz
};

struct Gains {
  double K_p = 1.0;                              // 1/s
  Eigen::Matrix2d L_p = Eigen::Matrix2d::Identity();  // observer gain, 1/s
  double k_f = 1.0;                              // m/s per Hz

  void validate() const {
    if (K_p < 0 || k_f <= 0) throw Error(ErrorCode::INVALID_ARGUMENT, "bad gains");
  }
};

/// Disturbance-observer state. x_hat is anchored to the latest position
/// measurement; the model prediction happens inside observer_step.
struct ObserverState {
  Vec2 v_hat = Vec2::Zero();  // estimated flow, m/s
  Vec2 x_hat = Vec2::Zero();  // latest measurement-anchored position estimate
  Eigen::Matrix2d L_p = Eigen::Matrix2d::Identity();
};

struct Reference {
  Vec2 x_d = Vec2::Zero();
  Vec2 xdot_d = Vec2::Zero();
  double phi_d = 0.0;
};

/// Figure-eight reference with theta = 2*pi*t/period:
///   x = a cos(theta) / (1 + sin^2(theta))
///   y = b sin(theta) cos(theta) / (1 + sin^2(theta))
/// Velocity by analytic differentiation through theta.
inline Reference ref_lemniscate(double t, double period, double a, double b) {
  if (period <= 0) throw Error(ErrorCode::INVALID_ARGUMENT, "period must be positive");
  const double theta = 2.0 * M_PI * t / period;
  const double s = std::sin(theta), c = std::cos(theta);
  const double D = 1.0 + s * s;
  Reference r;
  r.x_d = Vec2(a * c / D, b * s * c / D);
  const double dx_dtheta = -a * s * (3.0 - s * s) / (D * D);
  const double dy_dtheta = b * ((c * c - s * s) * D - 2.0 * s * s * c * c) / (D * D);
  const double dtheta_dt = 2.0 * M_PI / period;
  r.xdot_d = Vec2(dx_dtheta * dtheta_dt, dy_dtheta * dtheta_dt);
  r.phi_d = std::atan2(r.xdot_d.y(), r.xdot_d.x());
  return r;
}

/// Feedforward from the flow-compensated desired velocity:
///   u_ff = ||xdot_d - v||, phi_ff = atan2(xdot_d - v).
/// When the difference vanishes the heading falls back to fallback_phi.
inline std::pair<double, double> feedforward(const Vec2& xdot_d, const Vec2& v,
                                             double fallback_phi) {
  const Vec2 diff = xdot_d - v;
  const double u_ff = diff.norm();
  const double phi_ff = (u_ff > 0) ? std::atan2(diff.y(), diff.x()) : fallback_phi;
  return {u_ff, phi_ff};
}

/// Global error e = x_d - x - v*dt and its rotation into the reference-yaw
/// local frame.
inline std::pair<Vec2, Vec2> tracking_error(const Vec2& x_d, const Vec2& x, const Vec2& v,
                                            double dt, double phi_d) {
  if (dt <= 0) throw Error(ErrorCode::INVALID_ARGUMENT, "dt must be positive");
  const Vec2 e = x_d - x - v * dt;
  const double c = std::cos(phi_d), s = std::sin(phi_d);
  const Vec2 e_loc(c * e.x() + s * e.y(), -s * e.x() + c * e.y());
  return {e, e_loc};
}

/// One controller evaluation: feedforward heading/speed, local-error-weighted
/// heading blend (shortest arc), and forward-error speed feedback. The
/// forward speed is clamped at zero; heading carries direction.
inline ControlInput control_step(const RobotState& state, const Reference& ref,
                                 const Vec2& v_hat, const Gains& gains, double prev_phi,
                                 double dt) {
  gains.validate();
  const auto [u_ff, phi_ff] = feedforward(ref.xdot_d, v_hat, prev_phi);
  const auto [e, e_loc] = tracking_error(ref.x_d, state.x, v_hat, dt, ref.phi_d);

  const double wx = std::abs(e_loc.x()), wy = std::abs(e_loc.y());
  double phi;
  if (wx + wy == 0.0) {
    phi = phi_ff;
  } else {
    const double phi_fb = std::atan2(e.y(), e.x());
    const double w_fb = wy / (wx + wy);
    phi = wrap_angle(phi_ff + w_fb * wrap_angle(phi_fb - phi_ff));
  }
  const double u_fb = gains.K_p * (e.x() * std::cos(phi) + e.y() * std::sin(phi));
  ControlInput in;
  in.u = std::max(0.0, u_ff + u_fb);
  in.phi = wrap_angle(phi);
  in.f_rot = in.u / gains.k_f;
  return in;
}

/// Disturbance-observer update. The stored estimate is propagated through
/// the kinematic model over the interval, the flow estimate is corrected by
/// L_p times the prediction mismatch, and the position estimate re-anchors
/// to the new measurement.
inline ObserverState observer_step(const ObserverState& obs, const Vec2& x_meas,
                                   const ControlInput& input, double dt) {
  if (dt <= 0) throw Error(ErrorCode::INVALID_ARGUMENT, "dt must be positive");
  ObserverState next = obs;
  const Vec2 u_vec(std::cos(input.phi) * input.u, std::sin(input.phi) * input.u);
  const Vec2 x_pred = obs.x_hat + (u_vec + obs.v_hat) * dt;
  next.v_hat = obs.v_hat + obs.L_p * (x_meas - x_pred);
  next.x_hat = x_meas;
  if (!next.v_hat.allFinite() || !next.x_hat.allFinite())
    throw Error(ErrorCode::NON_FINITE, "observer update produced non-finite values");
  return next;
}

}  // namespace microflow
