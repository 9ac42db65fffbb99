#include "paf/dynamics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace paf {

bool QuadState::finite() const {
  return p.allFinite() && v.allFinite() && omega.allFinite() &&
         std::isfinite(q.w()) && std::isfinite(q.x()) && std::isfinite(q.y()) &&
         std::isfinite(q.z()) && std::isfinite(t);
}

double QuadState::yaw() const {
  const Vec3 body_x = q * Vec3::UnitX();
  return std::atan2(body_x.y(), body_x.x());
}

ControlCommand clamp_command(const ControlCommand& cmd, const VehicleParams& params) {
  if (std::isnan(cmd.thrust) || cmd.omega_cmd.hasNaN()) {
    throw std::invalid_argument("clamp_command: NaN in control command");
  }
  ControlCommand out = cmd;
  out.thrust = std::clamp(out.thrust, 0.0, params.max_thrust);
  for (int i = 0; i < 3; ++i) {
    out.omega_cmd[i] = std::clamp(out.omega_cmd[i], -params.max_body_rate, params.max_body_rate);
  }
  return out;
}

namespace {

struct Deriv {
  Vec3 dp, dv;
  Eigen::Vector4d dq;  // (w, x, y, z)
  Vec3 domega;
};

Eigen::Vector4d quat_coeffs(const Quat& q) {
  return {q.w(), q.x(), q.y(), q.z()};
}

Deriv derivative(const QuadState& s, const ControlCommand& cmd, const VehicleParams& params) {
  Deriv d;
  d.dp = s.v;
  d.dv = s.q * Vec3(0, 0, cmd.thrust / params.mass) + Vec3(0, 0, -params.gravity);
  const Quat omega_q(0.0, s.omega.x(), s.omega.y(), s.omega.z());
  d.dq = 0.5 * quat_coeffs(s.q * omega_q);
  d.domega = (cmd.omega_cmd - s.omega) / params.body_rate_tau;
  return d;
}

QuadState advance(const QuadState& s, const Deriv& d, double h) {
  QuadState out = s;
  out.p += h * d.dp;
  out.v += h * d.dv;
  const Eigen::Vector4d qc = quat_coeffs(s.q) + h * d.dq;
  out.q = Quat(qc[0], qc[1], qc[2], qc[3]);
  out.omega += h * d.domega;
  return out;
}

}  // namespace

QuadState rk4_step(const QuadState& state, const ControlCommand& cmd, double dt,
                   const VehicleParams& params) {
  const Deriv k1 = derivative(state, cmd, params);
  const Deriv k2 = derivative(advance(state, k1, 0.5 * dt), cmd, params);
  const Deriv k3 = derivative(advance(state, k2, 0.5 * dt), cmd, params);
  const Deriv k4 = derivative(advance(state, k3, dt), cmd, params);

  QuadState out = state;
  out.p += dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  out.v += dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  const Eigen::Vector4d qc =
      quat_coeffs(state.q) + dt / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq);
  Quat q(qc[0], qc[1], qc[2], qc[3]);
  q.normalize();
  out.q = q;
  out.omega += dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  out.t += dt;
  return out;
}

QuadState step(const QuadState& state, const ControlCommand& cmd, double dt,
               const VehicleParams& params, double max_substep) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (!state.finite()) {
    std::ostringstream msg;
    msg << "step: non-finite state at t=" << state.t;
    throw std::invalid_argument(msg.str());
  }
  if (!std::isfinite(cmd.thrust) || !cmd.omega_cmd.allFinite()) {
    throw std::invalid_argument("step: non-finite control command");
  }
  const ControlCommand clamped = clamp_command(cmd, params);

  const int n_sub = std::max(1, static_cast<int>(std::ceil(dt / max_substep - 1e-12)));
  const double h = dt / n_sub;
  QuadState s = state;
  for (int i = 0; i < n_sub; ++i) {
    s = rk4_step(s, clamped, h, params);
  }
  return s;
}

}  // namespace paf
