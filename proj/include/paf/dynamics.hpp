#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

namespace paf {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;
using Mat3 = Eigen::Matrix3d;

// Full rigid-body state. q maps body-frame vectors into the world frame.
struct QuadState {
  Vec3 p = Vec3::Zero();       // position, m
  Vec3 v = Vec3::Zero();       // velocity, m/s
  Quat q = Quat::Identity();   // world-from-body
  Vec3 omega = Vec3::Zero();   // body rates, rad/s
  double t = 0.0;              // s

  bool finite() const;
  // Yaw of the body x-axis projected onto the world xy-plane.
  double yaw() const;
};

struct ControlCommand {
  double thrust = 0.0;             // collective thrust, N
  Vec3 omega_cmd = Vec3::Zero();   // body-rate setpoint, rad/s
};

struct VehicleParams {
  double mass = 0.54;              // kg
  double gravity = 9.81;           // m/s^2
  double max_thrust = 34.0;        // N
  double max_body_rate = 6.0;      // rad/s, per axis
  double body_rate_tau = 0.05;     // s, first-order tracking lag
  double collision_radius = 0.2;   // m

  double hover_thrust() const { return mass * gravity; }
  double thrust_to_weight() const { return max_thrust / (mass * gravity); }
};

// Projects thrust into [0, max_thrust] and each body-rate axis into
// [-max_body_rate, max_body_rate]. Idempotent. Throws on NaN input.
ControlCommand clamp_command(const ControlCommand& cmd, const VehicleParams& params);

// One RK4 step of the rigid-body ODE
//   pdot = v
//   vdot = q * (0, 0, c/m) + (0, 0, -g)
//   qdot = 1/2 q x (0, omega)
//   omegadot = (omega_cmd - omega) / tau
// The quaternion is renormalized after the step.
QuadState rk4_step(const QuadState& state, const ControlCommand& cmd, double dt,
                   const VehicleParams& params);

// Advances one control interval, splitting dt into RK4 substeps no longer
// than max_substep. Commands are clamped; non-finite inputs are rejected.
QuadState step(const QuadState& state, const ControlCommand& cmd, double dt,
               const VehicleParams& params, double max_substep = 0.005);

}  // namespace paf
