#pragma once

#include "quadhrl/types.hpp"

namespace quadhrl {

/// Body position (world frame, m) and Z-Y-X Euler angles (roll, pitch, yaw).
struct BodyPose {
  Vec3 position = Vec3::Zero();
  Vec3 euler = Vec3::Zero();

  double roll() const { return euler.x(); }
  double pitch() const { return euler.y(); }
  double yaw() const { return euler.z(); }
};

/// Full rigid-body state seen by the controllers.
///
/// `twist` stacks world-frame linear and angular velocity. `feet` are the foot
/// positions relative to the base origin, expressed in world-aligned axes.
struct RobotState {
  BodyPose pose;
  Vec6 twist = Vec6::Zero();
  FootArray feet = zero_feet();

  Vec3 linear_velocity() const { return twist.head<3>(); }
  Vec3 angular_velocity() const { return twist.tail<3>(); }
};

struct LegGeometry {
  double thigh = 0.25;
  double shank = 0.25;
  double abduction = 0.037;  // lateral offset from hip-roll axis to the thigh plane
  double hip_roll_limit = 0.8;
  double hip_pitch_limit = 2.0;
  double knee_min = 0.1;
  double knee_max = 2.7;
  double torque_limit = 50.0;
};

struct PhysicalParams {
  double mass = 10.0;
  Mat3 body_inertia = Vec3(0.032, 0.12, 0.11).asDiagonal();
  // Gravity vector as it appears in p_ddot = sum(f)/m - g, i.e. (0, 0, |g|).
  Vec3 gravity = Vec3(0.0, 0.0, 9.81);
  double friction_mu = 0.6;
  double fz_min = 5.0;
  FootArray default_feet;  // body frame
  FootArray hip_offsets;   // body frame, hip-roll joint location
  LegGeometry leg;

  PhysicalParams();

  /// Throws std::invalid_argument on a violated invariant.
  void validate() const;

  double weight() const { return mass * gravity.norm(); }
};

/// Augmented gravity term g~ = (g, 0_3) subtracted in q_ddot = M f - g~.
Vec6 gravity_aug(const PhysicalParams& params);

/// Foot forces (N, world frame) ordered LF, RF, LR, RR.
struct FootForces {
  FootArray f = zero_feet();

  Vec12 stacked() const { return stack(f); }
  static FootForces from(const Vec12& v) { return FootForces{unstack(v)}; }
  Vec3 sum() const { return f[0] + f[1] + f[2] + f[3]; }
};

Mat3 rot_x(double phi);
Mat3 rot_y(double theta);
Mat3 rot_z(double psi);

/// Full Z-Y-X Euler rotation, body to world: Rz(yaw) Ry(pitch) Rx(roll).
Mat3 rotation(const Vec3& euler);

/// Cross-product matrix: skew(p) * v == p.cross(v).
Mat3 skew(const Vec3& p);

/// World inertia under the yaw-only approximation Rz I_B Rz^T.
Mat3 inertia_world(double psi, const Mat3& body_inertia);

/// 6x12 map from stacked foot forces to (linear, angular) acceleration.
/// Throws std::domain_error when the body inertia is singular.
Mat6x12 build_M(const RobotState& state, const PhysicalParams& params);

/// q_ddot = M f - g~.
Vec6 linear_dynamics(const Mat6x12& M, const FootForces& f, const Vec6& g_aug);

/// Centroidal dynamics using the full-orientation world inertia; Coriolis term dropped.
/// Throws std::domain_error when the world inertia is numerically singular.
Vec6 nonlinear_centroidal(const RobotState& state, const FootForces& f, const PhysicalParams& params);

/// omega ~= Rz(psi) * euler_rates (small roll/pitch).
Vec3 euler_rates_to_omega(const Vec3& euler, const Vec3& euler_rates);
Vec3 omega_to_euler_rates(const Vec3& euler, const Vec3& omega);

}  // namespace quadhrl
