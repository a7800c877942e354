#pragma once

#include "quadhrl/core_model.hpp"

namespace quadhrl {

/// Joint angles, 3 per leg (hip-roll, hip-pitch, knee), legs ordered LF, RF, LR, RR.
struct JointState {
  Vec12 angles = Vec12::Zero();

  Vec3 leg(int i) const { return angles.segment<3>(3 * i); }
  void set_leg(int i, const Vec3& a) { angles.segment<3>(3 * i) = a; }
};

struct JointTorques {
  Vec12 torques = Vec12::Zero();

  double squared_norm() const { return torques.squaredNorm(); }
};

enum class IkStatus { Ok, NearSingular, Unreachable };

struct IkResult {
  Vec3 angles = Vec3::Zero();
  IkStatus status = IkStatus::Ok;

  bool ok() const { return status != IkStatus::Unreachable; }
};

// All kinematic quantities below are in the body frame.
//
// Chain: hip offset -> roll about x -> lateral abduction offset -> pitch over the
// thigh -> knee over the shank. Knee angle 0 is a straight leg; positive knee angles
// bend the knee backward.

Vec3 forward_kinematics(int leg, const Vec3& leg_angles, const PhysicalParams& params);

/// Knee-backward branch. Unreachable when the target lies outside the workspace.
IkResult inverse_kinematics(int leg, const Vec3& target, const PhysicalParams& params);

/// d(foot position)/d(joint angles).
Mat3 jacobian(int leg, const Vec3& leg_angles, const PhysicalParams& params);

/// Radius of the reachable sphere centered at the hip (knee at its lower limit).
double workspace_radius(const PhysicalParams& params);

/// Whether `target` lies within the reachable sphere of the leg's hip.
bool reachable(int leg, const Vec3& target, const PhysicalParams& params);

/// Projects `target` onto the reachable sphere scaled by `margin`; returns true if it moved.
bool project_to_workspace(int leg, Vec3& target, const PhysicalParams& params, double margin = 1.0);

/// Per-leg tau = J^T f. `body_rotation` maps body to world (forces are world-frame).
JointTorques torques_from_forces(const JointState& joints, const FootForces& f, const PhysicalParams& params,
                                 const Mat3& body_rotation = Mat3::Identity());

/// IK for all four feet given world-aligned relative foot positions. Unreachable
/// targets are projected first.
JointState joints_from_feet(const FootArray& feet_world_rel, const Mat3& body_rotation, const PhysicalParams& params);

}  // namespace quadhrl
