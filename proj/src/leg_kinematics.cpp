#include "quadhrl/leg_kinematics.hpp"

#include <algorithm>
#include <cmath>

namespace quadhrl {

namespace {

double abduction_offset(int leg, const PhysicalParams& params) {
  return is_left(leg) ? params.leg.abduction : -params.leg.abduction;
}

double max_leg_length(const PhysicalParams& params) {
  const double l1 = params.leg.thigh, l2 = params.leg.shank;
  return std::sqrt(l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * std::cos(params.leg.knee_min));
}

}  // namespace

Vec3 forward_kinematics(int leg, const Vec3& q, const PhysicalParams& params) {
  const double l1 = params.leg.thigh, l2 = params.leg.shank;
  const double x = l1 * std::sin(q[1]) + l2 * std::sin(q[1] + q[2]);
  const double z = -l1 * std::cos(q[1]) - l2 * std::cos(q[1] + q[2]);
  const Vec3 local(x, abduction_offset(leg, params), z);
  return params.hip_offsets[leg] + rot_x(q[0]) * local;
}

IkResult inverse_kinematics(int leg, const Vec3& target, const PhysicalParams& params) {
  const double l1 = params.leg.thigh, l2 = params.leg.shank;
  const double d = abduction_offset(leg, params);
  const Vec3 v = target - params.hip_offsets[leg];

  IkResult out;
  const double yz2 = v.y() * v.y() + v.z() * v.z() - d * d;
  if (yz2 < 0.0) {
    out.status = IkStatus::Unreachable;
    return out;
  }
  const double zl = -std::sqrt(yz2);
  const double roll = std::atan2(v.z(), v.y()) - std::atan2(zl, d);

  const double L2 = v.x() * v.x() + zl * zl;
  const double L = std::sqrt(L2);
  if (L > l1 + l2 + 1e-12 || L < std::abs(l1 - l2) - 1e-12) {
    out.status = IkStatus::Unreachable;
    return out;
  }
  const double c2 = std::clamp((L2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double knee = std::acos(c2);
  const double a = l1 + l2 * std::cos(knee);
  const double b = l2 * std::sin(knee);
  const double pitch = std::atan2(v.x(), -zl) - std::atan2(b, a);

  out.angles = Vec3(wrap_angle(roll), pitch, knee);
  if (knee < 1e-4) out.status = IkStatus::NearSingular;
  return out;
}

Mat3 jacobian(int leg, const Vec3& q, const PhysicalParams& params) {
  const double l1 = params.leg.thigh, l2 = params.leg.shank;
  const double s1 = std::sin(q[1]), c1 = std::cos(q[1]);
  const double s12 = std::sin(q[1] + q[2]), c12 = std::cos(q[1] + q[2]);
  const Vec3 local(l1 * s1 + l2 * s12, abduction_offset(leg, params), -l1 * c1 - l2 * c12);

  const double cr = std::cos(q[0]), sr = std::sin(q[0]);
  Mat3 drx;
  drx << 0, 0, 0, 0, -sr, -cr, 0, cr, -sr;
  const Mat3 rx = rot_x(q[0]);

  Mat3 J;
  J.col(0) = drx * local;
  J.col(1) = rx * Vec3(l1 * c1 + l2 * c12, 0.0, l1 * s1 + l2 * s12);
  J.col(2) = rx * Vec3(l2 * c12, 0.0, l2 * s12);
  return J;
}

double workspace_radius(const PhysicalParams& params) {
  const double L = max_leg_length(params);
  return std::sqrt(L * L + params.leg.abduction * params.leg.abduction);
}

bool reachable(int leg, const Vec3& target, const PhysicalParams& params) {
  return (target - params.hip_offsets[leg]).norm() <= workspace_radius(params);
}

bool project_to_workspace(int leg, Vec3& target, const PhysicalParams& params, double margin) {
  const Vec3 v = target - params.hip_offsets[leg];
  const double r = workspace_radius(params) * margin;
  const double n = v.norm();
  if (n <= r) return false;
  target = params.hip_offsets[leg] + v * (r / n);
  return true;
}

JointTorques torques_from_forces(const JointState& joints, const FootForces& f, const PhysicalParams& params,
                                 const Mat3& body_rotation) {
  JointTorques out;
  for (int i = 0; i < kNumLegs; ++i) {
    const Mat3 J = jacobian(i, joints.leg(i), params);
    out.torques.segment<3>(3 * i) = J.transpose() * (body_rotation.transpose() * f.f[i]);
  }
  return out;
}

JointState joints_from_feet(const FootArray& feet_world_rel, const Mat3& body_rotation, const PhysicalParams& params) {
  JointState js;
  for (int i = 0; i < kNumLegs; ++i) {
    Vec3 body = body_rotation.transpose() * feet_world_rel[i];
    project_to_workspace(i, body, params, 0.999);
    IkResult ik = inverse_kinematics(i, body, params);
    Vec3 a = ik.angles;
    if (!ik.ok()) a = inverse_kinematics(i, params.default_feet[i], params).angles;
    js.set_leg(i, a);
  }
  return js;
}

}  // namespace quadhrl
