#include "quadhrl/controller.hpp"

#include <algorithm>
#include <stdexcept>

namespace quadhrl {

BodyCommand BodyCommand::hold(const Vec3& position, double yaw) {
  BodyCommand c;
  c.target_pose.position = position;
  c.target_pose.euler = Vec3(0.0, 0.0, yaw);
  return c;
}

void BodyCommand::validate() const {
  if (!target_pose.position.allFinite() || !target_pose.euler.allFinite() || !target_twist.allFinite())
    throw std::invalid_argument("BodyCommand: non-finite target");
  if (!(target_pose.position.z() > 0.0)) throw std::invalid_argument("BodyCommand: target height must be > 0");
}

void GainSet::validate() const {
  if ((pose_kp.array() < 0).any() || (pose_kd.array() < 0).any() || swing_kp < 0 || swing_kd < 0 ||
      placement_gain < 0 || swing_apex < 0)
    throw std::invalid_argument("GainSet: gains must be >= 0");
}

Vec6 target_acceleration(const BodyCommand& command, const RobotState& state, const GainSet& gains) {
  Vec6 pose_err;
  pose_err.head<3>() = command.target_pose.position - state.pose.position;
  for (int k = 0; k < 3; ++k) pose_err[3 + k] = wrap_angle(command.target_pose.euler[k] - state.pose.euler[k]);

  const Vec3& euler = state.pose.euler;
  Vec6 vel_err;
  vel_err.head<3>() = command.target_twist.head<3>() - state.twist.head<3>();
  vel_err.tail<3>() = omega_to_euler_rates(euler, command.target_twist.tail<3>()) -
                      omega_to_euler_rates(euler, state.twist.tail<3>());
  return gains.pose_kp.cwiseProduct(pose_err) + gains.pose_kd.cwiseProduct(vel_err);
}

SwingTargets swing_targets(const RobotState& state, const BodyCommand& command, const PhysicalParams& params,
                           const GainSet& gains, const std::array<double, kNumLegs>& lift_fraction) {
  const Mat3 rz = rot_z(state.pose.yaw());
  const Mat3 R = rotation(state.pose.euler);
  const Vec3 shift = gains.placement_gain * (state.twist.head<3>() - command.target_twist.head<3>());
  const double ground = -state.pose.position.z();

  SwingTargets out;
  for (int i = 0; i < kNumLegs; ++i) {
    Vec3 p = rz * params.default_feet[i] + shift;
    p.z() = ground + gains.swing_apex * std::clamp(lift_fraction[i], 0.0, 1.0);
    Vec3 body = R.transpose() * p;
    if (project_to_workspace(i, body, params, 0.98)) {
      out.clamped[i] = true;
      p = R * body;
    }
    out.targets[i] = p;
  }
  return out;
}

Vec3 odometry_velocity(const RobotState& state, const FootArray& foot_velocities, const Primitive& primitive) {
  Vec3 sum = Vec3::Zero();
  int n = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    if (!primitive.is_stance(i)) continue;
    sum -= foot_velocities[i];
    ++n;
  }
  return n > 0 ? Vec3(sum / n) : Vec3(state.twist.head<3>());
}

FootForces swing_forces(const FootArray& targets, const RobotState& state, const FootArray& foot_velocities,
                        const GainSet& gains, const Primitive& primitive) {
  FootForces f;
  for (int i = 0; i < kNumLegs; ++i) {
    if (primitive.is_stance(i)) continue;
    f.f[i] = gains.swing_kp * (targets[i] - state.feet[i]) - gains.swing_kd * foot_velocities[i];
  }
  return f;
}

LowLevelController::LowLevelController(ControllerConfig config) : config_(std::move(config)), solver_(config_.qp) {
  config_.params.validate();
  config_.gains.validate();
  config_.weights.validate();
  solver_.set_warm_start_enabled(true);
}

void LowLevelController::reset() {
  solver_ = QpSolver(config_.qp);
  solver_.set_warm_start_enabled(true);
}

QpProblem LowLevelController::force_problem(const RobotState& state, const BodyCommand& command,
                                            const Primitive& primitive) const {
  Vec6 acc = target_acceleration(command, state, config_.gains);
  // Euler-angle accelerations to world angular acceleration (small roll/pitch).
  acc.tail<3>() = rot_z(state.pose.yaw()) * acc.tail<3>();
  const Mat6x12 M = build_M(state, config_.params);
  return build_force_qp(acc, M, gravity_aug(config_.params), primitive, config_.weights, config_.friction());
}

double LowLevelController::evaluate_qp_cost(const RobotState& state, const BodyCommand& command,
                                            const Primitive& primitive) const {
  const QpProblem p = force_problem(state, command, primitive);
  QpSolver solver(config_.qp);
  const QpSolution sol = solver.solve(p);
  return std::max(0.0, p.objective(sol.x));
}

ControlOutput LowLevelController::control_tick(const RobotState& state, const JointState& joints,
                                               const BodyCommand& command, const Primitive& primitive,
                                               const TickContext& ctx) {
  ControlOutput out;
  const QpProblem problem = force_problem(state, command, primitive);
  QpSolution sol = solver_.solve(problem);
  out.qp_status = sol.status;
  out.qp_iterations = sol.iterations;
  out.degraded = sol.status != QpStatus::Solved;
  if (!sol.x.allFinite()) {
    sol.x = Eigen::VectorXd::Zero(12);
    out.degraded = true;
  }
  Vec12 f = sol.x;
  for (int i = 0; i < kNumLegs; ++i)
    if (primitive.is_swing(i)) f.segment<3>(3 * i).setZero();
  out.foot_forces = FootForces::from(f);
  out.qp_cost = std::max(0.0, problem.objective(f));

  if (config_.placement_from_odometry) {
    RobotState placed = state;
    placed.twist.head<3>() = odometry_velocity(state, ctx.foot_velocities, primitive);
    out.swing_targets = swing_targets(placed, command, config_.params, config_.gains, ctx.lift_fraction);
  } else {
    out.swing_targets = swing_targets(state, command, config_.params, config_.gains, ctx.lift_fraction);
  }
  out.swing_forces = swing_forces(out.swing_targets.targets, state, ctx.foot_velocities, config_.gains, primitive);

  // Stance legs push on the ground with the negated reaction; swing legs apply the PD force.
  FootForces leg;
  for (int i = 0; i < kNumLegs; ++i)
    leg.f[i] = primitive.is_stance(i) ? Vec3(-out.foot_forces.f[i]) : out.swing_forces.f[i];
  out.torques = torques_from_forces(joints, leg, config_.params, rotation(state.pose.euler));
  const double lim = config_.params.leg.torque_limit;
  out.torques.torques = out.torques.torques.cwiseMax(-lim).cwiseMin(lim);
  return out;
}

}  // namespace quadhrl
