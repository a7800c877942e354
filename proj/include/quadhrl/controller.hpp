#pragma once

#include "quadhrl/core_model.hpp"
#include "quadhrl/force_qp.hpp"
#include "quadhrl/leg_kinematics.hpp"
#include "quadhrl/primitives.hpp"
#include "quadhrl/qp.hpp"

namespace quadhrl {

struct BodyCommand {
  BodyPose target_pose;
  Vec6 target_twist = Vec6::Zero();

  /// Hold `position` at `yaw` with zero velocity.
  static BodyCommand hold(const Vec3& position, double yaw);
  void validate() const;
};

struct GainSet {
  Vec6 pose_kp = (Vec6() << 20, 20, 150, 200, 200, 50).finished();
  Vec6 pose_kd = (Vec6() << 20, 20, 20, 20, 20, 10).finished();
  double swing_kp = 300.0;
  double swing_kd = 15.0;
  double placement_gain = 0.25;
  double swing_apex = 0.08;

  void validate() const;
};

struct ControllerConfig {
  PhysicalParams params;
  GainSet gains;
  QpWeights weights;
  QpSettings qp;
  bool friction_as_printed = false;
  // Foot placement uses the body velocity over the stance feet (leg odometry) instead of
  // the world-frame body velocity. On a moving belt this adds the belt's neutral-point offset.
  bool placement_from_odometry = true;

  FrictionModel friction() const { return {params.friction_mu, params.fz_min, friction_as_printed}; }
};

struct SwingTargets {
  FootArray targets = zero_feet();
  std::array<bool, kNumLegs> clamped{};
};

/// Per-tick inputs beyond the robot state that the swing controller needs.
struct TickContext {
  // 0 = on the ground plane, 1 = at the apex height.
  std::array<double, kNumLegs> lift_fraction{};
  // Foot velocities relative to the base, world-aligned axes.
  FootArray foot_velocities = zero_feet();
};

struct ControlOutput {
  JointTorques torques;
  FootForces foot_forces;   // ground reaction forces from the QP; zero on swing feet
  FootForces swing_forces;  // PD forces on swing feet; zero on stance feet
  double qp_cost = 0.0;
  SwingTargets swing_targets;
  QpStatus qp_status = QpStatus::Solved;
  int qp_iterations = 0;
  bool degraded = false;
};

/// PD law on pose error (wrapped Euler angles) and velocity error. Returns the
/// target acceleration in (linear, Euler-angle) coordinates.
Vec6 target_acceleration(const BodyCommand& command, const RobotState& state, const GainSet& gains);

/// Linear foot-placement targets p0 + k (v_body - v_des) relative to the base, with the
/// z-component on the ground plane plus the requested lift, projected into the workspace.
SwingTargets swing_targets(const RobotState& state, const BodyCommand& command, const PhysicalParams& params,
                           const GainSet& gains, const std::array<double, kNumLegs>& lift_fraction = {});

/// PD swing-foot forces for swing feet; zero for stance feet.
/// Body velocity relative to the stance surface: minus the mean stance-foot velocity
/// (relative to the base). Falls back to the state's linear velocity with no stance feet.
Vec3 odometry_velocity(const RobotState& state, const FootArray& foot_velocities, const Primitive& primitive);

FootForces swing_forces(const FootArray& targets, const RobotState& state, const FootArray& foot_velocities,
                        const GainSet& gains, const Primitive& primitive);

/// The 500 Hz low-level controller. Stateful only through the QP warm start.
class LowLevelController {
 public:
  explicit LowLevelController(ControllerConfig config = {});

  ControlOutput control_tick(const RobotState& state, const JointState& joints, const BodyCommand& command,
                             const Primitive& primitive, const TickContext& ctx = {});

  /// Optimal force-QP cost for `primitive` at `state`, using a separate cold-started solver.
  double evaluate_qp_cost(const RobotState& state, const BodyCommand& command, const Primitive& primitive) const;

  /// The force QP this controller would solve at `state`.
  QpProblem force_problem(const RobotState& state, const BodyCommand& command, const Primitive& primitive) const;

  const ControllerConfig& config() const { return config_; }
  void reset();

 private:
  ControllerConfig config_;
  QpSolver solver_;
};

}  // namespace quadhrl
