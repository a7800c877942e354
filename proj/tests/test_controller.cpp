#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "quadhrl/controller.hpp"
#include "quadhrl/sim.hpp"

using namespace quadhrl;

namespace {

SimState standing_state() {
  return initial_state(Scenario{}, SimConfig{}, PhysicalParams{});
}

BodyCommand hold_origin(const SimState& s) { return BodyCommand::hold(Vec3(0, 0, s.robot.pose.position.z()), 0.0); }

}  // namespace

TEST_CASE("target acceleration is zero on target") {
  const SimState s = standing_state();
  CHECK(target_acceleration(hold_origin(s), s.robot, GainSet{}).norm() < 1e-12);
}

TEST_CASE("target acceleration hand examples") {
  RobotState st;
  st.pose.position = Vec3(0, 0, 0.39);
  st.twist[0] = 0.1;
  const BodyCommand cmd = BodyCommand::hold(Vec3(0, 0, 0.4), 0.0);
  const Vec6 a = target_acceleration(cmd, st, GainSet{});
  CHECK(a[0] == doctest::Approx(-2.0));
  CHECK(a[2] == doctest::Approx(1.5));
  CHECK(std::abs(a[1]) < 1e-12);
}

TEST_CASE("yaw error wraps across pi") {
  RobotState st;
  st.pose.position = Vec3(0, 0, 0.4);
  st.pose.euler.z() = -std::numbers::pi + 0.1;
  const BodyCommand cmd = BodyCommand::hold(Vec3(0, 0, 0.4), std::numbers::pi - 0.1);
  const Vec6 a = target_acceleration(cmd, st, GainSet{});
  CHECK(a[5] == doctest::Approx(-0.2 * 50.0));
}

TEST_CASE("swing targets sit on the ground under the hips at rest") {
  const SimState s = standing_state();
  const PhysicalParams params;
  const SwingTargets t = swing_targets(s.robot, hold_origin(s), params, GainSet{});
  for (int i = 0; i < kNumLegs; ++i) {
    CHECK(t.targets[i].x() == doctest::Approx(params.default_feet[i].x()));
    CHECK(t.targets[i].y() == doctest::Approx(params.default_feet[i].y()));
    CHECK(t.targets[i].z() == doctest::Approx(-s.robot.pose.position.z()));
    CHECK_FALSE(t.clamped[i]);
  }
  std::array<double, kNumLegs> lift{};
  lift.fill(1.0);
  const SwingTargets up = swing_targets(s.robot, hold_origin(s), params, GainSet{}, lift);
  CHECK(up.targets[0].z() == doctest::Approx(-s.robot.pose.position.z() + GainSet{}.swing_apex));
}

TEST_CASE("swing targets shift with velocity error and stay reachable") {
  SimState s = standing_state();
  const PhysicalParams params;
  s.robot.twist[0] = 0.2;
  const SwingTargets t = swing_targets(s.robot, hold_origin(s), params, GainSet{});
  CHECK(t.targets[0].x() == doctest::Approx(params.default_feet[0].x() + 0.25 * 0.2));
  s.robot.twist[0] = 5.0;
  const SwingTargets far = swing_targets(s.robot, hold_origin(s), params, GainSet{});
  for (int i = 0; i < kNumLegs; ++i) {
    CHECK(far.clamped[i]);
    CHECK(reachable(i, far.targets[i], params));
  }
}

TEST_CASE("odometry velocity averages stance feet") {
  RobotState st;
  st.twist[0] = 9.0;
  FootArray v = zero_feet();
  v[0] = Vec3(0.2, 0, 0);
  v[1] = Vec3(0.4, 0, 0);
  v[2] = Vec3(100, 0, 0);
  v[3] = Vec3(100, 0, 0);
  const Primitive front_stance = Primitive::from_mask({false, false, true, true});
  CHECK(odometry_velocity(st, v, front_stance).x() == doctest::Approx(-0.3));
  const Primitive none = Primitive::from_mask({true, true, true, true});
  CHECK(odometry_velocity(st, v, none).x() == doctest::Approx(9.0));
}

TEST_CASE("swing forces only act on swing feet") {
  const SimState s = standing_state();
  FootArray targets = s.robot.feet;
  targets[0].z() += 0.01;
  targets[1].z() += 0.01;
  const FootForces f = swing_forces(targets, s.robot, zero_feet(), GainSet{}, primitive(kTrot1));
  CHECK(f.f[0].z() == doctest::Approx(300.0 * 0.01));
  CHECK(f.f[1].norm() == 0.0);
  CHECK(f.f[2].norm() == 0.0);
}

TEST_CASE("control tick separates stance and swing") {
  const SimState s = standing_state();
  LowLevelController ctl;
  for (const Primitive& p : primitive_table()) {
    ctl.reset();
    const ControlOutput out = ctl.control_tick(s.robot, s.joints, hold_origin(s), p);
    CHECK(out.qp_status == QpStatus::Solved);
    CHECK_FALSE(out.degraded);
    for (int i = 0; i < kNumLegs; ++i) {
      if (p.is_swing(i)) {
        CHECK(out.foot_forces.f[i].norm() == 0.0);
      } else {
        CHECK(out.foot_forces.f[i].z() >= PhysicalParams{}.fz_min - 1e-6);
        CHECK(out.swing_forces.f[i].norm() == 0.0);
      }
    }
    CHECK(out.torques.torques.cwiseAbs().maxCoeff() <= PhysicalParams{}.leg.torque_limit);
    const QpProblem prob = ctl.force_problem(s.robot, hold_origin(s), p);
    CHECK(out.qp_cost == doctest::Approx(prob.objective(out.foot_forces.stacked())).epsilon(1e-9));
  }
}

TEST_CASE("standing on target holds the weight with vertical forces") {
  const SimState s = standing_state();
  LowLevelController ctl;
  const ControlOutput out = ctl.control_tick(s.robot, s.joints, hold_origin(s), primitive(kStand));
  const Vec3 sum = out.foot_forces.sum();
  CHECK(sum.z() == doctest::Approx(PhysicalParams{}.weight()).epsilon(2e-3));
  CHECK(std::abs(sum.x()) < 1e-3);
  CHECK(std::abs(sum.y()) < 1e-3);
}

TEST_CASE("QP cost matches the projected-gradient oracle") {
  SimState s = standing_state();
  s.robot.pose.position.x() = 0.03;
  s.robot.pose.euler.z() = 0.2;
  LowLevelController ctl;
  for (const Primitive& p : primitive_table()) {
    const QpProblem prob = ctl.force_problem(s.robot, hold_origin(s), p);
    const Eigen::VectorXd x = oracle::projected_gradient(prob);
    CHECK(ctl.evaluate_qp_cost(s.robot, hold_origin(s), p) ==
          doctest::Approx(prob.objective(x)).epsilon(1e-5).scale(1.0));
  }
}

TEST_CASE("standing controller keeps station on a static floor") {
  TreadmillEnv env;
  env.reset(Scenario{});
  const double z0 = env.sim().robot.pose.position.z();
  for (int k = 0; k < 5; ++k) {
    const StepResult r = env.step(kStand);
    CHECK_FALSE(r.fell);
  }
  CHECK(std::abs(env.sim().robot.pose.position.z() - z0) < 0.02);
  CHECK(env.sim().robot.pose.position.head<2>().norm() < 0.02);
  CHECK(std::abs(env.sim().robot.pose.yaw()) < 0.02);
}

TEST_CASE("invalid gains and commands are rejected") {
  GainSet g;
  g.swing_kp = -1.0;
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
  BodyCommand c;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
