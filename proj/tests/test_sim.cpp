#include <cmath>
#include <map>
#include <numbers>

#include "doctest.h"
#include "quadhrl/sim.hpp"

using namespace quadhrl;

TEST_CASE("episode length is 25 decisions") {
  SimConfig cfg;
  CHECK(cfg.decisions_per_episode() == 25);
  CHECK(observation_dim(false) == 25);
  CHECK(observation_dim(true) == 31);
  CHECK(observation_layout(false) != observation_layout(true));
}

TEST_CASE("training scenario sampler") {
  std::mt19937_64 rng(3);
  int paused = 0, left_paused = 0;
  std::map<long, int> yaw_counts;
  const int n = 12000;
  for (int k = 0; k < n; ++k) {
    const Scenario s = sample_training_scenario(rng);
    CHECK(s.belt_speed_left == s.belt_speed_right);
    CHECK(std::abs(s.belt_speed_left) <= 0.3);
    CHECK((s.left_active || s.right_active));
    if (!s.left_active || !s.right_active) ++paused;
    if (!s.left_active) ++left_paused;
    ++yaw_counts[std::lround(s.commanded_yaw * 180.0 / std::numbers::pi)];
  }
  CHECK(yaw_counts.size() == 12);
  for (const auto& [deg, c] : yaw_counts) {
    CHECK(deg % 30 == 0);
    CHECK(std::abs(c - n / 12) < 5 * std::sqrt(n / 12.0));
  }
  CHECK(std::abs(paused / double(n) - 1.0 / 3.0) < 0.02);
  CHECK(std::abs(left_paused / double(paused) - 0.5) < 0.03);

  ScenarioDistribution none;
  none.pause_probability = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Scenario s = sample_training_scenario(rng, none);
    CHECK((s.left_active && s.right_active));
  }
  none.pause_probability = 1.5;
  CHECK_THROWS_AS(none.validate(), std::invalid_argument);
}

TEST_CASE("reset places all feet on the ground at the default stance") {
  const PhysicalParams params;
  const SimConfig cfg;
  const SimState s = initial_state(Scenario::both_belts(0.2), cfg, params);
  for (int i = 0; i < kNumLegs; ++i) {
    CHECK(s.contacts[i].attached());
    CHECK(s.robot.pose.position.z() + s.robot.feet[i].z() == doctest::Approx(0.0));
    CHECK(s.contacts[i].attached_to == (is_left(i) ? Surface::LeftBelt : Surface::RightBelt));
  }
  const SimState yawed = initial_state(Scenario::both_belts(0.0, std::numbers::pi / 2), cfg, params);
  // Rotated a quarter turn, the front feet are on the left belt.
  CHECK(yawed.contacts[0].attached_to == Surface::LeftBelt);
  CHECK(yawed.contacts[1].attached_to == Surface::LeftBelt);
  CHECK(yawed.contacts[2].attached_to == Surface::RightBelt);
}

TEST_CASE("bridge attaches front feet to the fixed surface") {
  Scenario sc = Scenario::both_belts(0.2);
  sc.bridge = true;
  const SimState s = initial_state(sc, SimConfig{}, PhysicalParams{});
  CHECK(s.contacts[0].attached_to == Surface::Fixed);
  CHECK(s.contacts[1].attached_to == Surface::Fixed);
  CHECK(s.contacts[2].attached_to == Surface::LeftBelt);
  CHECK(s.contacts[3].attached_to == Surface::RightBelt);
  CHECK(surface_velocity(Surface::Fixed, sc).norm() == 0.0);
}

TEST_CASE("belt surfaces move toward -x and paused belts are still") {
  Scenario sc = Scenario::both_belts(0.2);
  CHECK(surface_velocity(Surface::LeftBelt, sc).x() == doctest::Approx(-0.2));
  sc.right_active = false;
  CHECK(surface_velocity(Surface::RightBelt, sc).norm() == 0.0);
  CHECK(surface_at(Vec3(0.1, 0.1, 0), sc) == Surface::LeftBelt);
  CHECK(surface_at(Vec3(0.1, -0.1, 0), sc) == Surface::RightBelt);
}

TEST_CASE("attached feet are advected by the belt") {
  const PhysicalParams params;
  const SimConfig cfg;
  const Scenario sc = Scenario::both_belts(0.25);
  SimState s = initial_state(sc, cfg, params);
  const Vec3 a0 = s.contacts[0].anchor;
  PhysicsInput in;
  for (int k = 0; k < 10; ++k) physics_tick(s, in, sc, cfg, params);
  CHECK(s.contacts[0].anchor.x() == doctest::Approx(a0.x() - 0.25 * 10 * cfg.dt));
  CHECK(s.contacts[0].anchor.y() == doctest::Approx(a0.y()));
}

TEST_CASE("tangential force is clipped to the friction cone of a slipping foot") {
  const PhysicalParams params;
  const SimConfig cfg;
  Scenario sc;
  sc.slip_foot = 0;
  sc.friction_override = 0.0;
  SimState s = initial_state(sc, cfg, params);
  PhysicsInput in;
  for (int i = 0; i < kNumLegs; ++i) in.foot_forces.f[i] = Vec3(5.0, 0.0, 25.0);
  physics_tick(s, in, sc, cfg, params);
  CHECK(s.transmitted.f[0].head<2>().norm() == 0.0);
  CHECK(s.contacts[0].slipping);
  CHECK(s.transmitted.f[1].x() == doctest::Approx(5.0));
  CHECK_FALSE(s.contacts[1].slipping);
  CHECK(contact_friction(0, sc, cfg) == 0.0);
  CHECK(contact_friction(1, sc, cfg) == cfg.surface_mu);

  // Normal force is unilateral.
  SimState t = initial_state(Scenario{}, cfg, params);
  in.foot_forces.f[2] = Vec3(0.0, 0.0, -10.0);
  physics_tick(t, in, Scenario{}, cfg, params);
  CHECK(t.transmitted.f[2].norm() == 0.0);
}

TEST_CASE("reward hand examples") {
  CHECK(primitive_reward(0.0, 0.0, 0.0025) == doctest::Approx(1.0));
  CHECK(primitive_reward(100.0, 0.04, 0.0025) == doctest::Approx(1.0 - 0.25 - 0.04));
  CHECK(primitive_reward(400.0, 1.0, 0.0025) == doctest::Approx(-1.0));
}

TEST_CASE("energy metric") {
  EpisodeStats st;
  st.ticks = 5000;
  st.sum_sq_torque = 5000 * 42.0;
  const EnergyResult e = energy_metric(st, 0.002);
  CHECK_FALSE(e.failed);
  CHECK(e.value == doctest::Approx(42.0));
  st.ticks = 100;
  CHECK_THROWS_AS(energy_metric(st, 0.002), EpisodeTooShort);
  st.fell = true;
  CHECK(energy_metric(st, 0.002).failed);
}

TEST_CASE("environment steps, truncates and refuses to step after done") {
  TreadmillEnv env;
  const Eigen::VectorXd o = env.reset(Scenario{});
  CHECK(o.size() == env.obs_dim());
  CHECK(o[4 + 12 + kStand] == 1.0);
  StepResult r;
  int steps = 0;
  while (!env.done()) {
    r = env.step(kStand);
    ++steps;
  }
  CHECK(steps == 25);
  CHECK(r.truncated);
  CHECK_FALSE(r.fell);
  CHECK(env.stats().ticks == 5000);
  CHECK(env.stats().decisions == 25);
  CHECK(env.stats().primitive_histogram[kStand] == 25);
  CHECK(r.reward < 1.0);
  CHECK_THROWS_AS(env.step(kStand), StepAfterDone);
}

TEST_CASE("swing feet leave and land within one primitive") {
  EnvConfig cfg;
  cfg.record_contacts = true;
  TreadmillEnv env(cfg);
  env.reset(Scenario{});
  env.step(kTrot1);
  const auto& log = env.stats().contact_log;
  REQUIRE(log.size() == 200);
  CHECK_FALSE(log[10].contacts[0]);
  CHECK(log[10].contacts[1]);
  CHECK(log.back().contacts[0]);
  CHECK(log.back().contacts[3]);
  CHECK(log.back().primitive_id == kTrot1);
}

TEST_CASE("observation encodes the previous primitive and yaw error") {
  TreadmillEnv env;
  env.reset(Scenario::both_belts(0.0, 0.5));
  env.step(kTrot2);
  const Eigen::VectorXd o = env.observe();
  CHECK(o.tail(kNumPrimitives).sum() == 1.0);
  CHECK(o[4 + 12 + kTrot2] == 1.0);
  CHECK(std::abs(o[3]) < 0.2);
}

TEST_CASE("scenario validation") {
  Scenario s = Scenario::both_belts(0.6);
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = Scenario{};
  s.slip_foot = 4;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("perturbations scale linearly") {
  std::mt19937_64 a(5), b(5);
  const BodyPose p1 = sample_perturbation(a, 1.0), p2 = sample_perturbation(b, 2.0);
  CHECK((2.0 * p1.position - p2.position).norm() < 1e-15);
  CHECK(p1.position.cwiseAbs().maxCoeff() <= 0.01);
  std::mt19937_64 c(5);
  CHECK(sample_perturbation(c, 0.0).euler.norm() == 0.0);
}
