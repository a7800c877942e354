#include "quadhrl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace quadhrl {

namespace {

constexpr double kPi = std::numbers::pi;

// Observation normalization (layout v1).
constexpr double kHeightScale = 10.0;
constexpr double kAngleScale = 2.0;
constexpr double kFootScale = 10.0;
constexpr double kTwistScale = 0.5;

}  // namespace

void Scenario::validate() const {
  if (std::abs(belt_speed_left) > 0.5 || std::abs(belt_speed_right) > 0.5)
    throw std::invalid_argument("Scenario: |belt speed| must be <= 0.5");
  if (friction_override < 0.0) throw std::invalid_argument("Scenario: friction_override must be >= 0");
  if (slip_foot && (*slip_foot < 0 || *slip_foot >= kNumLegs)) throw std::invalid_argument("Scenario: bad slip_foot");
  if (!std::isfinite(commanded_yaw)) throw std::invalid_argument("Scenario: non-finite yaw");
}

std::string Scenario::describe() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "left=" << (left_active ? belt_speed_left : 0.0) << ";right=" << (right_active ? belt_speed_right : 0.0)
     << ";yaw_deg=" << std::round(commanded_yaw * 180.0 / kPi) << ";bridge=" << (bridge ? 1 : 0);
  if (slip_foot) ss << ";slip=" << kLegNames[*slip_foot] << ";mu=" << friction_override;
  return ss.str();
}

Scenario Scenario::both_belts(double speed, double yaw) {
  Scenario s;
  s.belt_speed_left = s.belt_speed_right = speed;
  s.commanded_yaw = yaw;
  return s;
}

const char* to_string(Surface s) {
  switch (s) {
    case Surface::None: return "none";
    case Surface::LeftBelt: return "left_belt";
    case Surface::RightBelt: return "right_belt";
    case Surface::Fixed: return "fixed";
  }
  return "?";
}

std::array<bool, kNumLegs> SimState::contact_flags() const {
  std::array<bool, kNumLegs> c{};
  for (int i = 0; i < kNumLegs; ++i) c[i] = contacts[i].attached();
  return c;
}

int SimConfig::decisions_per_episode() const {
  return static_cast<int>(std::lround(episode_seconds / (dt * ticks_per_primitive)));
}

Vec3 surface_velocity(Surface s, const Scenario& sc) {
  switch (s) {
    case Surface::LeftBelt: return Vec3(sc.left_active ? -sc.belt_speed_left : 0.0, 0.0, 0.0);
    case Surface::RightBelt: return Vec3(sc.right_active ? -sc.belt_speed_right : 0.0, 0.0, 0.0);
    default: return Vec3::Zero();
  }
}

Surface surface_at(const Vec3& p, const Scenario& sc) {
  if (sc.bridge && p.x() >= 0.0) return Surface::Fixed;
  return p.y() >= 0.0 ? Surface::LeftBelt : Surface::RightBelt;
}

double contact_friction(int leg, const Scenario& sc, const SimConfig& cfg) {
  if (sc.slip_foot && *sc.slip_foot == leg) return sc.friction_override;
  return cfg.surface_mu;
}

void physics_tick(SimState& sim, const PhysicsInput& in, const Scenario& sc, const SimConfig& cfg,
                  const PhysicalParams& params) {
  const double dt = cfg.dt;
  RobotState& rs = sim.robot;

  // Contact forces: unilateral normal force, tangential force clipped to the cone.
  std::array<Vec3, kNumLegs> slip_deficit;
  slip_deficit.fill(Vec3::Zero());
  for (int i = 0; i < kNumLegs; ++i) {
    FootContact& c = sim.contacts[i];
    Vec3 f = Vec3::Zero();
    c.slipping = false;
    if (c.attached()) {
      const Vec3& cmd = in.foot_forces.f[i];
      if (cmd.z() > 0.0) {
        const double mu = contact_friction(i, sc, cfg);
        const Eigen::Vector2d t = cmd.head<2>();
        const double tn = t.norm();
        const double cap = mu * cmd.z();
        f = cmd;
        if (tn > cap) {
          const Eigen::Vector2d clipped = tn > 0.0 ? Eigen::Vector2d(t * (cap / tn)) : Eigen::Vector2d::Zero();
          f.head<2>() = clipped;
          slip_deficit[i].head<2>() = t - clipped;
          c.slipping = true;
        }
      }
    }
    sim.transmitted.f[i] = f;
  }

  // Body: semi-implicit Euler on the centroidal dynamics.
  const Vec6 acc = nonlinear_centroidal(rs, sim.transmitted, params);
  Vec3 v = rs.twist.head<3>() + acc.head<3>() * dt;
  Vec3 w = rs.twist.tail<3>() + acc.tail<3>() * dt;
  rs.twist.head<3>() = v;
  rs.twist.tail<3>() = w;
  rs.pose.position += v * dt;
  rs.pose.euler += omega_to_euler_rates(rs.pose.euler, w) * dt;
  rs.pose.euler.z() = wrap_angle(rs.pose.euler.z());

  const Mat3 R = rotation(rs.pose.euler);
  const double radius = workspace_radius(params);
  const double w2 = cfg.swing_omega * cfg.swing_omega;

  for (int i = 0; i < kNumLegs; ++i) {
    FootContact& c = sim.contacts[i];
    Vec3& p = rs.feet[i];
    Vec3& pv = sim.foot_velocities[i];
    if (c.attached()) {
      Vec3 anchor_vel = surface_velocity(c.attached_to, sc);
      // A slipping foot slides along the unresisted part of the force it pushes with.
      anchor_vel -= slip_deficit[i] / cfg.slip_damping;
      c.anchor += anchor_vel * dt;
      c.anchor.z() = 0.0;
      p = c.anchor - rs.pose.position;
      pv = anchor_vel - v;
      const Vec3 body = R.transpose() * p;
      if ((body - params.hip_offsets[i]).norm() > radius) {
        c.attached_to = Surface::None;
        c.dangling = true;
        c.can_land = false;
        c.slipping = false;
        Vec3 b = body;
        project_to_workspace(i, b, params, 0.999);
        p = R * b;
      }
      continue;
    }

    Vec3 target = in.swing_targets[i];
    if (c.can_land) target.z() -= cfg.touchdown_depth;
    const Vec3 a = w2 * (target - p) - 2.0 * cfg.swing_omega * pv;
    pv += a * dt;
    p += pv * dt;
    Vec3 body = R.transpose() * p;
    if (project_to_workspace(i, body, params, 0.999)) p = R * body;

    const double world_z = rs.pose.position.z() + p.z();
    if (c.can_land && world_z <= 0.0) {
      c.anchor = rs.pose.position + p;
      c.anchor.z() = 0.0;
      c.attached_to = surface_at(c.anchor, sc);
      c.can_land = false;
      c.dangling = false;
      p = c.anchor - rs.pose.position;
      pv = surface_velocity(c.attached_to, sc) - v;
    }
  }

  sim.joints = joints_from_feet(rs.feet, R, params);
  sim.time += dt;
  ++sim.tick;
}

SimState initial_state(const Scenario& sc, const SimConfig& cfg, const PhysicalParams& params,
                       const BodyPose& perturbation) {
  SimState s;
  s.robot.pose.position = Vec3(0.0, 0.0, cfg.initial_height) + perturbation.position;
  s.robot.pose.euler = Vec3(0.0, 0.0, sc.commanded_yaw) + perturbation.euler;
  s.robot.pose.euler.z() = wrap_angle(s.robot.pose.euler.z());
  const Mat3 rz = rot_z(s.robot.pose.yaw());
  for (int i = 0; i < kNumLegs; ++i) {
    Vec3 world = s.robot.pose.position + rz * params.default_feet[i];
    world.z() = 0.0;
    FootContact& c = s.contacts[i];
    c.anchor = world;
    c.attached_to = surface_at(world, sc);
    s.robot.feet[i] = world - s.robot.pose.position;
    s.foot_velocities[i] = surface_velocity(c.attached_to, sc);
  }
  s.joints = joints_from_feet(s.robot.feet, rotation(s.robot.pose.euler), params);
  return s;
}

bool has_fallen(const SimState& sim, const SimConfig& cfg) {
  const auto& pose = sim.robot.pose;
  return std::abs(pose.roll()) > cfg.fall_roll || std::abs(pose.pitch()) > cfg.fall_pitch ||
         pose.position.z() < cfg.fall_height || !pose.position.allFinite();
}

EnergyResult energy_metric(const EpisodeStats& stats, double dt, double window_seconds) {
  if (stats.fell) return {true, 0.0};
  if (stats.seconds(dt) + 1e-9 < window_seconds)
    throw EpisodeTooShort("energy_metric: episode ran " + std::to_string(stats.seconds(dt)) + " s");
  return {false, stats.mean_sq_torque()};
}

double primitive_reward(double mean_sq_torque, double mean_sq_velocity_error, double torque_penalty) {
  return 1.0 - torque_penalty * mean_sq_torque - mean_sq_velocity_error;
}

std::string observation_layout(bool observe_twist) { return observe_twist ? "obs-v1-twist" : "obs-v1"; }

int observation_dim(bool observe_twist) { return 4 + (observe_twist ? 6 : 0) + 12 + kNumPrimitives; }

Eigen::VectorXd observe(const SimState& sim, const Scenario& sc, int prev_action, const SimConfig& cfg,
                        const PhysicalParams& params) {
  const auto& rs = sim.robot;
  Eigen::VectorXd o(observation_dim(cfg.observe_twist));
  int k = 0;
  o[k++] = (rs.pose.position.z() - cfg.initial_height) * kHeightScale;
  o[k++] = rs.pose.roll() * kAngleScale;
  o[k++] = rs.pose.pitch() * kAngleScale;
  o[k++] = wrap_angle(rs.pose.yaw() - sc.commanded_yaw) * kAngleScale;
  const Mat3 rzt = rot_z(rs.pose.yaw()).transpose();
  if (cfg.observe_twist) {
    o.segment<3>(k) = rzt * rs.twist.head<3>() * kTwistScale;
    o.segment<3>(k + 3) = rzt * rs.twist.tail<3>() * kTwistScale;
    k += 6;
  }
  for (int i = 0; i < kNumLegs; ++i) {
    Vec3 rel = rzt * rs.feet[i] - params.default_feet[i];
    o.segment<3>(k) = rel * kFootScale;
    k += 3;
  }
  for (int a = 0; a < kNumPrimitives; ++a) o[k++] = a == prev_action ? 1.0 : 0.0;
  return o;
}

TreadmillEnv::TreadmillEnv(EnvConfig config) : config_(std::move(config)), controller_(config_.controller) {}

BodyCommand TreadmillEnv::default_command() const {
  return BodyCommand::hold(Vec3(0.0, 0.0, config_.sim.initial_height), scenario_.commanded_yaw);
}

Eigen::VectorXd TreadmillEnv::reset(const Scenario& scenario, const BodyPose& perturbation) {
  scenario.validate();
  scenario_ = scenario;
  sim_ = initial_state(scenario, config_.sim, config_.controller.params, perturbation);
  stats_ = EpisodeStats{};
  prev_action_ = kStand;
  done_ = false;
  controller_.reset();
  return observe();
}

Eigen::VectorXd TreadmillEnv::observe() const {
  return quadhrl::observe(sim_, scenario_, prev_action_, config_.sim, config_.controller.params);
}

StepResult TreadmillEnv::step(int action) { return step_high_level(action, default_command()); }

StepResult TreadmillEnv::step_high_level(int action, const BodyCommand& command) {
  if (done_) throw StepAfterDone();
  const Primitive& prim = primitive(action);
  const SimConfig& cfg = config_.sim;
  const PhysicalParams& params = config_.controller.params;

  for (int i = 0; i < kNumLegs; ++i) {
    FootContact& c = sim_.contacts[i];
    if (prim.is_swing(i)) {
      c.attached_to = Surface::None;
      c.dangling = false;
      c.can_land = false;
      c.slipping = false;
    } else if (!c.attached() && !c.dangling) {
      c.can_land = true;
    }
  }

  const int T = cfg.ticks_per_primitive;
  double sum_tau = 0.0, sum_verr = 0.0;
  int n = 0;
  bool fell = false;
  for (int k = 0; k < T; ++k) {
    const double phase = static_cast<double>(k + 1) / T;
    TickContext ctx;
    std::array<bool, kNumLegs> swing_mask{};
    for (int i = 0; i < kNumLegs; ++i) {
      FootContact& c = sim_.contacts[i];
      swing_mask[i] = prim.is_swing(i) || !c.attached();
      if (c.attached()) continue;
      if (prim.is_swing(i) && !c.dangling) {
        const double u = std::min(1.0, phase / cfg.swing_fraction);
        ctx.lift_fraction[i] = std::sin(kPi * u);
        c.can_land = u >= 0.5;
      } else if (c.dangling) {
        ctx.lift_fraction[i] = 1.0;
      }
    }
    ctx.foot_velocities = sim_.foot_velocities;
    const Primitive effective = Primitive::from_mask(swing_mask);
    const ControlOutput out = controller_.control_tick(sim_.robot, sim_.joints, command, effective, ctx);

    PhysicsInput in;
    in.torques = out.torques;
    in.foot_forces = out.foot_forces;
    in.swing_targets = out.swing_targets.targets;
    in.lift_fraction = ctx.lift_fraction;
    physics_tick(sim_, in, scenario_, cfg, params);

    const double tau2 = out.torques.squared_norm();
    const double verr = (command.target_twist.head<3>() - sim_.robot.twist.head<3>()).squaredNorm();
    sum_tau += tau2;
    sum_verr += verr;
    ++n;
    stats_.sum_sq_torque += tau2;
    ++stats_.ticks;
    if (config_.record_contacts)
      stats_.contact_log.push_back({sim_.tick, sim_.time, sim_.contact_flags(), action});
    if (has_fallen(sim_, cfg)) {
      fell = true;
      break;
    }
  }

  StepResult r;
  r.reward = primitive_reward(sum_tau / n, sum_verr / n, cfg.torque_penalty);
  r.fell = fell;
  r.truncated = !fell && sim_.time + 1e-9 >= cfg.episode_seconds;
  r.done = r.fell || r.truncated;
  stats_.total_reward += r.reward;
  stats_.fell = stats_.fell || fell;
  ++stats_.decisions;
  ++stats_.primitive_histogram[action];
  stats_.decision_log.push_back(action);
  prev_action_ = action;
  done_ = r.done;
  r.observation = observe();
  return r;
}

const std::array<double, 12>& training_yaws() {
  static const std::array<double, 12> yaws = [] {
    std::array<double, 12> y{};
    // 0, +-30, ..., +-150, 180 degrees
    int k = 0;
    y[k++] = 0.0;
    for (int d = 30; d <= 150; d += 30) {
      y[k++] = d * kPi / 180.0;
      y[k++] = -d * kPi / 180.0;
    }
    y[k++] = kPi;
    return y;
  }();
  return yaws;
}

void ScenarioDistribution::validate() const {
  if (!(max_speed >= 0.0)) throw std::invalid_argument("scenarios.max_speed must be >= 0");
  if (!(pause_probability >= 0.0 && pause_probability <= 1.0))
    throw std::invalid_argument("scenarios.pause_probability must be in [0, 1]");
}

Scenario sample_training_scenario(std::mt19937_64& rng, const ScenarioDistribution& dist) {
  std::uniform_real_distribution<double> speed(-dist.max_speed, dist.max_speed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> side(0, 1);
  std::uniform_int_distribution<int> yaw(0, 11);
  Scenario s;
  s.belt_speed_left = s.belt_speed_right = speed(rng);
  if (unit(rng) < dist.pause_probability) {
    if (side(rng) == 0)
      s.left_active = false;
    else
      s.right_active = false;
  }
  s.commanded_yaw = training_yaws()[yaw(rng)];
  return s;
}

BodyPose sample_perturbation(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BodyPose p;
  p.position = scale * Vec3(0.01 * u(rng), 0.01 * u(rng), 0.005 * u(rng));
  p.euler = scale * Vec3(0.02 * u(rng), 0.02 * u(rng), 0.02 * u(rng));
  return p;
}

}  // namespace quadhrl
