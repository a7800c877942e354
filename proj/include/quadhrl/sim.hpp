#pragma once

#include <array>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadhrl/controller.hpp"

namespace quadhrl {

/// Split-belt treadmill configuration for one episode.
///
/// A positive belt speed moves the belt surface toward world -x. The left belt
/// covers world y >= 0, the right belt y < 0. With `bridge`, the region x >= 0 is a
/// fixed surface at belt height.
struct Scenario {
  double belt_speed_left = 0.0;
  double belt_speed_right = 0.0;
  bool left_active = true;
  bool right_active = true;
  double commanded_yaw = 0.0;
  bool bridge = false;
  std::optional<int> slip_foot;
  double friction_override = 0.0;

  void validate() const;
  std::string describe() const;

  static Scenario both_belts(double speed, double yaw = 0.0);
};

enum class Surface { None, LeftBelt, RightBelt, Fixed };

const char* to_string(Surface s);

struct FootContact {
  Surface attached_to = Surface::None;
  Vec3 anchor = Vec3::Zero();  // world position while attached
  bool slipping = false;
  // Airborne feet: whether touchdown is allowed and whether the foot was carried
  // out of the workspace (it then waits for its next swing).
  bool can_land = false;
  bool dangling = false;

  bool attached() const { return attached_to != Surface::None; }
};

struct SimState {
  RobotState robot;
  JointState joints;
  std::array<FootContact, kNumLegs> contacts;
  FootArray foot_velocities = zero_feet();  // relative to the base, world axes
  FootForces transmitted;                   // forces the ground applied last tick
  double time = 0.0;
  long tick = 0;

  std::array<bool, kNumLegs> contact_flags() const;
};

struct SimConfig {
  double dt = 0.002;
  int ticks_per_primitive = 200;
  double episode_seconds = 10.0;
  double initial_height = 0.40;
  double fall_roll = 0.5;
  double fall_pitch = 0.5;
  double fall_height = 0.15;
  double swing_omega = 25.0;
  double touchdown_depth = 0.02;
  double swing_fraction = 0.7;  // part of the primitive spent lifting and lowering the foot
  double surface_mu = 1.0;
  double slip_damping = 20.0;  // N s/m, sliding resistance of a slipping foot
  double torque_penalty = 0.0025;
  bool observe_twist = false;

  int decisions_per_episode() const;
};

/// Per-tick actuation handed to the physics step.
struct PhysicsInput {
  JointTorques torques;
  FootForces foot_forces;  // commanded ground reaction forces
  FootArray swing_targets = zero_feet();
  std::array<double, kNumLegs> lift_fraction{};
};

/// Velocity of a surface point (world frame).
Vec3 surface_velocity(Surface s, const Scenario& scenario);
Surface surface_at(const Vec3& world_point, const Scenario& scenario);
double contact_friction(int leg, const Scenario& scenario, const SimConfig& config);

/// Advances the simulation by config.dt.
void physics_tick(SimState& sim, const PhysicsInput& input, const Scenario& scenario, const SimConfig& config,
                  const PhysicalParams& params);

/// Default standing state on the given scenario.
SimState initial_state(const Scenario& scenario, const SimConfig& config, const PhysicalParams& params,
                       const BodyPose& perturbation = {});

bool has_fallen(const SimState& sim, const SimConfig& config);

struct ContactRecord {
  long tick = 0;
  double time_s = 0.0;
  std::array<bool, kNumLegs> contacts{};
  int primitive_id = 0;
};

struct EpisodeStats {
  double total_reward = 0.0;
  double sum_sq_torque = 0.0;
  long ticks = 0;
  int decisions = 0;
  bool fell = false;
  std::array<int, kNumPrimitives> primitive_histogram{};
  std::vector<ContactRecord> contact_log;
  std::vector<int> decision_log;

  double mean_sq_torque() const { return ticks > 0 ? sum_sq_torque / static_cast<double>(ticks) : 0.0; }
  double seconds(double dt) const { return static_cast<double>(ticks) * dt; }
};

class EpisodeTooShort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepAfterDone : public std::logic_error {
 public:
  StepAfterDone() : std::logic_error("step_high_level called after the episode ended") {}
};

struct EnergyResult {
  bool failed = false;
  double value = 0.0;
};

/// Mean squared joint-torque norm over the episode; falls are failures.
/// Throws EpisodeTooShort when the episode is shorter than `window_seconds` and did not fall.
EnergyResult energy_metric(const EpisodeStats& stats, double dt, double window_seconds = 10.0);

/// Reward: 1 - c * mean ||tau||^2 - mean ||v_d - v||^2.
double primitive_reward(double mean_sq_torque, double mean_sq_velocity_error, double torque_penalty);

struct EnvConfig {
  ControllerConfig controller;
  SimConfig sim;
  bool record_contacts = false;
};

struct StepResult {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool done = false;
  bool fell = false;
  bool truncated = false;  // time limit reached without a fall
};

/// Observation layout version string; differs with and without twist.
std::string observation_layout(bool observe_twist);
int observation_dim(bool observe_twist);

/// Observation: height, roll, pitch, wrapped yaw error, optional twist, foot positions in
/// the heading frame relative to their defaults, one-hot of the previous primitive.
Eigen::VectorXd observe(const SimState& sim, const Scenario& scenario, int prev_action, const SimConfig& config,
                        const PhysicalParams& params);

/// Treadmill environment driven at the primitive rate.
class TreadmillEnv {
 public:
  explicit TreadmillEnv(EnvConfig config = {});

  Eigen::VectorXd reset(const Scenario& scenario, const BodyPose& perturbation = {});
  StepResult step_high_level(int action, const BodyCommand& command);
  /// Steps with the default command: hold the origin at the commanded yaw.
  StepResult step(int action);

  BodyCommand default_command() const;
  Eigen::VectorXd observe() const;

  bool done() const { return done_; }
  const SimState& sim() const { return sim_; }
  const Scenario& scenario() const { return scenario_; }
  const EpisodeStats& stats() const { return stats_; }
  const EnvConfig& config() const { return config_; }
  LowLevelController& controller() { return controller_; }
  const LowLevelController& controller() const { return controller_; }
  int prev_action() const { return prev_action_; }
  int obs_dim() const { return observation_dim(config_.sim.observe_twist); }

 private:
  EnvConfig config_;
  LowLevelController controller_;
  Scenario scenario_;
  SimState sim_;
  EpisodeStats stats_;
  int prev_action_ = kStand;
  bool done_ = true;
};

struct ScenarioDistribution {
  double max_speed = 0.3;
  double pause_probability = 1.0 / 3.0;

  void validate() const;
};

/// Uniform belt speed in [-max_speed, max_speed] shared by both belts, one side paused
/// with `pause_probability`, yaw from a 30-degree grid.
Scenario sample_training_scenario(std::mt19937_64& rng, const ScenarioDistribution& dist = {});

/// Small random initial pose offset used to distinguish evaluation seeds.
BodyPose sample_perturbation(std::mt19937_64& rng, double scale = 1.0);

/// The 12 commanded yaws used in training, radians.
const std::array<double, 12>& training_yaws();

}  // namespace quadhrl
