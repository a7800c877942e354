#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadhrl/dqn.hpp"
#include "quadhrl/high_level.hpp"
#include "quadhrl/sim.hpp"

namespace quadhrl {

/// Invalid configuration; the message names the offending field by dotted path.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// slip_foot value that picks the slipping foot as seed_index mod 4.
inline constexpr int kSlipFootBySeed = -2;

/// Scenario fields as they appear in config files; yaw in degrees, slip_foot -1 for none.
struct ScenarioSpec {
  double belt_speed_left = 0.0;
  double belt_speed_right = 0.0;
  bool left_active = true;
  bool right_active = true;
  double yaw_deg = 0.0;
  bool bridge = false;
  int slip_foot = -1;
  double friction_override = 0.0;

  Scenario to_scenario(int seed_index = 0) const;
  bool operator==(const ScenarioSpec&) const = default;
};

/// Named scenarios: "static", "bridge", "banana_peel" (slip foot chosen per seed) or "custom".
ScenarioSpec scenario_preset(const std::string& name, const ScenarioSpec& custom, double bridge_speed);

struct CompareConfig {
  std::vector<std::string> controllers = {"standing", "trotting", "pacing", "walking", "heuristic"};
  std::string sweep = "speed";  // speed | yaw
  double speed_min = 0.0;
  double speed_max = 0.3;
  double speed_step = 0.05;
  double yaw_deg = 0.0;  // speed sweep
  std::string paused_belt = "none";  // speed sweep: none | left | right
  std::vector<double> yaws_deg;      // yaw sweep; empty means the 12 training yaws
  double yaw_sweep_speed = 0.2;
  std::string moving_belt = "right";  // yaw sweep: left | right
  int seeds = 10;

  bool operator==(const CompareConfig&) const = default;
};

struct TrainConfig {
  long samples = 100000;
  int checkpoint_every_rounds = 100;
  bool resume = false;

  bool operator==(const TrainConfig&) const = default;
};

struct EvalConfig {
  std::string scenario_set = "training_grid";  // training_grid | bridge | banana_peel | static
  std::vector<double> speeds = {-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3};
  int seeds = 10;

  bool operator==(const EvalConfig&) const = default;
};

struct RolloutConfig {
  std::string scenario = "static";  // static | bridge | banana_peel | custom
  ScenarioSpec custom;
  int seed_index = 0;
  int max_decisions = 0;  // 0 means the full episode

  bool operator==(const RolloutConfig&) const = default;
};

struct ExportQpConfig {
  int primitive = 0;
  int decisions = 0;  // Stand primitives simulated before the export

  bool operator==(const ExportQpConfig&) const = default;
};

struct RunConfig {
  PhysicalParams physical;
  GainSet gains;
  QpWeights weights;
  QpSettings qp;
  bool friction_as_printed = false;
  bool placement_from_odometry = true;
  SimConfig sim;
  DqnConfig dqn;
  ScenarioDistribution scenarios;
  double perturbation_scale = 1.0;
  double bridge_belt_speed = 0.2;
  std::string controller = "trotting";
  double heuristic_k_q = 5.0;
  SelectionMode heuristic_mode = SelectionMode::Min;
  std::string checkpoint;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  int jobs = 1;
  CompareConfig compare;
  TrainConfig train;
  EvalConfig eval;
  RolloutConfig rollout;
  ExportQpConfig export_qp;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  EnvConfig env_config() const;
};

/// Canonical JSON text of the full config (every field present).
std::string config_to_json(const RunConfig& config, int indent = 2);
/// Starts from defaults; unknown keys and mistyped values raise ConfigError.
RunConfig config_from_json(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
/// Applies "a.b.c=value" overrides. Values parse as JSON when possible, else as strings.
RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& overrides);

/// 16 hex digits identifying the resolved config.
std::string config_hash(const RunConfig& config);
std::string code_version();

/// Shortest decimal text that round-trips the double exactly.
std::string format_double(double v);

/// Output directory with the QUADHRL_OUTPUT_ROOT prefix applied to relative paths.
std::filesystem::path resolve_output_dir(const RunConfig& config);

std::unique_ptr<HighLevelPolicy> make_controller(const RunConfig& config, const std::string& name);

struct EpisodeOutcome {
  EpisodeStats stats;
  EnergyResult energy;
  double front_lift_fraction = 0.0;  // fraction of ticks with LF or RF airborne
  double stand_fraction = 0.0;       // fraction of decisions that chose Stand
};

/// One 10 s evaluation episode; the seed index selects the initial perturbation.
EpisodeOutcome run_episode(const RunConfig& config, const std::string& controller, const Scenario& scenario,
                           int seed_index, bool record_contacts = false, int max_decisions = 0);

/// Perturbation for (config.seed, seed_index).
BodyPose seed_perturbation(const RunConfig& config, int seed_index);

struct CellSummary {
  std::string controller;
  ScenarioSpec scenario;
  int seeds = 0;
  int falls = 0;
  double mean_energy = 0.0;  // over all seeds; meaningful only without falls
  double mean_return = 0.0;
  double mean_front_lift = 0.0;
  double mean_stand_fraction = 0.0;

  bool failed() const { return falls > 0; }
  double fall_rate() const { return seeds > 0 ? static_cast<double>(falls) / seeds : 0.0; }
};

/// Runs every (controller, scenario) cell over `seeds` seeds on `jobs` threads. Results are
/// in input order regardless of `jobs`.
std::vector<CellSummary> evaluate_cells(const RunConfig& config, const std::vector<std::string>& controllers,
                                        const std::vector<ScenarioSpec>& scenarios, int seeds, int jobs);

/// The compare grid described by config.compare.
std::vector<ScenarioSpec> compare_scenarios(const CompareConfig& compare);
/// Training scenario grid: speeds x {both, left paused, right paused} x 12 yaws.
std::vector<ScenarioSpec> training_grid(const std::vector<double>& speeds);

/// CSV text with a header row; energy is FAIL when any seed fell.
std::string cells_to_csv(const std::vector<CellSummary>& cells, const RunConfig& config);

struct TrainSummary {
  long samples = 0;
  long rounds = 0;
  std::filesystem::path checkpoint;
};

/// Trains the learned controller, writing checkpoint.bin, metrics.jsonl and config.json into
/// the output directory. Resumes from an existing checkpoint when config.train.resume is set.
TrainSummary run_train(const RunConfig& config, const std::function<void(const RoundLog&)>& progress = {});

/// Writes compare.csv; returns its path.
std::filesystem::path run_compare(const RunConfig& config);
/// Greedy evaluation of config.controller on config.eval.scenario_set; writes eval.csv.
std::filesystem::path run_eval(const RunConfig& config);
/// Writes contacts.jsonl and episode.json for one episode.
std::filesystem::path run_rollout(const RunConfig& config);
/// Writes the force QP (matrices, bounds, solution) as qp.json.
std::filesystem::path run_export_qp(const RunConfig& config);

}  // namespace quadhrl
