#include "quadhrl/harness.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "quadhrl/task.hpp"

#ifndef QUADHRL_VERSION
#define QUADHRL_VERSION "0.0.0"
#endif

namespace quadhrl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kPiH = 3.14159265358979323846;

// ---- field codecs ----------------------------------------------------------

[[noreturn]] void type_error(const char* expected) { throw ConfigError(std::string("expected ") + expected); }

json encode(double v) { return v; }
json encode(int v) { return v; }
json encode(long v) { return v; }
json encode(bool v) { return v; }
json encode(std::uint64_t v) { return v; }
json encode(const std::string& v) { return v; }
json encode(Exploration v) { return to_string(v); }
json encode(ArgmaxNet v) { return to_string(v); }
json encode(SelectionMode v) { return to_string(v); }

template <int N>
json encode(const Eigen::Matrix<double, N, 1>& v) {
  json a = json::array();
  for (int i = 0; i < N; ++i) a.push_back(v[i]);
  return a;
}

json encode(const Mat3& m) {
  json a = json::array();
  for (int r = 0; r < 3; ++r) a.push_back(encode(Vec3(m.row(r).transpose())));
  return a;
}

json encode(const FootArray& f) {
  json a = json::array();
  for (const auto& p : f) a.push_back(encode(p));
  return a;
}

json encode(const std::vector<double>& v) { return v; }
json encode(const std::vector<std::string>& v) { return v; }

void decode(const json& j, double& v) {
  if (!j.is_number()) type_error("a number");
  v = j.get<double>();
}

void decode(const json& j, int& v) {
  if (!j.is_number_integer()) type_error("an integer");
  const auto x = j.get<std::int64_t>();
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) type_error("a 32-bit integer");
  v = static_cast<int>(x);
}

void decode(const json& j, long& v) {
  if (!j.is_number_integer()) type_error("an integer");
  v = j.get<long>();
}

void decode(const json& j, std::uint64_t& v) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    type_error("a non-negative integer");
  v = j.get<std::uint64_t>();
}

void decode(const json& j, bool& v) {
  if (!j.is_boolean()) type_error("true or false");
  v = j.get<bool>();
}

void decode(const json& j, std::string& v) {
  if (!j.is_string()) type_error("a string");
  v = j.get<std::string>();
}

template <class E, E (*Parse)(const std::string&)>
void decode_enum(const json& j, E& v) {
  if (!j.is_string()) type_error("a string");
  try {
    v = Parse(j.get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void decode(const json& j, Exploration& v) { decode_enum<Exploration, parse_exploration>(j, v); }
void decode(const json& j, ArgmaxNet& v) { decode_enum<ArgmaxNet, parse_argmax_net>(j, v); }
void decode(const json& j, SelectionMode& v) { decode_enum<SelectionMode, parse_selection_mode>(j, v); }

template <int N>
void decode(const json& j, Eigen::Matrix<double, N, 1>& v) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N))
    type_error(("an array of " + std::to_string(N) + " numbers").c_str());
  for (int i = 0; i < N; ++i) decode(j[i], v[i]);
}

void decode(const json& j, Mat3& m) {
  if (!j.is_array() || j.size() != 3) type_error("a 3x3 array");
  for (int r = 0; r < 3; ++r) {
    Vec3 row;
    decode(j[r], row);
    m.row(r) = row.transpose();
  }
}

void decode(const json& j, FootArray& f) {
  if (!j.is_array() || j.size() != kNumLegs) type_error("an array of 4 three-vectors");
  for (int i = 0; i < kNumLegs; ++i) decode(j[i], f[i]);
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Lists also accept a comma-separated string, which keeps command-line overrides short.
void decode(const json& j, std::vector<double>& v) {
  v.clear();
  if (j.is_string()) {
    for (const auto& item : split_commas(j.get<std::string>())) {
      try {
        std::size_t pos = 0;
        v.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        type_error("a list of numbers");
      }
    }
    return;
  }
  if (!j.is_array()) type_error("a list of numbers");
  for (const auto& x : j) {
    double d;
    decode(x, d);
    v.push_back(d);
  }
}

void decode(const json& j, std::vector<std::string>& v) {
  v.clear();
  if (j.is_string()) {
    v = split_commas(j.get<std::string>());
    return;
  }
  if (!j.is_array()) type_error("a list of strings");
  for (const auto& x : j) {
    std::string s;
    decode(x, s);
    v.push_back(s);
  }
}

json::json_pointer pointer(const std::string& dotted) {
  std::string p;
  for (const auto& part : [&] {
         std::vector<std::string> parts;
         std::string item;
         std::istringstream ss(dotted);
         while (std::getline(ss, item, '.')) parts.push_back(item);
         return parts;
       }())
    p += "/" + part;
  return json::json_pointer(p);
}

struct Writer {
  json root = json::object();
  template <class T>
  void operator()(const char* path, const T& v) {
    root[pointer(path)] = encode(v);
  }
};

struct Reader {
  const json& root;
  template <class T>
  void operator()(const char* path, T& v) {
    const auto ptr = pointer(path);
    if (!root.contains(ptr)) return;
    try {
      decode(root.at(ptr), v);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(path) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(std::string(path) + ": " + e.what());
    }
  }
};

struct PathCollector {
  std::set<std::string> paths;
  template <class T>
  void operator()(const char* path, const T&) {
    paths.insert(path);
  }
};

template <class V, class S>
void visit_scenario(V& v, const std::string& prefix, S& s) {
  auto p = [&](const char* f) { return prefix + f; };
  v(p("belt_speed_left").c_str(), s.belt_speed_left);
  v(p("belt_speed_right").c_str(), s.belt_speed_right);
  v(p("left_active").c_str(), s.left_active);
  v(p("right_active").c_str(), s.right_active);
  v(p("yaw_deg").c_str(), s.yaw_deg);
  v(p("bridge").c_str(), s.bridge);
  v(p("slip_foot").c_str(), s.slip_foot);
  v(p("friction_override").c_str(), s.friction_override);
}

// One list of every config field; the writer, reader and path collector all walk it.
template <class V, class C>
void visit(V& v, C& c) {
  v("physical.mass", c.physical.mass);
  v("physical.body_inertia", c.physical.body_inertia);
  v("physical.gravity", c.physical.gravity);
  v("physical.friction_mu", c.physical.friction_mu);
  v("physical.fz_min", c.physical.fz_min);
  v("physical.default_feet", c.physical.default_feet);
  v("physical.hip_offsets", c.physical.hip_offsets);
  v("physical.leg.thigh", c.physical.leg.thigh);
  v("physical.leg.shank", c.physical.leg.shank);
  v("physical.leg.abduction", c.physical.leg.abduction);
  v("physical.leg.hip_roll_limit", c.physical.leg.hip_roll_limit);
  v("physical.leg.hip_pitch_limit", c.physical.leg.hip_pitch_limit);
  v("physical.leg.knee_min", c.physical.leg.knee_min);
  v("physical.leg.knee_max", c.physical.leg.knee_max);
  v("physical.leg.torque_limit", c.physical.leg.torque_limit);

  v("gains.pose_kp", c.gains.pose_kp);
  v("gains.pose_kd", c.gains.pose_kd);
  v("gains.swing_kp", c.gains.swing_kp);
  v("gains.swing_kd", c.gains.swing_kd);
  v("gains.placement_gain", c.gains.placement_gain);
  v("gains.swing_apex", c.gains.swing_apex);

  v("weights.Q", c.weights.Q);
  v("weights.R", c.weights.R);

  v("qp.rho", c.qp.rho);
  v("qp.sigma", c.qp.sigma);
  v("qp.alpha", c.qp.alpha);
  v("qp.eps_abs", c.qp.eps_abs);
  v("qp.eps_infeasible", c.qp.eps_infeasible);
  v("qp.max_iterations", c.qp.max_iterations);
  v("qp.rho_update_interval", c.qp.rho_update_interval);
  v("qp.scaling_iterations", c.qp.scaling_iterations);
  v("qp.polish", c.qp.polish);
  v("qp.polish_feasibility_tol", c.qp.polish_feasibility_tol);

  v("controller_options.friction_as_printed", c.friction_as_printed);
  v("controller_options.placement_from_odometry", c.placement_from_odometry);

  v("sim.dt", c.sim.dt);
  v("sim.ticks_per_primitive", c.sim.ticks_per_primitive);
  v("sim.episode_seconds", c.sim.episode_seconds);
  v("sim.initial_height", c.sim.initial_height);
  v("sim.fall_roll", c.sim.fall_roll);
  v("sim.fall_pitch", c.sim.fall_pitch);
  v("sim.fall_height", c.sim.fall_height);
  v("sim.swing_omega", c.sim.swing_omega);
  v("sim.touchdown_depth", c.sim.touchdown_depth);
  v("sim.swing_fraction", c.sim.swing_fraction);
  v("sim.surface_mu", c.sim.surface_mu);
  v("sim.slip_damping", c.sim.slip_damping);
  v("sim.torque_penalty", c.sim.torque_penalty);
  v("sim.observe_twist", c.sim.observe_twist);

  v("dqn.nu", c.dqn.nu);
  v("dqn.batch_size", c.dqn.batch_size);
  v("dqn.samples_per_update", c.dqn.samples_per_update);
  v("dqn.updates_per_round", c.dqn.updates_per_round);
  v("dqn.gamma", c.dqn.gamma);
  v("dqn.rho", c.dqn.rho);
  v("dqn.learning_rate", c.dqn.learning_rate);
  v("dqn.max_samples", c.dqn.max_samples);
  v("dqn.replay_capacity", c.dqn.replay_capacity);
  v("dqn.hidden", c.dqn.hidden);
  v("dqn.exploration", c.dqn.exploration);
  v("dqn.argmax_net", c.dqn.argmax_net);

  v("scenarios.max_speed", c.scenarios.max_speed);
  v("scenarios.pause_probability", c.scenarios.pause_probability);
  v("scenarios.perturbation_scale", c.perturbation_scale);
  v("scenarios.bridge_belt_speed", c.bridge_belt_speed);

  v("controller", c.controller);
  v("heuristic.k_q", c.heuristic_k_q);
  v("heuristic.mode", c.heuristic_mode);
  v("checkpoint", c.checkpoint);
  v("seed", c.seed);
  v("output_dir", c.output_dir);
  v("jobs", c.jobs);

  v("compare.controllers", c.compare.controllers);
  v("compare.sweep", c.compare.sweep);
  v("compare.speed_min", c.compare.speed_min);
  v("compare.speed_max", c.compare.speed_max);
  v("compare.speed_step", c.compare.speed_step);
  v("compare.yaw_deg", c.compare.yaw_deg);
  v("compare.paused_belt", c.compare.paused_belt);
  v("compare.yaws_deg", c.compare.yaws_deg);
  v("compare.yaw_sweep_speed", c.compare.yaw_sweep_speed);
  v("compare.moving_belt", c.compare.moving_belt);
  v("compare.seeds", c.compare.seeds);

  v("train.samples", c.train.samples);
  v("train.checkpoint_every_rounds", c.train.checkpoint_every_rounds);
  v("train.resume", c.train.resume);

  v("eval.scenario_set", c.eval.scenario_set);
  v("eval.speeds", c.eval.speeds);
  v("eval.seeds", c.eval.seeds);

  v("rollout.scenario", c.rollout.scenario);
  visit_scenario(v, "rollout.custom.", c.rollout.custom);
  v("rollout.seed_index", c.rollout.seed_index);
  v("rollout.max_decisions", c.rollout.max_decisions);

  v("export_qp.primitive", c.export_qp.primitive);
  v("export_qp.decisions", c.export_qp.decisions);
}

const std::set<std::string>& known_paths() {
  static const std::set<std::string> paths = [] {
    PathCollector pc;
    RunConfig c;
    visit(pc, c);
    return pc.paths;
  }();
  return paths;
}

bool is_prefix_of_known(const std::string& prefix) {
  const std::string p = prefix + ".";
  for (const auto& k : known_paths())
    if (k.compare(0, p.size(), p) == 0) return true;
  return false;
}

void check_unknown(const json& j, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (known_paths().count(path)) continue;
    if (is_prefix_of_known(path)) {
      if (!it.value().is_object()) throw ConfigError(path + ": expected an object");
      check_unknown(it.value(), path);
      continue;
    }
    throw ConfigError("unknown config field '" + path + "'");
  }
}

json to_json(const RunConfig& c) {
  Writer w;
  visit(w, c);
  return w.root;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

bool one_of(const std::string& s, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (s == o) return true;
  return false;
}

void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field + ": " + message);
}

void validate_controller_name(const std::string& name, const std::string& field) {
  require(one_of(name, {"standing", "trotting", "pacing", "walking", "heuristic", "learned"}), field,
          "unknown controller '" + name + "' (standing|trotting|pacing|walking|heuristic|learned)");
}

void validate_scenario_spec(const ScenarioSpec& s, const std::string& field) {
  require(s.slip_foot >= kSlipFootBySeed && s.slip_foot < kNumLegs, field + ".slip_foot",
          "must be -2 (per seed), -1 (none) or a leg index 0..3");
  require(s.friction_override >= 0.0, field + ".friction_override", "must be >= 0");
  require(std::isfinite(s.belt_speed_left) && std::isfinite(s.belt_speed_right), field, "belt speeds must be finite");
  require(std::isfinite(s.yaw_deg), field + ".yaw_deg", "must be finite");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

json meta_json(const RunConfig& config) {
  return {{"config_hash", config_hash(config)}, {"code_version", code_version()}};
}

// Prototype for building many policies of one kind; a checkpoint is read once.
struct ControllerFactory {
  std::string name;
  const RunConfig* config = nullptr;
  std::shared_ptr<const MlpParams> learned;

  ControllerFactory(const RunConfig& c, const std::string& n) : name(n), config(&c) {
    validate_controller_name(n, "controller");
    if (n == "learned") {
      if (c.checkpoint.empty()) throw ConfigError("checkpoint: the learned controller requires a checkpoint path");
      learned = std::make_shared<const MlpParams>(load_policy(c.checkpoint, observation_layout(c.sim.observe_twist)));
    }
  }

  std::unique_ptr<HighLevelPolicy> make() const {
    if (learned) return std::make_unique<LearnedPolicy>(*learned);
    return make_baseline(name, config->heuristic_k_q, config->heuristic_mode);
  }
};

EpisodeOutcome run_episode_with(const RunConfig& config, const ControllerFactory& factory, const Scenario& scenario,
                                int seed_index, bool record_contacts, int max_decisions) {
  EnvConfig ec = config.env_config();
  ec.record_contacts = true;
  TreadmillEnv env(ec);
  env.reset(scenario, seed_perturbation(config, seed_index));
  auto policy = factory.make();
  policy->reset();
  int decisions = 0;
  while (!env.done() && (max_decisions <= 0 || decisions < max_decisions)) {
    env.step(policy->select(env));
    ++decisions;
  }

  EpisodeOutcome out;
  out.stats = env.stats();
  if (max_decisions <= 0 || env.done()) {
    out.energy = energy_metric(out.stats, config.sim.dt, config.sim.episode_seconds);
  } else {
    out.energy = {out.stats.fell, out.stats.fell ? 0.0 : out.stats.mean_sq_torque()};
  }
  long lifted = 0;
  for (const auto& rec : out.stats.contact_log)
    if (!rec.contacts[0] || !rec.contacts[1]) ++lifted;
  out.front_lift_fraction =
      out.stats.contact_log.empty() ? 0.0 : static_cast<double>(lifted) / static_cast<double>(out.stats.contact_log.size());
  out.stand_fraction = out.stats.decisions > 0
                           ? static_cast<double>(out.stats.primitive_histogram[kStand]) / out.stats.decisions
                           : 0.0;
  if (!record_contacts) out.stats.contact_log.clear();
  return out;
}

double round_grid(double v) { return std::round(v * 1e9) / 1e9; }

}  // namespace

Scenario ScenarioSpec::to_scenario(int seed_index) const {
  Scenario s;
  s.belt_speed_left = belt_speed_left;
  s.belt_speed_right = belt_speed_right;
  s.left_active = left_active;
  s.right_active = right_active;
  s.commanded_yaw = yaw_deg * kPiH / 180.0;
  s.bridge = bridge;
  if (slip_foot == kSlipFootBySeed)
    s.slip_foot = ((seed_index % kNumLegs) + kNumLegs) % kNumLegs;
  else if (slip_foot >= 0)
    s.slip_foot = slip_foot;
  s.friction_override = friction_override;
  s.validate();
  return s;
}

ScenarioSpec scenario_preset(const std::string& name, const ScenarioSpec& custom, double bridge_speed) {
  ScenarioSpec s;
  if (name == "static") return s;
  if (name == "custom") return custom;
  if (name == "bridge") {
    s.bridge = true;
    s.belt_speed_left = s.belt_speed_right = bridge_speed;
    return s;
  }
  if (name == "banana_peel") {
    s.slip_foot = kSlipFootBySeed;
    s.friction_override = 0.0;
    return s;
  }
  throw ConfigError("scenario: unknown scenario '" + name + "' (static|bridge|banana_peel|custom)");
}

void RunConfig::validate() const {
  auto wrap = [](const std::string& field, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      const std::string msg = e.what();
      throw ConfigError(msg.rfind(field + ".", 0) == 0 ? msg : field + ": " + msg);
    }
  };
  wrap("physical", [&] { physical.validate(); });
  wrap("gains", [&] { gains.validate(); });
  wrap("weights", [&] { weights.validate(); });
  wrap("dqn", [&] { dqn.validate(); });
  wrap("scenarios", [&] { scenarios.validate(); });

  require(qp.rho > 0.0, "qp.rho", "must be positive");
  require(qp.sigma > 0.0, "qp.sigma", "must be positive");
  require(qp.alpha > 0.0 && qp.alpha < 2.0, "qp.alpha", "must be in (0, 2)");
  require(qp.eps_abs > 0.0, "qp.eps_abs", "must be positive");
  require(qp.eps_infeasible > 0.0, "qp.eps_infeasible", "must be positive");
  require(qp.max_iterations > 0, "qp.max_iterations", "must be positive");
  require(qp.rho_update_interval > 0, "qp.rho_update_interval", "must be positive");
  require(qp.scaling_iterations >= 0, "qp.scaling_iterations", "must be >= 0");
  require(qp.polish_feasibility_tol >= 0.0, "qp.polish_feasibility_tol", "must be >= 0");

  require(sim.dt > 0.0, "sim.dt", "must be positive");
  require(sim.ticks_per_primitive > 0, "sim.ticks_per_primitive", "must be positive");
  require(sim.episode_seconds > 0.0, "sim.episode_seconds", "must be positive");
  require(sim.initial_height > 0.0, "sim.initial_height", "must be positive");
  require(sim.fall_roll > 0.0, "sim.fall_roll", "must be positive");
  require(sim.fall_pitch > 0.0, "sim.fall_pitch", "must be positive");
  require(sim.fall_height >= 0.0 && sim.fall_height < sim.initial_height, "sim.fall_height",
          "must be in [0, initial_height)");
  require(sim.swing_omega > 0.0, "sim.swing_omega", "must be positive");
  require(sim.touchdown_depth >= 0.0, "sim.touchdown_depth", "must be >= 0");
  require(sim.swing_fraction > 0.0 && sim.swing_fraction <= 1.0, "sim.swing_fraction", "must be in (0, 1]");
  require(sim.surface_mu >= 0.0, "sim.surface_mu", "must be >= 0");
  require(sim.slip_damping > 0.0, "sim.slip_damping", "must be positive");
  require(sim.torque_penalty >= 0.0, "sim.torque_penalty", "must be >= 0");

  require(perturbation_scale >= 0.0, "scenarios.perturbation_scale", "must be >= 0");
  require(std::isfinite(bridge_belt_speed), "scenarios.bridge_belt_speed", "must be finite");
  validate_controller_name(controller, "controller");
  require(heuristic_k_q >= 0.0, "heuristic.k_q", "must be >= 0");
  require(!output_dir.empty(), "output_dir", "must not be empty");
  require(jobs >= 1, "jobs", "must be >= 1");

  require(!compare.controllers.empty(), "compare.controllers", "must name at least one controller");
  for (const auto& c : compare.controllers) validate_controller_name(c, "compare.controllers");
  require(one_of(compare.sweep, {"speed", "yaw"}), "compare.sweep", "must be speed or yaw");
  require(compare.speed_step > 0.0, "compare.speed_step", "must be positive");
  require(compare.speed_max >= compare.speed_min, "compare.speed_max", "must be >= compare.speed_min");
  require(one_of(compare.paused_belt, {"none", "left", "right"}), "compare.paused_belt", "must be none, left or right");
  require(one_of(compare.moving_belt, {"left", "right"}), "compare.moving_belt", "must be left or right");
  require(compare.seeds > 0, "compare.seeds", "must be positive");

  require(train.samples >= 0, "train.samples", "must be >= 0");
  require(train.checkpoint_every_rounds > 0, "train.checkpoint_every_rounds", "must be positive");

  require(one_of(eval.scenario_set, {"training_grid", "bridge", "banana_peel", "static"}), "eval.scenario_set",
          "must be training_grid, bridge, banana_peel or static");
  require(!eval.speeds.empty(), "eval.speeds", "must not be empty");
  require(eval.seeds > 0, "eval.seeds", "must be positive");

  require(one_of(rollout.scenario, {"static", "bridge", "banana_peel", "custom"}), "rollout.scenario",
          "must be static, bridge, banana_peel or custom");
  validate_scenario_spec(rollout.custom, "rollout.custom");
  require(rollout.seed_index >= 0, "rollout.seed_index", "must be >= 0");
  require(rollout.max_decisions >= 0, "rollout.max_decisions", "must be >= 0");

  require(export_qp.primitive >= 0 && export_qp.primitive < kNumPrimitives, "export_qp.primitive", "must be in 0..8");
  require(export_qp.decisions >= 0, "export_qp.decisions", "must be >= 0");
}

EnvConfig RunConfig::env_config() const {
  EnvConfig ec;
  ec.controller.params = physical;
  ec.controller.gains = gains;
  ec.controller.weights = weights;
  ec.controller.qp = qp;
  ec.controller.friction_as_printed = friction_as_printed;
  ec.controller.placement_from_odometry = placement_from_odometry;
  ec.sim = sim;
  return ec;
}

std::string config_to_json(const RunConfig& config, int indent) { return to_json(config).dump(indent); }

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  check_unknown(j, "");
  RunConfig c;
  Reader r{j};
  visit(r, c);
  c.validate();
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& overrides) {
  if (overrides.empty()) return config;
  json j = to_json(config);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' must look like a.b.c=value");
    const std::string path = o.substr(0, eq);
    const std::string text = o.substr(eq + 1);
    if (!known_paths().count(path)) throw ConfigError("unknown config field '" + path + "'");
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    j[pointer(path)] = value;
  }
  return config_from_json(j.dump());
}

std::string config_hash(const RunConfig& config) {
  // Fields that cannot change results are left out so that reports compare byte-for-byte
  // across output locations and thread counts.
  json j = to_json(config);
  j.erase("output_dir");
  j.erase("jobs");
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a(j.dump());
  return ss.str();
}

std::string code_version() { return std::string("quadhrl ") + QUADHRL_VERSION; }

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

fs::path resolve_output_dir(const RunConfig& config) {
  fs::path dir(config.output_dir);
  if (dir.is_relative()) {
    if (const char* root = std::getenv("QUADHRL_OUTPUT_ROOT"); root && *root) dir = fs::path(root) / dir;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir;
}

std::unique_ptr<HighLevelPolicy> make_controller(const RunConfig& config, const std::string& name) {
  return ControllerFactory(config, name).make();
}

BodyPose seed_perturbation(const RunConfig& config, int seed_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(seed_index), 0x9e3779b9u};
  std::mt19937_64 rng(seq);
  return sample_perturbation(rng, config.perturbation_scale);
}

EpisodeOutcome run_episode(const RunConfig& config, const std::string& controller, const Scenario& scenario,
                           int seed_index, bool record_contacts, int max_decisions) {
  return run_episode_with(config, ControllerFactory(config, controller), scenario, seed_index, record_contacts,
                          max_decisions);
}

std::vector<CellSummary> evaluate_cells(const RunConfig& config, const std::vector<std::string>& controllers,
                                        const std::vector<ScenarioSpec>& scenarios, int seeds, int jobs) {
  if (seeds <= 0) throw ConfigError("seeds: must be positive");
  std::vector<ControllerFactory> factories;
  for (const auto& c : controllers) factories.emplace_back(config, c);

  struct Task {
    std::size_t controller, scenario;
    int seed;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < controllers.size(); ++c)
    for (std::size_t s = 0; s < scenarios.size(); ++s)
      for (int k = 0; k < seeds; ++k) tasks.push_back({c, s, k});

  struct Result {
    bool fell = false;
    double energy = 0.0, ret = 0.0, lift = 0.0, stand = 0.0;
  };
  std::vector<Result> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        const Task& t = tasks[i];
        const Scenario sc = scenarios[t.scenario].to_scenario(t.seed);
        const EpisodeOutcome o = run_episode_with(config, factories[t.controller], sc, t.seed, false, 0);
        results[i] = {o.energy.failed, o.energy.value, o.stats.total_reward, o.front_lift_fraction, o.stand_fraction};
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tasks.size();
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<CellSummary> cells;
  std::size_t i = 0;
  for (std::size_t c = 0; c < controllers.size(); ++c) {
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      CellSummary cell;
      cell.controller = controllers[c];
      cell.scenario = scenarios[s];
      cell.seeds = seeds;
      for (int k = 0; k < seeds; ++k, ++i) {
        const Result& r = results[i];
        if (r.fell) ++cell.falls;
        cell.mean_energy += r.energy;
        cell.mean_return += r.ret;
        cell.mean_front_lift += r.lift;
        cell.mean_stand_fraction += r.stand;
      }
      cell.mean_energy /= seeds;
      cell.mean_return /= seeds;
      cell.mean_front_lift /= seeds;
      cell.mean_stand_fraction /= seeds;
      cells.push_back(cell);
    }
  }
  return cells;
}

std::vector<ScenarioSpec> compare_scenarios(const CompareConfig& compare) {
  std::vector<ScenarioSpec> out;
  if (compare.sweep == "speed") {
    const long n = std::lround(std::floor((compare.speed_max - compare.speed_min) / compare.speed_step + 1e-9));
    for (long i = 0; i <= n; ++i) {
      ScenarioSpec s;
      s.belt_speed_left = s.belt_speed_right = round_grid(compare.speed_min + static_cast<double>(i) * compare.speed_step);
      s.yaw_deg = compare.yaw_deg;
      if (compare.paused_belt == "left") s.left_active = false;
      if (compare.paused_belt == "right") s.right_active = false;
      out.push_back(s);
    }
  } else {
    std::vector<double> yaws = compare.yaws_deg;
    if (yaws.empty())
      for (double y : training_yaws()) yaws.push_back(std::round(y * 180.0 / kPiH));
    for (double y : yaws) {
      ScenarioSpec s;
      s.belt_speed_left = s.belt_speed_right = compare.yaw_sweep_speed;
      if (compare.moving_belt == "right")
        s.left_active = false;
      else
        s.right_active = false;
      s.yaw_deg = y;
      out.push_back(s);
    }
  }
  return out;
}

std::vector<ScenarioSpec> training_grid(const std::vector<double>& speeds) {
  std::vector<ScenarioSpec> out;
  for (double v : speeds) {
    for (int pause = 0; pause < 3; ++pause) {
      for (double y : training_yaws()) {
        ScenarioSpec s;
        s.belt_speed_left = s.belt_speed_right = v;
        s.left_active = pause != 1;
        s.right_active = pause != 2;
        s.yaw_deg = std::round(y * 180.0 / kPiH);
        out.push_back(s);
      }
    }
  }
  return out;
}

std::string cells_to_csv(const std::vector<CellSummary>& cells, const RunConfig& config) {
  const std::string hash = config_hash(config);
  const std::string version = code_version();
  std::ostringstream out;
  out << "controller,belt_speed_left,belt_speed_right,left_active,right_active,yaw_deg,bridge,slip_foot,"
         "friction_override,seeds,falls,fall_rate,energy,mean_return,front_lift_fraction,stand_fraction,"
         "config_hash,code_version\n";
  for (const auto& c : cells) {
    const ScenarioSpec& s = c.scenario;
    out << c.controller << ',' << format_double(s.belt_speed_left) << ',' << format_double(s.belt_speed_right) << ','
        << (s.left_active ? 1 : 0) << ',' << (s.right_active ? 1 : 0) << ',' << format_double(s.yaw_deg) << ','
        << (s.bridge ? 1 : 0) << ',' << (s.slip_foot == kSlipFootBySeed ? std::string("per_seed") : std::to_string(s.slip_foot))
        << ',' << format_double(s.friction_override) << ',' << c.seeds << ',' << c.falls << ','
        << format_double(c.fall_rate()) << ',' << (c.failed() ? std::string("FAIL") : format_double(c.mean_energy))
        << ',' << format_double(c.mean_return) << ',' << format_double(c.mean_front_lift) << ','
        << format_double(c.mean_stand_fraction) << ',' << hash << ',' << version << '\n';
  }
  return out.str();
}

TrainSummary run_train(const RunConfig& config, const std::function<void(const RoundLog&)>& progress) {
  const fs::path dir = resolve_output_dir(config);
  const fs::path ckpt = dir / "checkpoint.bin";
  const fs::path metrics = dir / "metrics.jsonl";
  const std::string layout = observation_layout(config.sim.observe_twist);
  const std::string echo = config_to_json(config, -1);
  write_text(dir / "config.json", config_to_json(config) + "\n");

  DqnConfig dc = config.dqn;
  dc.seed = config.seed;
  TreadmillTask task(config.env_config(), config.scenarios, config.perturbation_scale);
  DqnTrainer trainer(dc, task.obs_dim(), task.num_actions());

  const bool resuming = config.train.resume && fs::exists(ckpt);
  if (resuming) trainer.load(ckpt.string(), layout);

  std::ofstream log(metrics, resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw std::runtime_error("cannot write '" + metrics.string() + "'");
  const json meta = meta_json(config);

  try {
    trainer.train(task, config.train.samples, [&](const RoundLog& r) {
      json line = {{"round", r.round},       {"samples", r.samples},
                   {"loss", r.loss},         {"mean_return", r.mean_return},
                   {"episodes", r.episodes}, {"action_counts", r.action_counts}};
      line.update(meta);
      log << line.dump() << '\n';
      log.flush();
      if (r.round % config.train.checkpoint_every_rounds == 0) trainer.save(ckpt.string(), layout, echo);
      if (progress) progress(r);
    });
  } catch (const TrainingDiverged& e) {
    write_text(dir / "diverged.json", e.dump() + "\n");
    throw;
  }
  trainer.save(ckpt.string(), layout, echo);
  return {trainer.samples(), trainer.rounds(), ckpt};
}

fs::path run_compare(const RunConfig& config) {
  const fs::path dir = resolve_output_dir(config);
  const auto cells = evaluate_cells(config, config.compare.controllers, compare_scenarios(config.compare),
                                    config.compare.seeds, config.jobs);
  const fs::path path = dir / "compare.csv";
  write_text(path, cells_to_csv(cells, config));
  return path;
}

fs::path run_eval(const RunConfig& config) {
  const fs::path dir = resolve_output_dir(config);
  std::vector<ScenarioSpec> scenarios;
  if (config.eval.scenario_set == "training_grid")
    scenarios = training_grid(config.eval.speeds);
  else
    scenarios.push_back(scenario_preset(config.eval.scenario_set, {}, config.bridge_belt_speed));
  const auto cells = evaluate_cells(config, {config.controller}, scenarios, config.eval.seeds, config.jobs);
  const fs::path path = dir / "eval.csv";
  write_text(path, cells_to_csv(cells, config));
  return path;
}

fs::path run_rollout(const RunConfig& config) {
  const fs::path dir = resolve_output_dir(config);
  const ScenarioSpec spec = scenario_preset(config.rollout.scenario, config.rollout.custom, config.bridge_belt_speed);
  const Scenario scenario = spec.to_scenario(config.rollout.seed_index);
  const EpisodeOutcome o = run_episode(config, config.controller, scenario, config.rollout.seed_index, true,
                                       config.rollout.max_decisions);
  const json meta = meta_json(config);

  std::ostringstream contacts;
  contacts << json{{"meta", meta}}.dump() << '\n';
  for (const auto& r : o.stats.contact_log) {
    json rec = {{"tick", r.tick},
                {"time_s", r.time_s},
                {"contacts", {r.contacts[0], r.contacts[1], r.contacts[2], r.contacts[3]}},
                {"primitive_id", r.primitive_id}};
    contacts << rec.dump() << '\n';
  }
  write_text(dir / "contacts.jsonl", contacts.str());

  json ep = {{"controller", config.controller},
             {"scenario", scenario.describe()},
             {"seed_index", config.rollout.seed_index},
             {"fell", o.stats.fell},
             {"ticks", o.stats.ticks},
             {"decisions", o.stats.decisions},
             {"seconds", o.stats.seconds(config.sim.dt)},
             {"total_reward", o.stats.total_reward},
             {"mean_sq_torque", o.stats.mean_sq_torque()},
             {"energy", o.energy.failed ? json("FAIL") : json(o.energy.value)},
             {"front_lift_fraction", o.front_lift_fraction},
             {"stand_fraction", o.stand_fraction},
             {"primitive_histogram", o.stats.primitive_histogram},
             {"decision_log", o.stats.decision_log}};
  ep.update(meta);
  const fs::path path = dir / "episode.json";
  write_text(path, ep.dump(2) + "\n");
  return path;
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::isinf(v[i]))
      a.push_back(v[i] > 0 ? "inf" : "-inf");
    else
      a.push_back(v[i]);
  }
  return a;
}

}  // namespace

fs::path run_export_qp(const RunConfig& config) {
  const fs::path dir = resolve_output_dir(config);
  const ScenarioSpec spec = scenario_preset(config.rollout.scenario, config.rollout.custom, config.bridge_belt_speed);
  TreadmillEnv env(config.env_config());
  env.reset(spec.to_scenario(config.rollout.seed_index), seed_perturbation(config, config.rollout.seed_index));
  for (int k = 0; k < config.export_qp.decisions && !env.done(); ++k) env.step(kStand);

  const Primitive& prim = primitive(config.export_qp.primitive);
  const BodyCommand command = env.default_command();
  const QpProblem problem = env.controller().force_problem(env.sim().robot, command, prim);
  QpSolver solver(config.qp);
  const QpSolution sol = solver.solve(problem);

  json out = {{"primitive_id", prim.id},
              {"primitive", std::string(prim.name())},
              {"time_s", env.sim().time},
              {"P", matrix_json(problem.P)},
              {"q", vector_json(problem.q)},
              {"A", matrix_json(problem.A)},
              {"lower", vector_json(problem.lower)},
              {"upper", vector_json(problem.upper)},
              {"constant", problem.constant},
              {"solution", vector_json(sol.x)},
              {"multipliers", vector_json(sol.y)},
              {"status", to_string(sol.status)},
              {"iterations", sol.iterations},
              {"objective", problem.objective(sol.x)}};
  out.update(meta_json(config));
  const fs::path path = dir / "qp.json";
  write_text(path, out.dump(2) + "\n");
  return path;
}

}  // namespace quadhrl
