#pragma once

#include <functional>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadhrl/mlp.hpp"

namespace quadhrl {

struct Transition {
  Eigen::VectorXd obs;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool terminal = false;
};

/// Fixed-capacity ring of transitions. push() is safe under concurrent producers.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  void clear();

  /// Uniform indices over filled slots, with replacement.
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
  const Transition& at(std::size_t i) const { return data_.at(i); }

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t cursor_ = 0;
  mutable std::mutex mutex_;
};

enum class Exploration { Paper, Boltzmann };
enum class ArgmaxNet { Online1, MinTargets };

Exploration parse_exploration(const std::string& s);
const char* to_string(Exploration e);
ArgmaxNet parse_argmax_net(const std::string& s);
const char* to_string(ArgmaxNet a);

struct DqnConfig {
  double nu = 5.0;
  int batch_size = 512;
  int samples_per_update = 100;
  int updates_per_round = 50;
  double gamma = 0.99;
  double rho = 0.995;
  double learning_rate = 3e-4;
  long max_samples = 500000;
  long replay_capacity = 100000;
  int hidden = 64;
  std::uint64_t seed = 0;
  Exploration exploration = Exploration::Paper;
  ArgmaxNet argmax_net = ArgmaxNet::Online1;

  void validate() const;
};

/// Paper: p_i ∝ exp(-nu Q_i / Q_max). Boltzmann: p_i ∝ exp(nu (Q_i - Q_max) / |Q_max|).
/// Uniform when |Q_max| <= 1e-9.
Eigen::VectorXd action_probabilities(const Eigen::VectorXd& q, double nu, Exploration mode = Exploration::Paper);
int sample_action(const Eigen::VectorXd& q, double nu, std::mt19937_64& rng,
                  Exploration mode = Exploration::Paper);
/// Argmax with ties to the lowest id.
int greedy_action(const Eigen::VectorXd& q);

struct TransitionBatch {
  Eigen::MatrixXd obs;       // obs_dim x B
  Eigen::VectorXi actions;   // B
  Eigen::VectorXd rewards;   // B
  Eigen::MatrixXd next_obs;  // obs_dim x B
  Eigen::VectorXd terminal;  // B, 1.0 when terminal

  static TransitionBatch gather(const ReplayBuffer& buffer, const std::vector<std::size_t>& idx);
  Eigen::Index size() const { return actions.size(); }
};

/// q_targ = r + (1 - d) gamma min_i Q_targ,i(s', a'), a' = argmax of online net 1
/// (or of the elementwise min of the targets under ArgmaxNet::MinTargets).
Eigen::VectorXd td_targets(const TransitionBatch& batch, const MlpParams& online1, const MlpParams& target1,
                           const MlpParams& target2, double gamma, ArgmaxNet argmax_net = ArgmaxNet::Online1);

/// target <- rho target + (1 - rho) online
void polyak_update(MlpParams& target, const MlpParams& online, double rho);

struct EnvStep {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool terminal = false;  // bootstrap is cut
  bool done = false;      // episode over (terminal or time limit)
};

/// Episodic environment with a discrete action set.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int obs_dim() const = 0;
  virtual int num_actions() const = 0;
  virtual Eigen::VectorXd reset(std::mt19937_64& rng) = 0;
  virtual EnvStep step(int action) = 0;
};

/// Two states, two actions, deterministic, never terminates on its own.
/// s0: a0 -> r 1, stay; a1 -> r 0, go to s1.  s1: a0 -> r 0, go to s0; a1 -> r 2, stay.
/// Episodes are truncated after `horizon` steps.
class ToyMdp final : public Environment {
 public:
  explicit ToyMdp(int horizon = 50) : horizon_(horizon) {}
  int obs_dim() const override { return 2; }
  int num_actions() const override { return 2; }
  Eigen::VectorXd reset(std::mt19937_64& rng) override;
  EnvStep step(int action) override;

  static Eigen::VectorXd encode(int state);
  /// Optimal Q by value iteration, rows = states, cols = actions.
  static Eigen::Matrix2d value_iteration(double gamma, double tol = 1e-12);

 private:
  int horizon_;
  int state_ = 0;
  int t_ = 0;
};

struct RoundLog {
  long round = 0;
  long samples = 0;
  double loss = 0.0;          // mean over the round's gradient steps, both networks summed
  double mean_return = 0.0;   // over episodes finished so far in this round window
  int episodes = 0;           // episodes finished during the round
  std::vector<long> action_counts;  // actions taken during the round
};

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, std::string dump)
      : std::runtime_error(what), dump_(std::move(dump)) {}
  const std::string& dump() const { return dump_; }

 private:
  std::string dump_;
};

/// Double-Q learner with two online and two target networks.
class DqnTrainer {
 public:
  DqnTrainer(const DqnConfig& config, int obs_dim, int num_actions);

  /// Interacts with `env` until `max_samples` total samples (or config.max_samples).
  /// `on_round` is called after every update round.
  void train(Environment& env, std::optional<long> max_samples = {},
             const std::function<void(const RoundLog&)>& on_round = {});

  /// One round of gradient steps on both online networks; returns the mean summed loss.
  double update_round();

  const DqnConfig& config() const { return config_; }
  const MlpParams& online(int i) const { return online_[i]; }
  const MlpParams& target(int i) const { return target_[i]; }
  MlpParams& online(int i) { return online_[i]; }
  MlpParams& target(int i) { return target_[i]; }
  const ReplayBuffer& replay() const { return replay_; }
  ReplayBuffer& replay() { return replay_; }
  long samples() const { return samples_; }
  long rounds() const { return rounds_; }
  long update_index() const { return update_index_; }
  std::mt19937_64& rng() { return rng_; }

  /// Binary checkpoint: magic, JSON header, raw little-endian doubles. Bit-exact.
  void save(const std::string& path, const std::string& obs_layout, const std::string& config_echo = "{}") const;
  /// Restores networks, optimizer state, counters and RNG. The replay buffer starts empty.
  void load(const std::string& path, const std::string& expected_layout);

 private:
  DqnConfig config_;
  MlpParams online_[2];
  MlpParams target_[2];
  AdamState adam_[2];
  ReplayBuffer replay_;
  std::mt19937_64 rng_;
  long samples_ = 0;
  long rounds_ = 0;
  long update_index_ = 0;  // j in the inner loop, counted globally
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointInfo {
  MlpShape shape;
  std::string obs_layout;
  std::uint64_t seed = 0;
  long samples = 0;
  std::string config_echo;
};

/// Reads only the header and online network 1 (for greedy evaluation).
MlpParams load_policy(const std::string& path, const std::string& expected_layout, CheckpointInfo* info = nullptr);

}  // namespace quadhrl
