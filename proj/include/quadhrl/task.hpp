#pragma once

#include <random>
#include <string>

#include "quadhrl/dqn.hpp"
#include "quadhrl/high_level.hpp"
#include "quadhrl/sim.hpp"

namespace quadhrl {

/// The treadmill as a learning environment: every episode draws a training scenario
/// and a small initial perturbation. A fall is terminal, the time limit is not.
class TreadmillTask final : public Environment {
 public:
  explicit TreadmillTask(EnvConfig config = {}, ScenarioDistribution distribution = {}, double perturbation_scale = 1.0);

  int obs_dim() const override { return env_.obs_dim(); }
  int num_actions() const override { return kNumPrimitives; }
  Eigen::VectorXd reset(std::mt19937_64& rng) override;
  EnvStep step(int action) override;

  const TreadmillEnv& env() const { return env_; }

 private:
  TreadmillEnv env_;
  ScenarioDistribution distribution_;
  double perturbation_scale_;
};

/// Greedy primitive choice from a trained Q-network.
class LearnedPolicy final : public HighLevelPolicy {
 public:
  explicit LearnedPolicy(MlpParams params);

  int select(const TreadmillEnv& env) override;
  std::string name() const override { return "learned"; }
  const MlpParams& params() const { return params_; }

 private:
  MlpParams params_;
};

}  // namespace quadhrl
