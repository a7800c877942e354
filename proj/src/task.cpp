#include "quadhrl/task.hpp"

namespace quadhrl {

TreadmillTask::TreadmillTask(EnvConfig config, ScenarioDistribution distribution, double perturbation_scale)
    : env_(std::move(config)), distribution_(distribution), perturbation_scale_(perturbation_scale) {
  distribution_.validate();
}

Eigen::VectorXd TreadmillTask::reset(std::mt19937_64& rng) {
  const Scenario scenario = sample_training_scenario(rng, distribution_);
  const BodyPose perturbation = sample_perturbation(rng, perturbation_scale_);
  return env_.reset(scenario, perturbation);
}

EnvStep TreadmillTask::step(int action) {
  StepResult r = env_.step(action);
  EnvStep s;
  s.observation = std::move(r.observation);
  s.reward = r.reward;
  s.terminal = r.fell;
  s.done = r.done;
  return s;
}

LearnedPolicy::LearnedPolicy(MlpParams params) : params_(std::move(params)) {
  if (params_.shape().output != kNumPrimitives)
    throw DimensionMismatch("LearnedPolicy: network must have one output per primitive");
}

int LearnedPolicy::select(const TreadmillEnv& env) {
  return greedy_action(forward(params_, env.observe()));
}

}  // namespace quadhrl
