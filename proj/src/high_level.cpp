#include "quadhrl/high_level.hpp"

#include <stdexcept>

namespace quadhrl {

FixedGaitPolicy::FixedGaitPolicy(std::string name, GaitSchedule schedule)
    : name_(std::move(name)), schedule_(std::move(schedule)) {}

SelectionMode parse_selection_mode(const std::string& s) {
  if (s == "min") return SelectionMode::Min;
  if (s == "max") return SelectionMode::Max;
  throw std::invalid_argument("selection mode must be min or max, got '" + s + "'");
}

const char* to_string(SelectionMode m) { return m == SelectionMode::Min ? "min" : "max"; }

double heuristic_q(double qp_cost, const std::array<double, kNumLegs>& foot_errors, double k_q) {
  double s = 0.0;
  for (double e : foot_errors) s += e;
  return qp_cost + k_q * s;
}

HeuristicEvaluation heuristic_evaluate(const LowLevelController& controller, const RobotState& state,
                                       const BodyCommand& command, double k_q, SelectionMode mode) {
  const auto& cfg = controller.config();
  const SwingTargets targets = swing_targets(state, command, cfg.params, cfg.gains);
  std::array<double, kNumLegs> err{};
  for (int j = 0; j < kNumLegs; ++j) err[j] = (targets.targets[j] - state.feet[j]).norm();

  HeuristicEvaluation ev;
  for (const Primitive& p : primitive_table()) {
    std::array<double, kNumLegs> e{};
    for (int j = 0; j < kNumLegs; ++j) e[j] = p.is_stance(j) ? err[j] : 0.0;
    ev.qp_cost[p.id] = controller.evaluate_qp_cost(state, command, p);
    ev.q[p.id] = heuristic_q(ev.qp_cost[p.id], e, k_q);
  }
  int best = 0;
  for (int i = 1; i < kNumPrimitives; ++i) {
    const bool better = mode == SelectionMode::Min ? ev.q[i] < ev.q[best] : ev.q[i] > ev.q[best];
    if (better) best = i;
  }
  ev.selected = best;
  return ev;
}

int heuristic_select(const LowLevelController& controller, const RobotState& state, const BodyCommand& command,
                     double k_q, SelectionMode mode) {
  return heuristic_evaluate(controller, state, command, k_q, mode).selected;
}

int HeuristicPolicy::select(const TreadmillEnv& env) {
  return heuristic_select(env.controller(), env.sim().robot, env.default_command(), k_q_, mode_);
}

std::unique_ptr<HighLevelPolicy> make_baseline(const std::string& name, double k_q, SelectionMode mode) {
  if (name == "standing") return std::make_unique<FixedGaitPolicy>(name, GaitSchedule::standing());
  if (name == "trotting") return std::make_unique<FixedGaitPolicy>(name, GaitSchedule::trotting());
  if (name == "pacing") return std::make_unique<FixedGaitPolicy>(name, GaitSchedule::pacing());
  if (name == "walking") return std::make_unique<FixedGaitPolicy>(name, GaitSchedule::walking());
  if (name == "heuristic") return std::make_unique<HeuristicPolicy>(k_q, mode);
  throw std::invalid_argument("unknown baseline controller '" + name + "'");
}

}  // namespace quadhrl
