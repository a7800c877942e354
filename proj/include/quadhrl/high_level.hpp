#pragma once

#include <memory>
#include <string>

#include "quadhrl/primitives.hpp"
#include "quadhrl/sim.hpp"

namespace quadhrl {

/// Chooses one primitive per high-level step.
class HighLevelPolicy {
 public:
  virtual ~HighLevelPolicy() = default;
  virtual void reset() {}
  virtual int select(const TreadmillEnv& env) = 0;
  virtual std::string name() const = 0;
};

class FixedGaitPolicy final : public HighLevelPolicy {
 public:
  FixedGaitPolicy(std::string name, GaitSchedule schedule);

  void reset() override { schedule_.reset(); }
  int select(const TreadmillEnv&) override { return schedule_.next().id; }
  std::string name() const override { return name_; }

 private:
  std::string name_;
  GaitSchedule schedule_;
};

enum class SelectionMode { Min, Max };

SelectionMode parse_selection_mode(const std::string& s);
const char* to_string(SelectionMode m);

/// Q^ = J_QP + k_q * sum of foot position errors.
double heuristic_q(double qp_cost, const std::array<double, kNumLegs>& foot_errors, double k_q);

struct HeuristicEvaluation {
  std::array<double, kNumPrimitives> q{};
  std::array<double, kNumPrimitives> qp_cost{};
  int selected = kStand;
};

/// Scores all nine primitives at `state`. For each primitive only its stance feet
/// contribute position error, since swing feet move to their targets. Ties resolve to
/// the lowest id.
HeuristicEvaluation heuristic_evaluate(const LowLevelController& controller, const RobotState& state,
                                       const BodyCommand& command, double k_q, SelectionMode mode);

int heuristic_select(const LowLevelController& controller, const RobotState& state, const BodyCommand& command,
                     double k_q, SelectionMode mode);

class HeuristicPolicy final : public HighLevelPolicy {
 public:
  HeuristicPolicy(double k_q = 5.0, SelectionMode mode = SelectionMode::Min) : k_q_(k_q), mode_(mode) {}

  int select(const TreadmillEnv& env) override;
  std::string name() const override { return "heuristic"; }

 private:
  double k_q_;
  SelectionMode mode_;
};

/// standing | trotting | pacing | walking | heuristic
std::unique_ptr<HighLevelPolicy> make_baseline(const std::string& name, double k_q = 5.0,
                                               SelectionMode mode = SelectionMode::Min);

}  // namespace quadhrl
