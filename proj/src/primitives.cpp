#include "quadhrl/primitives.hpp"

#include <algorithm>
#include <stdexcept>

namespace quadhrl {

namespace {

constexpr std::array<std::string_view, kNumPrimitives> kNames = {"Stand", "Trot1", "Trot2", "Pace1", "Pace2",
                                                                 "Step1", "Step2", "Step3", "Step4"};

std::array<Primitive, kNumPrimitives> make_table() {
  // Feet state per row, LF RF LR RR, 1 = swing.
  constexpr std::array<std::array<bool, 4>, kNumPrimitives> rows = {{
      {0, 0, 0, 0},
      {1, 0, 0, 1},
      {0, 1, 1, 0},
      {0, 1, 0, 1},
      {1, 0, 1, 0},
      {1, 0, 0, 0},
      {0, 1, 0, 0},
      {0, 0, 1, 0},
      {0, 0, 0, 1},
  }};
  std::array<Primitive, kNumPrimitives> t;
  for (int i = 0; i < kNumPrimitives; ++i) t[i] = Primitive{i, rows[i]};
  return t;
}

}  // namespace

int Primitive::num_stance() const { return static_cast<int>(std::count(swing.begin(), swing.end(), false)); }

std::string_view Primitive::name() const { return id >= 0 && id < kNumPrimitives ? kNames[id] : "custom"; }

Primitive Primitive::from_mask(std::array<bool, kNumLegs> swing) {
  for (const auto& p : primitive_table())
    if (p.swing == swing) return p;
  return Primitive{-1, swing};
}

const std::array<Primitive, kNumPrimitives>& primitive_table() {
  static const auto table = make_table();
  return table;
}

const Primitive& primitive(int id) {
  if (id < 0 || id >= kNumPrimitives) throw std::out_of_range("primitive id out of range");
  return primitive_table()[id];
}

GaitSchedule::GaitSchedule(std::vector<int> sequence) : sequence_(std::move(sequence)) {
  if (sequence_.empty()) throw std::invalid_argument("GaitSchedule: empty sequence");
  for (int id : sequence_) primitive(id);
}

GaitSchedule GaitSchedule::standing() { return GaitSchedule({kStand}); }
GaitSchedule GaitSchedule::trotting() { return GaitSchedule({kTrot1, kTrot2}); }
GaitSchedule GaitSchedule::pacing() { return GaitSchedule({kPace1, kPace2}); }
GaitSchedule GaitSchedule::walking() { return GaitSchedule({kStep1, kStep4, kStep2, kStep3}); }

const Primitive& GaitSchedule::next() {
  const Primitive& p = primitive(sequence_[phase_]);
  phase_ = (phase_ + 1) % sequence_.size();
  return p;
}

}  // namespace quadhrl
