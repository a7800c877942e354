#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "quadhrl/types.hpp"

namespace quadhrl {

/// Stance/swing contact configuration for the four feet (true = swing).
struct Primitive {
  int id = -1;  // index into primitive_table(), -1 for masks outside it
  std::array<bool, kNumLegs> swing{};

  bool is_swing(int leg) const { return swing[leg]; }
  bool is_stance(int leg) const { return !swing[leg]; }
  int num_stance() const;
  std::string_view name() const;

  static Primitive from_mask(std::array<bool, kNumLegs> swing);

  friend bool operator==(const Primitive& a, const Primitive& b) { return a.swing == b.swing; }
};

inline constexpr int kNumPrimitives = 9;

enum PrimitiveId : int { kStand = 0, kTrot1, kTrot2, kPace1, kPace2, kStep1, kStep2, kStep3, kStep4 };

/// The nine primitives in canonical id order.
const std::array<Primitive, kNumPrimitives>& primitive_table();

const Primitive& primitive(int id);

/// Cyclic primitive sequence for the fixed-gait baselines.
class GaitSchedule {
 public:
  explicit GaitSchedule(std::vector<int> sequence);

  static GaitSchedule standing();
  static GaitSchedule trotting();
  static GaitSchedule pacing();
  static GaitSchedule walking();

  /// Returns sequence[phase] and advances the phase cyclically.
  const Primitive& next();

  std::size_t phase() const { return phase_; }
  const std::vector<int>& sequence() const { return sequence_; }
  void reset() { phase_ = 0; }

 private:
  std::vector<int> sequence_;
  std::size_t phase_ = 0;
};

}  // namespace quadhrl
