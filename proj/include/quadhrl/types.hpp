#pragma once

#include <array>
#include <cstddef>

#include <Eigen/Dense>

namespace quadhrl {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat6x12 = Eigen::Matrix<double, 6, 12>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

inline constexpr int kNumLegs = 4;

// Foot / leg order used everywhere: LF, RF, LR, RR.
enum class Leg : int { LF = 0, RF = 1, LR = 2, RR = 3 };

inline constexpr std::array<const char*, kNumLegs> kLegNames = {"LF", "RF", "LR", "RR"};

inline constexpr bool is_left(int leg) { return leg == 0 || leg == 2; }
inline constexpr bool is_front(int leg) { return leg == 0 || leg == 1; }

using FootArray = std::array<Vec3, kNumLegs>;

inline FootArray zero_feet() {
  FootArray a;
  a.fill(Vec3::Zero());
  return a;
}

inline Vec12 stack(const FootArray& feet) {
  Vec12 v;
  for (int i = 0; i < kNumLegs; ++i) v.segment<3>(3 * i) = feet[i];
  return v;
}

inline FootArray unstack(const Vec12& v) {
  FootArray a;
  for (int i = 0; i < kNumLegs; ++i) a[i] = v.segment<3>(3 * i);
  return a;
}

// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

}  // namespace quadhrl
