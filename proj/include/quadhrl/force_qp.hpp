#pragma once

#include "quadhrl/primitives.hpp"
#include "quadhrl/qp.hpp"
#include "quadhrl/types.hpp"

namespace quadhrl {

/// Diagonals of the acceleration-error weight Q and force weight R.
struct QpWeights {
  Vec6 Q = (Vec6() << 1, 1, 10, 20, 20, 5).finished();
  Vec12 R = Vec12::Constant(1e-4);

  void validate() const;
};

struct FrictionModel {
  double mu = 0.6;
  double fz_min = 5.0;
  // Reproduces the literal "-mu fx <= fz <= mu fx" rows instead of |fx| <= mu fz.
  bool as_printed = false;
};

/// Ground-reaction-force QP over f in R^12:
///   min ||M f - g~ - a_d||^2_Q + ||f||^2_R
/// with fz >= fz_min and the friction pyramid on stance feet, f = 0 on swing feet.
/// The returned problem's objective (including `constant`) equals that cost.
QpProblem build_force_qp(const Vec6& accel_target, const Mat6x12& M, const Vec6& gravity_aug, const Primitive& primitive,
                         const QpWeights& weights, const FrictionModel& friction);

}  // namespace quadhrl
