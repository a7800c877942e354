#include "quadhrl/force_qp.hpp"

#include <stdexcept>

namespace quadhrl {

void QpWeights::validate() const {
  if ((Q.array() < 0.0).any() || (R.array() < 0.0).any()) throw std::invalid_argument("QpWeights: negative weight");
  if (!(Q.array() > 0.0).any()) throw std::invalid_argument("QpWeights: Q must have a positive entry");
}

QpProblem build_force_qp(const Vec6& accel_target, const Mat6x12& M, const Vec6& gravity_aug, const Primitive& primitive,
                         const QpWeights& weights, const FrictionModel& friction) {
  if (friction.fz_min < 0.0) throw std::invalid_argument("build_force_qp: fz_min must be >= 0");
  weights.validate();

  const Vec6 b = gravity_aug + accel_target;
  const auto Q = weights.Q.asDiagonal();

  QpProblem p;
  p.P = 2.0 * (M.transpose() * Q * M);
  p.P.diagonal() += 2.0 * weights.R;
  p.P = 0.5 * (p.P + p.P.transpose()).eval();
  p.q = -2.0 * M.transpose() * (Q * b);
  p.constant = b.dot(Q * b);

  const int stance = primitive.num_stance();
  const int m = 5 * stance + 3 * (kNumLegs - stance);
  p.A = Eigen::MatrixXd::Zero(m, 12);
  p.lower.resize(m);
  p.upper.resize(m);

  const double mu = friction.mu;
  int r = 0;
  for (int i = 0; i < kNumLegs; ++i) {
    const int x = 3 * i, y = x + 1, z = x + 2;
    if (primitive.is_swing(i)) {
      for (int k = 0; k < 3; ++k) {
        p.A(r, x + k) = 1.0;
        p.lower[r] = 0.0;
        p.upper[r] = 0.0;
        ++r;
      }
      continue;
    }
    p.A(r, z) = 1.0;
    p.lower[r] = friction.fz_min;
    p.upper[r] = kInf;
    ++r;
    for (int t : {x, y}) {
      if (!friction.as_printed) {
        // mu fz - ft >= 0 and mu fz + ft >= 0
        p.A(r, z) = mu;
        p.A(r, t) = -1.0;
        p.lower[r] = 0.0;
        p.upper[r] = kInf;
        ++r;
        p.A(r, z) = mu;
        p.A(r, t) = 1.0;
        p.lower[r] = 0.0;
        p.upper[r] = kInf;
        ++r;
      } else {
        // fz - mu ft <= 0 and fz + mu ft >= 0
        p.A(r, z) = 1.0;
        p.A(r, t) = -mu;
        p.lower[r] = -kInf;
        p.upper[r] = 0.0;
        ++r;
        p.A(r, z) = 1.0;
        p.A(r, t) = mu;
        p.lower[r] = 0.0;
        p.upper[r] = kInf;
        ++r;
      }
    }
  }
  return p;
}

}  // namespace quadhrl
