#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "quadhrl/core_model.hpp"
#include "quadhrl/force_qp.hpp"
#include "quadhrl/qp.hpp"

using namespace quadhrl;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("unconstrained minimum") {
  QpProblem p;
  p.P = MatrixXd::Identity(3, 3);
  p.q = VectorXd::Zero(3);
  p.A = MatrixXd::Zero(0, 3);
  p.lower = p.upper = VectorXd::Zero(0);
  const QpSolution s = solve(p);
  CHECK(s.status == QpStatus::Solved);
  CHECK(s.x.norm() < 1e-12);
}

TEST_CASE("one active bound") {
  QpProblem p;
  p.P = MatrixXd::Identity(2, 2);
  p.q = VectorXd::Zero(2);
  p.q[0] = -2.0;
  p.A = MatrixXd::Zero(1, 2);
  p.A(0, 0) = 1.0;
  p.lower = VectorXd::Constant(1, -kInf);
  p.upper = VectorXd::Constant(1, 1.0);
  const QpSolution s = solve(p);
  REQUIRE(s.status == QpStatus::Solved);
  CHECK(std::abs(s.x[0] - 1.0) < 1e-8);
  CHECK(std::abs(s.x[1]) < 1e-8);
  CHECK(s.y[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("equality-only problems match the KKT linear system") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int k = 0; k < 50; ++k) {
    const int n = 2 + k % 9, m = 1 + k % std::max(1, n - 1);
    QpProblem p = oracle::random_qp(rng, n, m);
    for (int i = 0; i < m; ++i) p.lower[i] = p.upper[i] = g(rng);
    MatrixXd K = MatrixXd::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = p.P;
    K.topRightCorner(n, m) = p.A.transpose();
    K.bottomLeftCorner(m, n) = p.A;
    VectorXd rhs(n + m);
    rhs << -p.q, p.lower;
    const VectorXd sol = K.fullPivLu().solve(rhs);
    const QpSolution s = solve(p);
    REQUIRE(s.status == QpStatus::Solved);
    CHECK((s.x - sol.head(n)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("random QPs pass KKT and agree with the projected-gradient oracle") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dn(1, 12);
  for (int k = 0; k < 60; ++k) {
    const int n = dn(rng);
    const int m = std::uniform_int_distribution<int>(0, 2 * n)(rng);
    const QpProblem p = oracle::random_qp(rng, n, m);
    const QpSolution s = solve(p);
    REQUIRE(s.status == QpStatus::Solved);
    CHECK(oracle::kkt(p, s.x, s.y).worst() <= 1e-6);
    CHECK((s.x - oracle::projected_gradient(p)).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("solver is deterministic") {
  std::mt19937_64 rng(13);
  const QpProblem p = oracle::random_qp(rng, 8, 14);
  const QpSolution a = solve(p), b = solve(p);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("infeasible problems are reported") {
  QpProblem p;
  p.P = MatrixXd::Identity(1, 1);
  p.q = VectorXd::Zero(1);
  p.A = MatrixXd::Ones(2, 1);
  p.lower = (VectorXd(2) << 1.0, -kInf).finished();
  p.upper = (VectorXd(2) << kInf, -1.0).finished();
  CHECK(solve(p).status == QpStatus::Infeasible);
}

TEST_CASE("validation rejects malformed problems") {
  QpProblem p;
  p.P = MatrixXd::Identity(2, 2);
  p.P(0, 1) = 1.0;
  p.q = VectorXd::Zero(2);
  p.A = MatrixXd::Zero(0, 2);
  p.lower = p.upper = VectorXd::Zero(0);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.P = MatrixXd::Identity(2, 2);
  p.A = MatrixXd::Ones(1, 2);
  p.lower = VectorXd::Constant(1, 1.0);
  p.upper = VectorXd::Constant(1, 0.0);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("problem dump is deterministic text") {
  QpProblem p;
  p.P = MatrixXd::Identity(2, 2);
  p.q = VectorXd::Ones(2);
  p.A = MatrixXd::Identity(2, 2);
  p.lower = (VectorXd(2) << -kInf, 0.0).finished();
  p.upper = (VectorXd(2) << 1.0, kInf).finished();
  const std::string a = dump(p), b = dump(p);
  CHECK(a == b);
  CHECK(a.find("inf") != std::string::npos);
}

namespace {

struct ForceCase {
  PhysicalParams params;
  RobotState state;
  Mat6x12 M;
};

ForceCase symmetric_case() {
  ForceCase c;
  for (int i = 0; i < kNumLegs; ++i) c.state.feet[i] = c.params.default_feet[i];
  c.M = build_M(c.state, c.params);
  return c;
}

}  // namespace

TEST_CASE("force QP objective equals the weighted acceleration error") {
  ForceCase c = symmetric_case();
  QpWeights w;
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g;
  Vec6 ad;
  for (int i = 0; i < 6; ++i) ad[i] = g(rng);
  const QpProblem p = build_force_qp(ad, c.M, gravity_aug(c.params), primitive(kStand), w, {});
  for (int k = 0; k < 20; ++k) {
    Vec12 f;
    for (int i = 0; i < 12; ++i) f[i] = 30.0 * g(rng);
    const Vec6 e = c.M * f - gravity_aug(c.params) - ad;
    const double direct = e.dot(w.Q.asDiagonal() * e) + f.dot(w.R.asDiagonal() * f);
    CHECK(p.objective(f) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("all-swing mask forces zero") {
  ForceCase c = symmetric_case();
  const Primitive all = Primitive::from_mask({true, true, true, true});
  const QpSolution s = solve(build_force_qp(Vec6::Zero(), c.M, gravity_aug(c.params), all, {}, {}));
  REQUIRE(s.status == QpStatus::Solved);
  CHECK(s.x.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("symmetric stance shares the weight equally") {
  ForceCase c = symmetric_case();
  const QpWeights w;
  const QpSolution s = solve(build_force_qp(Vec6::Zero(), c.M, gravity_aug(c.params), primitive(kStand), w, {}));
  REQUIRE(s.status == QpStatus::Solved);
  // No bound is active here, so the regularized least-squares normal equations give the answer.
  const Eigen::Matrix<double, 12, 12> H = c.M.transpose() * w.Q.asDiagonal() * c.M + Eigen::Matrix<double, 12, 12>(w.R.asDiagonal());
  const Vec12 oracle_f = H.ldlt().solve(c.M.transpose() * w.Q.asDiagonal() * gravity_aug(c.params));
  for (int i = 0; i < kNumLegs; ++i) {
    CHECK(s.x[3 * i + 2] == doctest::Approx(c.params.weight() / 4).epsilon(1e-3));
    CHECK(s.x[3 * i + 2] == doctest::Approx(s.x[2]).epsilon(1e-6));
    CHECK(std::abs(s.x[3 * i]) < 1e-6);
    CHECK(std::abs(s.x[3 * i + 1]) < 1e-6);
  }
  CHECK((s.x - oracle_f).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero friction removes tangential force") {
  ForceCase c = symmetric_case();
  Vec6 ad = Vec6::Zero();
  ad[0] = 1.0;
  ad[1] = -0.5;
  FrictionModel fm;
  fm.mu = 0.0;
  const QpSolution s = solve(build_force_qp(ad, c.M, gravity_aug(c.params), primitive(kStand), {}, fm));
  REQUIRE(s.status == QpStatus::Solved);
  for (int i = 0; i < kNumLegs; ++i) {
    CHECK(std::abs(s.x[3 * i]) <= QpSettings{}.eps_abs);
    CHECK(std::abs(s.x[3 * i + 1]) <= QpSettings{}.eps_abs);
  }
}

TEST_CASE("swing zeroing and friction respect over random dynamics") {
  PhysicalParams params;
  std::mt19937_64 rng(16);
  std::normal_distribution<double> g;
  FrictionModel fm;
  QpSettings settings;
  settings.max_iterations = 20000;
  for (int k = 0; k < 300; ++k) {
    RobotState st;
    st.pose.euler.z() = g(rng);
    for (int i = 0; i < kNumLegs; ++i) st.feet[i] = rot_z(st.pose.euler.z()) * params.default_feet[i] + 0.03 * Vec3(g(rng), g(rng), g(rng));
    Vec6 ad;
    for (int i = 0; i < 6; ++i) ad[i] = 3.0 * g(rng);
    const Primitive& prim = primitive(k % kNumPrimitives);
    const QpSolution s = solve(build_force_qp(ad, build_M(st, params), gravity_aug(params), prim, {}, fm), settings);
    REQUIRE(s.status == QpStatus::Solved);
    for (int i = 0; i < kNumLegs; ++i) {
      const Vec3 f = s.x.segment<3>(3 * i);
      if (prim.is_swing(i)) {
        CHECK(f.cwiseAbs().maxCoeff() <= 1e-8);
      } else {
        CHECK(f.z() >= fm.fz_min - 1e-8);
        CHECK(std::abs(f.x()) <= fm.mu * f.z() + 1e-8);
        CHECK(std::abs(f.y()) <= fm.mu * f.z() + 1e-8);
      }
    }
  }
}

TEST_CASE("printed friction rows are available for comparison") {
  ForceCase c = symmetric_case();
  FrictionModel printed;
  printed.as_printed = true;
  const QpProblem a = build_force_qp(Vec6::Zero(), c.M, gravity_aug(c.params), primitive(kStand), {}, printed);
  const QpProblem b = build_force_qp(Vec6::Zero(), c.M, gravity_aug(c.params), primitive(kStand), {}, {});
  CHECK(a.num_constraints() == b.num_constraints());
  CHECK_FALSE(a.A.isApprox(b.A));
}
