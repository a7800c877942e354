#include "quadhrl/core_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace quadhrl {

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w <= 0.0) w += two_pi;
  return w - std::numbers::pi;
}

PhysicalParams::PhysicalParams() {
  constexpr double x = 0.21;
  constexpr double y = 0.13;
  constexpr double z = -0.40;
  constexpr double hip_y = y - 0.037;
  for (int i = 0; i < kNumLegs; ++i) {
    const double sx = is_front(i) ? 1.0 : -1.0;
    const double sy = is_left(i) ? 1.0 : -1.0;
    default_feet[i] = Vec3(sx * x, sy * y, z);
    hip_offsets[i] = Vec3(sx * x, sy * hip_y, 0.0);
  }
}

void PhysicalParams::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("PhysicalParams: " + what); };
  if (!(mass > 0.0) || !std::isfinite(mass)) fail("mass must be > 0");
  if (!body_inertia.allFinite()) fail("body_inertia must be finite");
  if ((body_inertia - body_inertia.transpose()).cwiseAbs().maxCoeff() > 1e-12) fail("body_inertia must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(body_inertia);
  if (eig.eigenvalues().minCoeff() <= 0.0) fail("body_inertia must be positive-definite");
  if (!gravity.allFinite()) fail("gravity must be finite");
  if (!(friction_mu >= 0.0)) fail("friction_mu must be >= 0");
  if (!(fz_min >= 0.0)) fail("fz_min must be >= 0");
  if (!(leg.thigh > 0.0 && leg.shank > 0.0)) fail("link lengths must be > 0");
  if (!(leg.knee_min > 0.0 && leg.knee_min < leg.knee_max && leg.knee_max < std::numbers::pi))
    fail("knee limits must satisfy 0 < min < max < pi");
  for (int i = 0; i < kNumLegs; ++i) {
    if (!default_feet[i].allFinite() || !hip_offsets[i].allFinite()) fail("foot/hip offsets must be finite");
  }
}

Vec6 gravity_aug(const PhysicalParams& params) {
  Vec6 g = Vec6::Zero();
  g.head<3>() = params.gravity;
  return g;
}

Mat3 rot_x(double phi) {
  const double c = std::cos(phi), s = std::sin(phi);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

Mat3 rot_y(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

Mat3 rot_z(double psi) {
  const double c = std::cos(psi), s = std::sin(psi);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

Mat3 rotation(const Vec3& euler) { return rot_z(euler.z()) * rot_y(euler.y()) * rot_x(euler.x()); }

Mat3 skew(const Vec3& p) {
  Mat3 s;
  s << 0, -p.z(), p.y(), p.z(), 0, -p.x(), -p.y(), p.x(), 0;
  return s;
}

Mat3 inertia_world(double psi, const Mat3& body_inertia) {
  const Mat3 rz = rot_z(psi);
  Mat3 I = rz * body_inertia * rz.transpose();
  return 0.5 * (I + I.transpose());
}

namespace {

Mat3 checked_inverse(const Mat3& I, const char* what) {
  Eigen::FullPivLU<Mat3> lu(I);
  if (!lu.isInvertible() || std::abs(lu.determinant()) < 1e-15) throw std::domain_error(what);
  return lu.inverse();
}

}  // namespace

Mat6x12 build_M(const RobotState& state, const PhysicalParams& params) {
  const Mat3 I_inv = checked_inverse(inertia_world(state.pose.yaw(), params.body_inertia), "build_M: singular inertia");
  Mat6x12 M;
  for (int i = 0; i < kNumLegs; ++i) {
    M.block<3, 3>(0, 3 * i) = Mat3::Identity() / params.mass;
    M.block<3, 3>(3, 3 * i) = I_inv * skew(state.feet[i]);
  }
  return M;
}

Vec6 linear_dynamics(const Mat6x12& M, const FootForces& f, const Vec6& g_aug) { return M * f.stacked() - g_aug; }

Vec6 nonlinear_centroidal(const RobotState& state, const FootForces& f, const PhysicalParams& params) {
  const Mat3 R = rotation(state.pose.euler);
  const Mat3 I = R * params.body_inertia * R.transpose();
  const Mat3 I_inv = checked_inverse(I, "nonlinear_centroidal: singular world inertia");
  Vec3 torque = Vec3::Zero();
  for (int i = 0; i < kNumLegs; ++i) torque += state.feet[i].cross(f.f[i]);
  Vec6 acc;
  acc.head<3>() = f.sum() / params.mass - params.gravity;
  acc.tail<3>() = I_inv * torque;
  return acc;
}

Vec3 euler_rates_to_omega(const Vec3& euler, const Vec3& euler_rates) { return rot_z(euler.z()) * euler_rates; }

Vec3 omega_to_euler_rates(const Vec3& euler, const Vec3& omega) { return rot_z(euler.z()).transpose() * omega; }

}  // namespace quadhrl
