#pragma once

#include <iosfwd>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace quadhrl {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// minimize 0.5 x'Px + q'x + constant  subject to  lower <= Ax <= upper.
///
/// Equality rows have lower == upper; one-sided rows use +-kInf.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd A;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  double constant = 0.0;

  int num_vars() const { return static_cast<int>(q.size()); }
  int num_constraints() const { return static_cast<int>(A.rows()); }

  /// Throws std::invalid_argument on inconsistent shapes, asymmetric P or lower > upper.
  void validate() const;

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x) + constant; }
};

enum class QpStatus { Solved, MaxIterations, Infeasible };

const char* to_string(QpStatus s);

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd y;  // constraint multipliers; > 0 at an active upper bound, < 0 at a lower one
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = kInf;
  double dual_residual = kInf;
  bool polished = false;
};

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-6;
  double eps_infeasible = 1e-7;
  int max_iterations = 4000;
  int rho_update_interval = 25;
  int scaling_iterations = 10;
  bool polish = true;
  // Polished iterates are only accepted when every bound holds to this tolerance.
  double polish_feasibility_tol = 1e-9;
};

/// Dense operator-splitting QP solver. Holds scratch workspace and the previous
/// solution for warm starts; use one instance per thread.
class QpSolver {
 public:
  explicit QpSolver(QpSettings settings = {});

  QpSolution solve(const QpProblem& problem);
  QpSolution solve(const QpProblem& problem, const Eigen::VectorXd& x0, const Eigen::VectorXd& y0);

  /// Warm-starts the next solve() from the last solution when dimensions match.
  void set_warm_start_enabled(bool on) { warm_start_ = on; }

  const QpSettings& settings() const { return settings_; }

 private:
  QpSolution run(const QpProblem& problem, const Eigen::VectorXd* x0, const Eigen::VectorXd* y0);
  void equilibrate(const QpProblem& problem);
  bool try_polish(const QpProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& z,
                  const Eigen::VectorXd& y, QpSolution& out) const;

  QpSettings settings_;
  bool warm_start_ = false;
  Eigen::VectorXd last_x_;
  Eigen::VectorXd last_y_;

  // Scaled problem data.
  Eigen::VectorXd D_, E_;
  double c_ = 1.0;
  Eigen::MatrixXd P_, A_;
  Eigen::VectorXd q_, l_, u_;
};

/// One-shot convenience wrapper.
QpSolution solve(const QpProblem& problem, const QpSettings& settings = {});

/// Unscaled residuals of (x, y) for the given problem.
double primal_residual(const QpProblem& problem, const Eigen::VectorXd& x);
double dual_residual(const QpProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Deterministic text dump: header line, then P, q, A, lower, upper row-major with
/// 17 significant digits; infinities written as inf / -inf.
void dump(std::ostream& os, const QpProblem& problem);
std::string dump(const QpProblem& problem);

}  // namespace quadhrl
