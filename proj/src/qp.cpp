#include "quadhrl/qp.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace quadhrl {

using Eigen::MatrixXd;
using Eigen::VectorXd;

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

void QpProblem::validate() const {
  const auto n = q.size();
  const auto m = A.rows();
  if (P.rows() != n || P.cols() != n) throw std::invalid_argument("QpProblem: P must be n x n");
  if (m > 0 && A.cols() != n) throw std::invalid_argument("QpProblem: A must have n columns");
  if (lower.size() != m || upper.size() != m) throw std::invalid_argument("QpProblem: bounds must have m entries");
  if (n > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-10) throw std::invalid_argument("QpProblem: P not symmetric");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (lower[i] > upper[i]) throw std::invalid_argument("QpProblem: lower > upper at row " + std::to_string(i));
    if (std::isnan(lower[i]) || std::isnan(upper[i])) throw std::invalid_argument("QpProblem: NaN bound");
  }
  if (!P.allFinite() || !q.allFinite() || !A.allFinite()) throw std::invalid_argument("QpProblem: non-finite data");
}

double primal_residual(const QpProblem& p, const VectorXd& x) {
  if (p.num_constraints() == 0) return 0.0;
  const VectorXd Ax = p.A * x;
  double r = 0.0;
  for (Eigen::Index i = 0; i < Ax.size(); ++i) {
    r = std::max(r, p.lower[i] - Ax[i]);
    r = std::max(r, Ax[i] - p.upper[i]);
  }
  return r;
}

double dual_residual(const QpProblem& p, const VectorXd& x, const VectorXd& y) {
  VectorXd g = p.P * x + p.q;
  if (p.num_constraints() > 0) g += p.A.transpose() * y;
  return g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings) {}

QpSolution QpSolver::solve(const QpProblem& problem) {
  const bool have_warm = warm_start_ && last_x_.size() == problem.num_vars() && last_y_.size() == problem.num_constraints();
  return have_warm ? run(problem, &last_x_, &last_y_) : run(problem, nullptr, nullptr);
}

QpSolution QpSolver::solve(const QpProblem& problem, const VectorXd& x0, const VectorXd& y0) {
  return run(problem, &x0, &y0);
}

void QpSolver::equilibrate(const QpProblem& p) {
  const int n = p.num_vars();
  const int m = p.num_constraints();
  P_ = p.P;
  q_ = p.q;
  A_ = p.A;
  D_ = VectorXd::Ones(n);
  E_ = VectorXd::Ones(m);
  c_ = 1.0;

  auto clip = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int it = 0; it < settings_.scaling_iterations; ++it) {
    VectorXd dd(n), de(m);
    for (int j = 0; j < n; ++j) {
      double nrm = P_.col(j).cwiseAbs().maxCoeff();
      if (m > 0) nrm = std::max(nrm, A_.col(j).cwiseAbs().maxCoeff());
      dd[j] = 1.0 / std::sqrt(clip(nrm));
    }
    for (int i = 0; i < m; ++i) de[i] = 1.0 / std::sqrt(clip(A_.row(i).cwiseAbs().maxCoeff()));
    P_ = dd.asDiagonal() * P_ * dd.asDiagonal();
    q_ = dd.cwiseProduct(q_);
    if (m > 0) A_ = de.asDiagonal() * A_ * dd.asDiagonal();
    D_ = D_.cwiseProduct(dd);
    E_ = E_.cwiseProduct(de);

    double mean_col = 0.0;
    for (int j = 0; j < n; ++j) mean_col += P_.col(j).cwiseAbs().maxCoeff();
    mean_col /= std::max(n, 1);
    const double qn = n ? q_.cwiseAbs().maxCoeff() : 0.0;
    const double gamma = 1.0 / clip(std::max(mean_col, qn));
    P_ *= gamma;
    q_ *= gamma;
    c_ *= gamma;
  }
  l_ = VectorXd(m);
  u_ = VectorXd(m);
  for (int i = 0; i < m; ++i) {
    l_[i] = std::isinf(p.lower[i]) ? p.lower[i] : p.lower[i] * E_[i];
    u_[i] = std::isinf(p.upper[i]) ? p.upper[i] : p.upper[i] * E_[i];
  }
}

bool QpSolver::try_polish(const QpProblem& p, const VectorXd& x, const VectorXd& z, const VectorXd& y,
                          QpSolution& out) const {
  (void)x;
  const int n = p.num_vars();
  const int m = p.num_constraints();
  // 0 inactive, -1 lower, +1 upper, 2 equality
  std::vector<int> kind(m, 0);
  int k = 0;
  for (int i = 0; i < m; ++i) {
    if (p.lower[i] == p.upper[i]) {
      kind[i] = 2;
    } else if (std::isfinite(p.lower[i]) && z[i] - p.lower[i] < -y[i]) {
      kind[i] = -1;
    } else if (std::isfinite(p.upper[i]) && p.upper[i] - z[i] < y[i]) {
      kind[i] = 1;
    }
    if (kind[i] != 0) ++k;
  }
  if (k > n + m) return false;

  const double delta = 1e-11;
  MatrixXd K = MatrixXd::Zero(n + k, n + k);
  VectorXd rhs(n + k);
  K.topLeftCorner(n, n) = p.P;
  rhs.head(n) = -p.q;
  std::vector<int> rows;
  rows.reserve(k);
  for (int i = 0; i < m; ++i) {
    if (kind[i] == 0) continue;
    const int r = n + static_cast<int>(rows.size());
    K.block(r, 0, 1, n) = p.A.row(i);
    K.block(0, r, n, 1) = p.A.row(i).transpose();
    rhs[r] = kind[i] == -1 ? p.lower[i] : p.upper[i];
    rows.push_back(i);
  }
  MatrixXd K_reg = K;
  K_reg.topLeftCorner(n, n).diagonal().array() += delta;
  K_reg.bottomRightCorner(k, k).diagonal().array() -= delta;
  Eigen::PartialPivLU<MatrixXd> lu(K_reg);
  VectorXd sol = lu.solve(rhs);
  for (int it = 0; it < 5; ++it) sol += lu.solve(rhs - K * sol);
  if (!sol.allFinite()) return false;

  VectorXd xp = sol.head(n);
  VectorXd yp = VectorXd::Zero(m);
  for (int r = 0; r < k; ++r) yp[rows[r]] = sol[n + r];
  const double sign_tol = settings_.eps_abs;
  for (int i = 0; i < m; ++i) {
    if (kind[i] == -1 && yp[i] > sign_tol) return false;
    if (kind[i] == 1 && yp[i] < -sign_tol) return false;
  }
  const double rp = primal_residual(p, xp);
  const double rd = dual_residual(p, xp, yp);
  if (rp > settings_.polish_feasibility_tol || rd > settings_.eps_abs) return false;
  out.x = std::move(xp);
  out.y = std::move(yp);
  out.primal_residual = rp;
  out.dual_residual = rd;
  out.polished = true;
  out.status = QpStatus::Solved;
  return true;
}

QpSolution QpSolver::run(const QpProblem& p, const VectorXd* x0, const VectorXd* y0) {
  p.validate();
  const int n = p.num_vars();
  const int m = p.num_constraints();
  equilibrate(p);

  const double rho_eq_scale = 1e3;
  const double rho_min = 1e-6, rho_max = 1e6;
  double rho = settings_.rho;
  VectorXd rho_vec(m);
  auto fill_rho = [&] {
    for (int i = 0; i < m; ++i) {
      if (std::isinf(l_[i]) && std::isinf(u_[i]))
        rho_vec[i] = rho_min;
      else if (l_[i] == u_[i])
        rho_vec[i] = rho_eq_scale * rho;
      else
        rho_vec[i] = rho;
    }
  };
  fill_rho();

  Eigen::LLT<MatrixXd> llt;
  auto factor = [&] {
    MatrixXd K = P_;
    K.diagonal().array() += settings_.sigma;
    if (m > 0) K.noalias() += A_.transpose() * rho_vec.asDiagonal() * A_;
    llt.compute(K);
  };
  factor();

  VectorXd x = VectorXd::Zero(n), z = VectorXd::Zero(m), y = VectorXd::Zero(m);
  if (x0 && x0->size() == n) {
    x = D_.cwiseInverse().cwiseProduct(*x0);
    if (m > 0) z = (A_ * x).cwiseMax(l_).cwiseMin(u_);
  }
  if (y0 && y0->size() == m) y = c_ * E_.cwiseInverse().cwiseProduct(*y0);

  QpSolution out;
  auto unscale = [&](VectorXd& xu, VectorXd& zu, VectorXd& yu) {
    xu = D_.cwiseProduct(x);
    zu = z.cwiseQuotient(E_);
    yu = E_.cwiseProduct(y) / c_;
  };
  auto finish = [&](QpStatus status, int iters) {
    VectorXd xu, zu, yu;
    unscale(xu, zu, yu);
    out.x = xu;
    out.y = yu;
    out.status = status;
    out.iterations = iters;
    out.primal_residual = m > 0 ? (p.A * xu - zu).cwiseAbs().maxCoeff() : 0.0;
    out.dual_residual = dual_residual(p, xu, yu);
    out.polished = false;
  };

  VectorXd xt(n), zt(m), z_relax(m), dy(m), rhs(n);
  const double alpha = settings_.alpha;
  const bool warm = x0 != nullptr;
  for (int k = 1; k <= settings_.max_iterations; ++k) {
    rhs = settings_.sigma * x - q_;
    if (m > 0) rhs.noalias() += A_.transpose() * (rho_vec.cwiseProduct(z) - y);
    xt = llt.solve(rhs);
    x = alpha * xt + (1.0 - alpha) * x;
    if (m > 0) {
      zt.noalias() = A_ * xt;
      z_relax = alpha * zt + (1.0 - alpha) * z;
      z = (z_relax + y.cwiseQuotient(rho_vec)).cwiseMax(l_).cwiseMin(u_);
      dy = rho_vec.cwiseProduct(z_relax - z);
      y += dy;
    }

    VectorXd xu, zu, yu;
    unscale(xu, zu, yu);
    const double rp = m > 0 ? (p.A * xu - zu).cwiseAbs().maxCoeff() : 0.0;
    const double rd = dual_residual(p, xu, yu);

    const bool polish_now = settings_.polish && (k == 1 || (warm && k <= 3) || k % 10 == 0 || (rp <= settings_.eps_abs && rd <= settings_.eps_abs));
    if (polish_now && try_polish(p, xu, zu, yu, out)) {
      out.iterations = k;
      last_x_ = out.x;
      last_y_ = out.y;
      return out;
    }
    if (rp <= settings_.eps_abs && rd <= settings_.eps_abs) {
      finish(QpStatus::Solved, k);
      last_x_ = out.x;
      last_y_ = out.y;
      return out;
    }

    if (m > 0) {
      // Primal infeasibility certificate on the multiplier increment.
      const VectorXd dyu = E_.cwiseProduct(dy) / c_;
      const double dyn = dyu.cwiseAbs().maxCoeff();
      if (dyn > 1e-12) {
        const double at = (p.A.transpose() * dyu).cwiseAbs().maxCoeff();
        double support = 0.0;
        bool bounded = true;
        for (int i = 0; i < m; ++i) {
          const double d = dyu[i] / dyn;
          if (d > settings_.eps_infeasible) {
            if (std::isinf(p.upper[i])) { bounded = false; break; }
            support += p.upper[i] * d;
          } else if (d < -settings_.eps_infeasible) {
            if (std::isinf(p.lower[i])) { bounded = false; break; }
            support += p.lower[i] * d;
          }
        }
        if (bounded && at <= settings_.eps_infeasible * dyn && support < -settings_.eps_infeasible) {
          finish(QpStatus::Infeasible, k);
          return out;
        }
      }

      if (settings_.rho_update_interval > 0 && k % settings_.rho_update_interval == 0) {
        const VectorXd Ax = A_ * x;
        const VectorXd Px = P_ * x;
        const VectorXd Aty = A_.transpose() * y;
        const double prim = (Ax - z).cwiseAbs().maxCoeff() / std::max({Ax.cwiseAbs().maxCoeff(), z.cwiseAbs().maxCoeff(), 1e-12});
        const double dual = (Px + q_ + Aty).cwiseAbs().maxCoeff() /
                            std::max({Px.cwiseAbs().maxCoeff(), Aty.cwiseAbs().maxCoeff(), q_.cwiseAbs().maxCoeff(), 1e-12});
        const double ratio = std::sqrt(prim / std::max(dual, 1e-12));
        if (ratio > 5.0 || ratio < 0.2) {
          rho = std::clamp(rho * ratio, rho_min, rho_max);
          fill_rho();
          factor();
        }
      }
    }
  }
  finish(QpStatus::MaxIterations, settings_.max_iterations);
  last_x_ = out.x;
  last_y_ = out.y;
  return out;
}

QpSolution solve(const QpProblem& problem, const QpSettings& settings) {
  QpSolver solver(settings);
  return solver.solve(problem);
}

namespace {

void write_number(std::ostream& os, double v) {
  if (std::isinf(v))
    os << (v > 0 ? "inf" : "-inf");
  else
    os << v;
}

void write_matrix(std::ostream& os, const char* name, const MatrixXd& M) {
  os << name << ' ' << M.rows() << ' ' << M.cols() << '\n';
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if (j) os << ' ';
      write_number(os, M(i, j));
    }
    os << '\n';
  }
}

}  // namespace

void dump(std::ostream& os, const QpProblem& p) {
  const auto flags = os.flags();
  const auto prec = os.precision();
  os << std::setprecision(17);
  os << "qp-dump v1 n=" << p.num_vars() << " m=" << p.num_constraints() << '\n';
  write_matrix(os, "P", p.P);
  write_matrix(os, "q", p.q.transpose());
  write_matrix(os, "A", p.A);
  write_matrix(os, "lower", p.lower.transpose());
  write_matrix(os, "upper", p.upper.transpose());
  os << "constant ";
  write_number(os, p.constant);
  os << '\n';
  os.flags(flags);
  os.precision(prec);
}

std::string dump(const QpProblem& problem) {
  std::ostringstream ss;
  dump(ss, problem);
  return ss.str();
}

}  // namespace quadhrl
