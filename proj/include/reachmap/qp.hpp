#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

namespace reachmap {

// minimize 0.5 z'Qz + c'z  subject to  A z >= b,  lower <= z <= upper.
// Bounds may be infinite.
struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;  // m x n, m may be 0
  Eigen::VectorXd b;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int n() const { return static_cast<int>(c.size()); }
  int m() const { return static_cast<int>(b.size()); }
  double objective(const Eigen::VectorXd& z) const { return 0.5 * z.dot(Q * z) + c.dot(z); }

  // Unconstrained problem with infinite bounds and no rows.
  static QpProblem unconstrained(Eigen::MatrixXd Q, Eigen::VectorXd c);
};

enum class QpStatus { kOptimal, kInfeasible, kIterationLimit };

std::string qp_status_name(QpStatus s);

struct QpSolution {
  Eigen::VectorXd z;
  QpStatus status = QpStatus::kIterationLimit;
  double kkt_residual = 0.0;
  // Active constraints: i < m is row i of A, m + j is the lower bound of z_j,
  // m + n + j is the upper bound of z_j.
  std::vector<int> active_set;
  Eigen::VectorXd row_multipliers;    // m, for A z >= b
  Eigen::VectorXd lower_multipliers;  // n
  Eigen::VectorXd upper_multipliers;  // n
  int iterations = 0;
};

// Dual active-set method (Goldfarb-Idnani). The active-set factorization is
// rebuilt from scratch every iteration. Throws kNotPositiveDefinite if Q is
// not positive definite (smallest eigenvalue below 1e-9) and
// kInvalidArgument for inconsistent shapes, asymmetric Q or lower > upper.
// Whatever the status, the returned z lies within the box bounds.
QpSolution solve_qp(const QpProblem& p, double tol = 1e-9, int max_iter = 1000);

// max of stationarity, primal infeasibility, dual infeasibility and
// complementarity, all in the infinity norm.
double kkt_residual(const QpProblem& p, const Eigen::VectorXd& z, const Eigen::VectorXd& row_mult,
                    const Eigen::VectorXd& lower_mult, const Eigen::VectorXd& upper_mult);

// Plain-text dump for replaying a QP outside the planner.
std::string qp_to_text(const QpProblem& p);
QpProblem qp_from_text(const std::string& text);

}  // namespace reachmap
