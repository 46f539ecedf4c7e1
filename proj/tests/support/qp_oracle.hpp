#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "reachmap/qp.hpp"
#include "reachmap/rng.hpp"

namespace reachmap::testing {

// Random strictly convex QP with a known feasible point. Roughly half the
// variables get finite box bounds.
inline QpProblem random_qp(Rng& rng, int n, int m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = rng.uniform(-1, 1);
  QpProblem p;
  p.Q = B * B.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
  p.Q = 0.5 * (p.Q + p.Q.transpose());
  p.c.resize(n);
  for (int i = 0; i < n; ++i) p.c[i] = rng.uniform(-3, 3);
  Eigen::VectorXd z0(n);
  for (int i = 0; i < n; ++i) z0[i] = rng.uniform(-1, 1);
  p.A.resize(m, n);
  p.b.resize(m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) p.A(i, j) = rng.uniform(-1, 1);
    p.b[i] = p.A.row(i).dot(z0) - rng.uniform(0, 0.5);
  }
  p.lower = Eigen::VectorXd::Constant(n, -kInf);
  p.upper = Eigen::VectorXd::Constant(n, kInf);
  for (int j = 0; j < n; ++j) {
    if (rng.uniform01() < 0.5) {
      p.lower[j] = z0[j] - rng.uniform(0, 0.7);
      p.upper[j] = z0[j] + rng.uniform(0, 0.7);
    }
  }
  return p;
}

struct OracleSolution {
  Eigen::VectorXd z;
  double objective;
};

// Exhaustive active-set enumeration: every subset of constraints (rows and
// finite bounds) is treated as equalities, the equality-constrained minimum
// is solved directly, and the best primal-feasible candidate wins.
inline std::optional<OracleSolution> enumerate_qp(const QpProblem& p, double feas_tol = 1e-9) {
  const int n = p.n();
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0; i < p.m(); ++i) {
    rows.push_back(p.A.row(i).transpose());
    rhs.push_back(p.b[i]);
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(p.lower[j])) {
      rows.push_back(Eigen::VectorXd::Unit(n, j));
      rhs.push_back(p.lower[j]);
    }
    if (std::isfinite(p.upper[j])) {
      rows.push_back(-Eigen::VectorXd::Unit(n, j));
      rhs.push_back(-p.upper[j]);
    }
  }
  const int total = static_cast<int>(rows.size());
  std::optional<OracleSolution> best;
  for (unsigned mask = 0; mask < (1u << total); ++mask) {
    std::vector<int> set;
    for (int k = 0; k < total; ++k)
      if (mask & (1u << k)) set.push_back(k);
    const int q = static_cast<int>(set.size());
    if (q > n) continue;
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + q, n + q);
    Eigen::VectorXd r(n + q);
    K.topLeftCorner(n, n) = p.Q;
    r.head(n) = -p.c;
    for (int k = 0; k < q; ++k) {
      K.block(0, n + k, n, 1) = rows[set[k]];
      K.block(n + k, 0, 1, n) = rows[set[k]].transpose();
      r[n + k] = rhs[set[k]];
    }
    const auto lu = K.fullPivLu();
    if (lu.rank() < n + q) continue;
    const Eigen::VectorXd z = lu.solve(r).head(n);
    bool feasible = true;
    for (int k = 0; k < total && feasible; ++k) feasible = rows[k].dot(z) >= rhs[k] - feas_tol;
    if (!feasible) continue;
    const double f = p.objective(z);
    if (!best || f < best->objective) best = OracleSolution{z, f};
  }
  return best;
}

}  // namespace reachmap::testing
