#include "reachmap/qp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include "reachmap/error.hpp"

namespace reachmap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinEigen = 1e-9;

void validate(const QpProblem& p) {
  const int n = p.n();
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "QP needs at least one variable");
  if (p.Q.rows() != n || p.Q.cols() != n) throw Error(ErrorCode::kInvalidArgument, "Q must be n x n");
  if (p.A.rows() != p.m() || (p.m() > 0 && p.A.cols() != n)) {
    throw Error(ErrorCode::kInvalidArgument, "A must be m x n");
  }
  if (p.lower.size() != n || p.upper.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "bounds must have n entries");
  }
  if (!p.Q.allFinite() || !p.c.allFinite() || !p.A.allFinite() || !p.b.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "QP data must be finite");
  }
  const double scale = std::max(1.0, p.Q.cwiseAbs().maxCoeff());
  if ((p.Q - p.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw Error(ErrorCode::kInvalidArgument, "Q is not symmetric");
  }
  for (int j = 0; j < n; ++j) {
    if (std::isnan(p.lower[j]) || std::isnan(p.upper[j]) || p.lower[j] > p.upper[j]) {
      throw Error(ErrorCode::kInvalidArgument, "bounds must satisfy lower <= upper");
    }
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p.Q, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kMinEigen) {
    throw Error(ErrorCode::kNotPositiveDefinite,
                "Q is not positive definite (smallest eigenvalue " +
                    std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
}

// Constraint rows a'z >= b with their public index.
struct Rows {
  Eigen::MatrixXd C;  // n x mt, one column per constraint
  Eigen::VectorXd b;
  std::vector<int> id;
};

Rows fold_bounds(const QpProblem& p) {
  const int n = p.n(), m = p.m();
  std::vector<Eigen::VectorXd> cols;
  std::vector<double> rhs;
  Rows r;
  for (int i = 0; i < m; ++i) {
    cols.push_back(p.A.row(i).transpose());
    rhs.push_back(p.b[i]);
    r.id.push_back(i);
  }
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(p.lower[j])) {
      cols.push_back(Eigen::VectorXd::Unit(n, j));
      rhs.push_back(p.lower[j]);
      r.id.push_back(m + j);
    }
    if (std::isfinite(p.upper[j])) {
      cols.push_back(-Eigen::VectorXd::Unit(n, j));
      rhs.push_back(-p.upper[j]);
      r.id.push_back(m + n + j);
    }
  }
  r.C.resize(n, static_cast<Eigen::Index>(cols.size()));
  r.b.resize(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    r.C.col(static_cast<Eigen::Index>(k)) = cols[k];
    r.b[static_cast<Eigen::Index>(k)] = rhs[k];
  }
  return r;
}

void scatter_multipliers(const QpProblem& p, const Rows& rows, const std::vector<int>& act,
                         const std::vector<double>& u, QpSolution& sol) {
  const int n = p.n(), m = p.m();
  sol.row_multipliers = Eigen::VectorXd::Zero(m);
  sol.lower_multipliers = Eigen::VectorXd::Zero(n);
  sol.upper_multipliers = Eigen::VectorXd::Zero(n);
  sol.active_set.clear();
  for (std::size_t k = 0; k < act.size(); ++k) {
    const int id = rows.id[act[k]];
    sol.active_set.push_back(id);
    if (id < m) sol.row_multipliers[id] = u[k];
    else if (id < m + n) sol.lower_multipliers[id - m] = u[k];
    else sol.upper_multipliers[id - m - n] = u[k];
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
}

// Re-solves the equality-constrained problem on the final active set.
void polish(const QpProblem& p, const Rows& rows, const std::vector<int>& act,
            std::vector<double>& u, Eigen::VectorXd& z) {
  const int n = p.n();
  const int q = static_cast<int>(act.size());
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + q, n + q);
  Eigen::VectorXd rhs(n + q);
  K.topLeftCorner(n, n) = p.Q;
  rhs.head(n) = -p.c;
  for (int k = 0; k < q; ++k) {
    K.block(0, n + k, n, 1) = -rows.C.col(act[k]);
    K.block(n + k, 0, 1, n) = rows.C.col(act[k]).transpose();
    rhs[n + k] = rows.b[act[k]];
  }
  const Eigen::VectorXd sol = K.fullPivLu().solve(rhs);
  if (!sol.allFinite()) return;
  z = sol.head(n);
  for (int k = 0; k < q; ++k) u[k] = sol[n + k];
}

}  // namespace

QpProblem QpProblem::unconstrained(Eigen::MatrixXd Q, Eigen::VectorXd c) {
  QpProblem p;
  const Eigen::Index n = c.size();
  p.Q = std::move(Q);
  p.c = std::move(c);
  p.A.resize(0, n);
  p.b.resize(0);
  p.lower = Eigen::VectorXd::Constant(n, -kInf);
  p.upper = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

std::string qp_status_name(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kIterationLimit: return "iteration-limit";
  }
  return "?";
}

double kkt_residual(const QpProblem& p, const Eigen::VectorXd& z, const Eigen::VectorXd& row_mult,
                    const Eigen::VectorXd& lower_mult, const Eigen::VectorXd& upper_mult) {
  Eigen::VectorXd grad = p.Q * z + p.c - lower_mult + upper_mult;
  if (p.m() > 0) grad -= p.A.transpose() * row_mult;
  double r = grad.cwiseAbs().maxCoeff();
  if (p.m() > 0) {
    const Eigen::VectorXd slack = p.A * z - p.b;
    for (int i = 0; i < p.m(); ++i) {
      r = std::max({r, -slack[i], -row_mult[i], std::abs(row_mult[i] * slack[i])});
    }
  }
  for (int j = 0; j < p.n(); ++j) {
    r = std::max({r, -lower_mult[j], -upper_mult[j]});
    if (std::isfinite(p.lower[j])) {
      r = std::max({r, p.lower[j] - z[j], std::abs(lower_mult[j] * (z[j] - p.lower[j]))});
    } else {
      r = std::max(r, std::abs(lower_mult[j]));
    }
    if (std::isfinite(p.upper[j])) {
      r = std::max({r, z[j] - p.upper[j], std::abs(upper_mult[j] * (p.upper[j] - z[j]))});
    } else {
      r = std::max(r, std::abs(upper_mult[j]));
    }
  }
  return std::max(r, 0.0);
}

namespace {

// Variables with lower == upper are substituted out before the dual method
// runs; folding them as two opposite bound rows would make the active set
// degenerate.
QpSolution solve_pinned(const QpProblem& p, const std::vector<int>& free_idx, double tol, int max_iter) {
  const int n = p.n(), m = p.m(), nf = static_cast<int>(free_idx.size());
  Eigen::VectorXd z = p.lower;
  QpSolution sol;
  sol.row_multipliers = Eigen::VectorXd::Zero(m);
  sol.lower_multipliers = Eigen::VectorXd::Zero(n);
  sol.upper_multipliers = Eigen::VectorXd::Zero(n);
  if (nf > 0) {
    QpProblem r;
    r.Q.resize(nf, nf);
    r.c.resize(nf);
    r.A.resize(m, nf);
    r.lower.resize(nf);
    r.upper.resize(nf);
    Eigen::VectorXd pinned_part = p.lower;
    for (int a = 0; a < nf; ++a) pinned_part[free_idx[a]] = 0.0;
    const Eigen::VectorXd Qp = p.Q * pinned_part;
    for (int a = 0; a < nf; ++a) {
      for (int b = 0; b < nf; ++b) r.Q(a, b) = p.Q(free_idx[a], free_idx[b]);
      r.c[a] = p.c[free_idx[a]] + Qp[free_idx[a]];
      if (m > 0) r.A.col(a) = p.A.col(free_idx[a]);
      r.lower[a] = p.lower[free_idx[a]];
      r.upper[a] = p.upper[free_idx[a]];
    }
    r.b = m > 0 ? Eigen::VectorXd(p.b - p.A * pinned_part) : Eigen::VectorXd(p.b);
    const QpSolution rs = solve_qp(r, tol, max_iter);
    sol.status = rs.status;
    sol.iterations = rs.iterations;
    sol.row_multipliers = rs.row_multipliers;
    for (int a = 0; a < nf; ++a) {
      z[free_idx[a]] = rs.z[a];
      sol.lower_multipliers[free_idx[a]] = rs.lower_multipliers[a];
      sol.upper_multipliers[free_idx[a]] = rs.upper_multipliers[a];
    }
    for (int id : rs.active_set) {
      if (id < m) sol.active_set.push_back(id);
      else if (id < m + nf) sol.active_set.push_back(m + free_idx[id - m]);
      else sol.active_set.push_back(m + n + free_idx[id - m - nf]);
    }
  } else {
    sol.status = QpStatus::kOptimal;
    if (m > 0 && ((p.A * z - p.b).array() < -tol).any()) sol.status = QpStatus::kInfeasible;
    for (int i = 0; i < m; ++i) {
      if (p.A.row(i).dot(z) - p.b[i] <= tol) sol.active_set.push_back(i);
    }
  }
  // Pinned variables absorb the remaining stationarity residual.
  Eigen::VectorXd g = p.Q * z + p.c;
  if (m > 0) g -= p.A.transpose() * sol.row_multipliers;
  std::vector<char> is_free(n, 0);
  for (int j : free_idx) is_free[j] = 1;
  for (int j = 0; j < n; ++j) {
    if (is_free[j]) continue;
    sol.lower_multipliers[j] = std::max(g[j], 0.0);
    sol.upper_multipliers[j] = std::max(-g[j], 0.0);
    sol.active_set.push_back(m + j);
    sol.active_set.push_back(m + n + j);
  }
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.z = z;
  sol.kkt_residual = kkt_residual(p, z, sol.row_multipliers, sol.lower_multipliers, sol.upper_multipliers);
  if (sol.status == QpStatus::kOptimal && sol.kkt_residual > tol) sol.status = QpStatus::kIterationLimit;
  return sol;
}

}  // namespace

QpSolution solve_qp(const QpProblem& p, double tol, int max_iter) {
  validate(p);
  if (!(tol > 0.0) || max_iter < 1) throw Error(ErrorCode::kInvalidArgument, "bad QP tolerance");
  const int n = p.n();
  std::vector<int> free_idx;
  for (int j = 0; j < n; ++j) {
    if (p.lower[j] < p.upper[j]) free_idx.push_back(j);
  }
  if (static_cast<int>(free_idx.size()) < n) return solve_pinned(p, free_idx, tol, max_iter);
  const Rows rows = fold_bounds(p);
  const int mt = static_cast<int>(rows.b.size());

  const Eigen::LLT<Eigen::MatrixXd> llt(p.Q);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kNotPositiveDefinite, "Cholesky factorization of Q failed");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  const Eigen::MatrixXd Linv = L.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));

  Eigen::VectorXd z = llt.solve(-p.c);
  std::vector<int> act;
  std::vector<double> u;
  std::vector<char> is_active(mt, 0);
  QpSolution sol;
  sol.status = QpStatus::kIterationLimit;

  int iter = 0;
  bool done = false;
  while (!done && iter < max_iter) {
    // Most violated inactive constraint.
    int pidx = -1;
    double worst = 0.0;
    for (int j = 0; j < mt; ++j) {
      if (is_active[j]) continue;
      const double s = rows.C.col(j).dot(z) - rows.b[j];
      const double slack_tol =
          1e-12 * (1.0 + std::abs(rows.b[j]) + rows.C.col(j).norm() * z.norm());
      if (s < -slack_tol && s < worst) {
        worst = s;
        pidx = j;
      }
    }
    if (pidx < 0) {
      sol.status = QpStatus::kOptimal;
      break;
    }
    const Eigen::VectorXd np = rows.C.col(pidx);
    double u_plus = 0.0;

    while (iter < max_iter) {
      ++iter;
      const int q = static_cast<int>(act.size());
      // J = L^-T Qh where L^-1 N = Qh [R; 0].
      Eigen::MatrixXd J, R;
      if (q == 0) {
        J = Linv.transpose();
      } else {
        Eigen::MatrixXd N(n, q);
        for (int k = 0; k < q; ++k) N.col(k) = rows.C.col(act[k]);
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Linv * N);
        J = Linv.transpose() * qr.householderQ();
        R = qr.matrixQR().topLeftCorner(q, q).triangularView<Eigen::Upper>();
      }
      const Eigen::VectorXd d = J.transpose() * np;
      const Eigen::VectorXd step = J.rightCols(n - q) * d.tail(n - q);
      Eigen::VectorXd r = Eigen::VectorXd::Zero(q);
      if (q > 0) r = R.triangularView<Eigen::Upper>().solve(d.head(q));

      // Partial step: first active multiplier that would turn negative.
      double t1 = kInf;
      int drop = -1;
      for (int k = 0; k < q; ++k) {
        if (r[k] > 0.0 && u[k] / r[k] < t1) {
          t1 = u[k] / r[k];
          drop = k;
        }
      }
      // Full step: makes constraint p active. Zero if np lies in the span of
      // the active normals.
      double t2 = kInf;
      const double curvature = step.dot(np);
      if (curvature > 1e-12 * d.squaredNorm()) {
        t2 = -(np.dot(z) - rows.b[pidx]) / curvature;
      }
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        sol.status = QpStatus::kInfeasible;
        done = true;
        break;
      }
      for (int k = 0; k < q; ++k) u[k] -= t * r[k];
      u_plus += t;
      if (std::isfinite(t2)) z += t * step;
      if (t2 <= t1) {
        act.push_back(pidx);
        u.push_back(u_plus);
        is_active[pidx] = 1;
        break;
      }
      is_active[act[drop]] = 0;
      act.erase(act.begin() + drop);
      u.erase(u.begin() + drop);
    }
  }
  sol.iterations = iter;

  const auto clip = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v.cwiseMax(p.lower).cwiseMin(p.upper);
  };
  if (sol.status == QpStatus::kOptimal) {
    z = clip(z);
    scatter_multipliers(p, rows, act, u, sol);
    sol.kkt_residual = kkt_residual(p, z, sol.row_multipliers, sol.lower_multipliers,
                                    sol.upper_multipliers);
    if (sol.kkt_residual > 0.1 * tol) {
      Eigen::VectorXd z2 = z;
      std::vector<double> u2 = u;
      polish(p, rows, act, u2, z2);
      z2 = clip(z2);
      QpSolution alt = sol;
      scatter_multipliers(p, rows, act, u2, alt);
      const double r2 = kkt_residual(p, z2, alt.row_multipliers, alt.lower_multipliers,
                                     alt.upper_multipliers);
      if (r2 < sol.kkt_residual) {
        alt.kkt_residual = r2;
        z = z2;
        sol = alt;
      }
    }
    if (sol.kkt_residual > tol) sol.status = QpStatus::kIterationLimit;
  } else {
    scatter_multipliers(p, rows, act, u, sol);
    z = clip(z);
    sol.kkt_residual = kkt_residual(p, z, sol.row_multipliers, sol.lower_multipliers,
                                    sol.upper_multipliers);
  }
  sol.z = z;
  return sol;
}

std::string qp_to_text(const QpProblem& p) {
  std::ostringstream out;
  char buf[40];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  const auto vec = [&](const char* name, const Eigen::VectorXd& v) {
    out << name;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << num(v[i]);
    out << '\n';
  };
  out << "qp " << p.n() << ' ' << p.m() << '\n';
  for (int i = 0; i < p.n(); ++i) vec("Q", p.Q.row(i).transpose());
  vec("c", p.c);
  for (int i = 0; i < p.m(); ++i) vec("A", p.A.row(i).transpose());
  vec("b", p.b);
  vec("lower", p.lower);
  vec("upper", p.upper);
  return out.str();
}

QpProblem qp_from_text(const std::string& text) {
  std::istringstream in(text);
  std::string tag;
  int n = 0, m = 0;
  if (!(in >> tag >> n >> m) || tag != "qp" || n < 1 || m < 0) {
    throw Error(ErrorCode::kSchema, "QP dump must start with 'qp <n> <m>'");
  }
  const auto read_vec = [&](const char* name, int len) {
    std::string t;
    if (!(in >> t) || t != name) throw Error(ErrorCode::kSchema, std::string("QP dump: expected ") + name);
    Eigen::VectorXd v(len);
    for (int i = 0; i < len; ++i) {
      std::string s;
      if (!(in >> s)) throw Error(ErrorCode::kSchema, "QP dump truncated");
      v[i] = std::strtod(s.c_str(), nullptr);
    }
    return v;
  };
  QpProblem p;
  p.Q.resize(n, n);
  for (int i = 0; i < n; ++i) p.Q.row(i) = read_vec("Q", n).transpose();
  p.c = read_vec("c", n);
  p.A.resize(m, n);
  for (int i = 0; i < m; ++i) p.A.row(i) = read_vec("A", n).transpose();
  p.b = read_vec("b", m);
  p.lower = read_vec("lower", n);
  p.upper = read_vec("upper", n);
  return p;
}

}  // namespace reachmap
