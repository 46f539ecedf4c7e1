#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "reachmap/error.hpp"
#include "reachmap/qp.hpp"
#include "reachmap/rng.hpp"
#include "support/qp_oracle.hpp"

namespace reachmap {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(Qp, UnconstrainedMinimum) {
  const QpProblem p = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d(-1, 0));
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.z[1], 0.0, 1e-12);
  EXPECT_TRUE(s.active_set.empty());
}

TEST(Qp, ClippedScalar) {
  QpProblem p = QpProblem::unconstrained(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, -2));
  p.A = Eigen::MatrixXd::Constant(1, 1, -1.0);  // -z >= -1
  p.b = Eigen::VectorXd::Constant(1, -1.0);
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.row_multipliers[0], 1.0, 1e-12);
  ASSERT_EQ(s.active_set.size(), 1u);
  EXPECT_EQ(s.active_set[0], 0);
}

TEST(Qp, ClippedScalarAsBound) {
  QpProblem p = QpProblem::unconstrained(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Constant(1, -2));
  p.upper[0] = 1.0;
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.upper_multipliers[0], 1.0, 1e-12);
  ASSERT_EQ(s.active_set.size(), 1u);
  EXPECT_EQ(s.active_set[0], 1);  // m + n + 0 with m = 0, n = 1
}

TEST(Qp, MatchesEnumerationOracle) {
  Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int m = static_cast<int>(rng.below(5));
    const QpProblem p = testing::random_qp(rng, n, m);
    const auto oracle = testing::enumerate_qp(p);
    ASSERT_TRUE(oracle.has_value()) << "instance built feasible";
    const QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::kOptimal) << "trial " << trial;
    EXPECT_LE((s.z - oracle->z).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
    EXPECT_LE(p.objective(s.z), oracle->objective + 1e-6);
    EXPECT_NEAR(p.objective(s.z), oracle->objective, 1e-6);
    EXPECT_LE(s.kkt_residual, 1e-8);
    ++checked;
  }
  EXPECT_EQ(checked, 300);
}

TEST(Qp, KktResidualMatchesReportedValue) {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const QpProblem p = testing::random_qp(rng, 3, 4);
    const QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::kOptimal);
    EXPECT_DOUBLE_EQ(kkt_residual(p, s.z, s.row_multipliers, s.lower_multipliers, s.upper_multipliers),
                     s.kkt_residual);
    EXPECT_TRUE((s.row_multipliers.array() >= 0).all());
  }
}

TEST(Qp, ScalingInvariance) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const QpProblem p = testing::random_qp(rng, 1 + static_cast<int>(rng.below(4)), static_cast<int>(rng.below(5)));
    QpProblem scaled = p;
    const double s = rng.uniform(0.01, 100.0);
    scaled.Q *= s;
    scaled.c *= s;
    const QpSolution a = solve_qp(p), b = solve_qp(scaled);
    ASSERT_EQ(a.status, QpStatus::kOptimal);
    ASSERT_EQ(b.status, QpStatus::kOptimal);
    EXPECT_LE((a.z - b.z).cwiseAbs().maxCoeff(), 1e-8) << "scale " << s;
  }
}

TEST(Qp, BoxNeverViolated) {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    QpProblem p = testing::random_qp(rng, n, static_cast<int>(rng.below(5)));
    // Perturb rows so some instances become infeasible.
    for (int i = 0; i < p.m(); ++i) p.b[i] += rng.uniform(0, 2);
    const QpSolution s = solve_qp(p);
    for (int j = 0; j < n; ++j) {
      EXPECT_GE(s.z[j], p.lower[j] - 1e-9);
      EXPECT_LE(s.z[j], p.upper[j] + 1e-9);
    }
  }
}

TEST(Qp, DetectsInfeasibleRows) {
  QpProblem p = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
  p.A.resize(2, 2);
  p.A << 1, 0, -1, 0;  // z0 >= 1 and z0 <= 0
  p.b = Eigen::Vector2d(1, 0);
  EXPECT_EQ(solve_qp(p).status, QpStatus::kInfeasible);
}

TEST(Qp, DetectsRowsConflictingWithBox) {
  QpProblem p = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, 1));
  p.A.resize(1, 2);
  p.A << 1, 1;
  p.b = Eigen::VectorXd::Constant(1, 3.0);
  p.lower = Eigen::Vector2d(-1, -1);
  p.upper = Eigen::Vector2d(1, 1);
  const QpSolution s = solve_qp(p);
  EXPECT_EQ(s.status, QpStatus::kInfeasible);
  EXPECT_TRUE((s.z.array() <= 1.0).all());
  EXPECT_TRUE((s.z.array() >= -1.0).all());
}

TEST(Qp, RejectsIndefiniteHessian) {
  Eigen::Matrix2d Q;
  Q << 1, 0, 0, -1;
  try {
    solve_qp(QpProblem::unconstrained(Q, Eigen::Vector2d::Zero()));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotPositiveDefinite);
  }
  EXPECT_THROW(solve_qp(QpProblem::unconstrained(1e-12 * Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero())),
               Error);
}

TEST(Qp, RejectsBadShapes) {
  Eigen::Matrix2d Q;
  Q << 1, 0.5, 0, 1;
  EXPECT_THROW(solve_qp(QpProblem::unconstrained(Q, Eigen::Vector2d::Zero())), Error);
  QpProblem p = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
  p.lower[0] = 1;
  p.upper[0] = 0;
  EXPECT_THROW(solve_qp(p), Error);
  QpProblem q = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero());
  q.A = Eigen::MatrixXd::Ones(1, 3);
  q.b = Eigen::VectorXd::Ones(1);
  EXPECT_THROW(solve_qp(q), Error);
}

TEST(Qp, DegenerateDuplicateRows) {
  QpProblem p = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d(-2, -2));
  p.A.resize(3, 2);
  p.A << -1, 0, -1, 0, -2, 0;  // z0 <= 1 three times
  p.b = Eigen::Vector3d(-1, -1, -2);
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_NEAR(s.z[0], 1.0, 1e-12);
  EXPECT_NEAR(s.z[1], 2.0, 1e-12);
  EXPECT_LE(s.kkt_residual, 1e-9);
}

TEST(Qp, Deterministic) {
  Rng rng(4);
  const QpProblem p = testing::random_qp(rng, 4, 4);
  const QpSolution a = solve_qp(p), b = solve_qp(p);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.active_set, b.active_set);
}

TEST(Qp, TextRoundTrip) {
  Rng rng(12);
  const QpProblem p = testing::random_qp(rng, 3, 2);
  const QpProblem q = qp_from_text(qp_to_text(p));
  EXPECT_EQ(p.Q, q.Q);
  EXPECT_EQ(p.c, q.c);
  EXPECT_EQ(p.A, q.A);
  EXPECT_EQ(p.b, q.b);
  EXPECT_EQ(p.lower, q.lower);
  EXPECT_EQ(p.upper, q.upper);
  EXPECT_THROW(qp_from_text("nope"), Error);
  EXPECT_THROW(qp_from_text("qp 2 0\nQ 1 0\n"), Error);
}

TEST(Qp, LargerInstanceAgainstProjection) {
  // min 0.5|z - t|^2 over a box is the clamp of t.
  const int n = 60;
  Rng rng(8);
  Eigen::VectorXd t(n);
  for (int i = 0; i < n; ++i) t[i] = rng.uniform(-2, 2);
  QpProblem p = QpProblem::unconstrained(Eigen::MatrixXd::Identity(n, n), -t);
  p.lower = Eigen::VectorXd::Constant(n, -1.0);
  p.upper = Eigen::VectorXd::Constant(n, 1.0);
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_LE((s.z - t.cwiseMax(-1.0).cwiseMin(1.0)).cwiseAbs().maxCoeff(), 1e-12);
  (void)kInf;
}

TEST(Qp, PinnedVariablesAreSubstituted) {
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(3));
    QpProblem p = testing::random_qp(rng, n, static_cast<int>(rng.below(4)));
    const QpSolution free_sol = solve_qp(p);
    ASSERT_EQ(free_sol.status, QpStatus::kOptimal);
    // Pinning a variable at its optimal value leaves the optimum unchanged.
    const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    p.lower[j] = p.upper[j] = free_sol.z[j];
    const QpSolution s = solve_qp(p);
    ASSERT_EQ(s.status, QpStatus::kOptimal) << "trial " << trial;
    EXPECT_LE((s.z - free_sol.z).cwiseAbs().maxCoeff(), 1e-7);
    EXPECT_LE(s.kkt_residual, 1e-8);
  }
}

TEST(Qp, AllVariablesPinned) {
  QpProblem p = QpProblem::unconstrained(Eigen::Matrix2d::Identity(), Eigen::Vector2d(1, -1));
  p.lower = p.upper = Eigen::Vector2d(0.5, 0.5);
  const QpSolution s = solve_qp(p);
  ASSERT_EQ(s.status, QpStatus::kOptimal);
  EXPECT_EQ(s.z, Eigen::Vector2d(0.5, 0.5));
  EXPECT_NEAR(s.lower_multipliers[0], 1.5, 1e-12);
  EXPECT_NEAR(s.upper_multipliers[1], 0.5, 1e-12);
  p.A = Eigen::MatrixXd::Ones(1, 2);
  p.b = Eigen::VectorXd::Constant(1, 2.0);
  EXPECT_EQ(solve_qp(p).status, QpStatus::kInfeasible);
}

}  // namespace
}  // namespace reachmap
