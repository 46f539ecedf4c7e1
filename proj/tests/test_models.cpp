#include <cmath>
#include <cstdio>
#include <filesystem>

#include <gtest/gtest.h>

#include "reachmap/error.hpp"
#include "reachmap/models.hpp"
#include "reachmap/rng.hpp"
#include "support/dual_grid.hpp"
#include "support/finite_diff.hpp"

namespace reachmap {
namespace {

const TaskSpace kR2(SpaceKind::kR2);
const TaskSpace kSE2(SpaceKind::kSE2);

SampleSet make_set(TaskSpace space, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  SampleSet s;
  s.space = space;
  s.inputs = X;
  s.labels = y;
  return s;
}

// Shared small 2-DoF datasets; training them once keeps the suite fast.
struct ArmData {
  SampleSet ik, fk;
  ArmData() {
    const SerialChain arm = planar_arm_2dof();
    ik = sample_ik(arm, default_ik_bounds(arm), 3000, 21, IkOptions{});
    fk = sample_fk(arm, 3000, 22);
  }
};

const ArmData& arm_data() {
  static const ArmData data;
  return data;
}

const SvmTraining& arm_svm() {
  static const SvmTraining t = train_svm(arm_data().ik, SvmConfig{});
  return t;
}

const SvmTraining& arm_ocsvm() {
  static const SvmTraining t = train_ocsvm(arm_data().fk, SvmConfig{});
  return t;
}

const MlpTraining& arm_mlp() {
  static const MlpTraining t = [] {
    MlpConfig cfg;
    cfg.epochs = 100;
    cfg.seed = 5;
    return train_mlp(arm_data().ik, cfg);
  }();
  return t;
}

SvmModel single_sv(double gamma) {
  Eigen::MatrixXd sv(1, 2);
  sv << 0.5, -0.25;
  return SvmModel(ModelKind::kSvm, kR2, gamma, Eigen::VectorXd::Ones(1), sv, 0.0, 0.0);
}

TEST(Svm, SingleSupportVectorExamples) {
  const SvmModel m = single_sv(1.0);
  const Eigen::Vector2d x1(0.5, -0.25);
  EXPECT_DOUBLE_EQ(m.value(x1), 1.0);
  EXPECT_NEAR(m.value(x1 + Eigen::Vector2d(0, 1)), std::exp(-1.0), 1e-15);
  EXPECT_EQ(m.gradient(x1), Eigen::Vector2d::Zero());
  const Eigen::VectorXd g = m.gradient(x1 + Eigen::Vector2d(1, 0));
  EXPECT_NEAR(g[0], -2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(g[1], 0.0, 1e-15);
  EXPECT_THROW(m.value(Eigen::Vector3d(0, 0, 0)), Error);
}

TEST(Svm, OffsetShiftsValueNotGradient) {
  const SvmModel m = single_sv(2.0).with_offset(0.3);
  const Eigen::Vector2d x(0.1, 0.2);
  EXPECT_NEAR(m.value(x), m.raw_value(x) + 0.3, 1e-15);
  EXPECT_EQ(m.gradient(x), single_sv(2.0).gradient(x));
}

TEST(Svm, TwoPointSeparable) {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 2, 0;
  SvmConfig cfg;
  cfg.gamma = 1.0;
  cfg.C = 10.0;
  cfg.offset = 0.0;
  const SvmTraining t = train_svm(make_set(kR2, X, Eigen::Vector2d(1, -1)), cfg);
  EXPECT_GT(t.model.value(Eigen::Vector2d(0, 0)), 0.0);
  EXPECT_LT(t.model.value(Eigen::Vector2d(2, 0)), 0.0);
}

TEST(Svm, DualMatchesGridSearchOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    Eigen::MatrixXd X(5, 2);
    Eigen::VectorXd y(5);
    for (int i = 0; i < 5; ++i) {
      X(i, 0) = rng.uniform(-1, 1);
      X(i, 1) = rng.uniform(-1, 1);
      y[i] = i < 2 ? 1.0 : (i < 4 ? -1.0 : (rng.uniform01() < 0.5 ? 1.0 : -1.0));
    }
    SvmConfig cfg;
    cfg.gamma = 1.0 + trial % 3;
    cfg.C = trial % 2 ? 1.0 : 10.0;
    cfg.kkt_tol = 1e-8;
    const SvmTraining t = train_svm(make_set(kR2, X, y), cfg);
    const double grid = testing::dual_grid_max(X, y, cfg.gamma, cfg.C, 40);
    // SMO reports the minimized form 0.5 a'Qa - sum a; the dual is its negative.
    EXPECT_GE(-t.dual_objective, grid - 1e-9) << "trial " << trial;
    EXPECT_TRUE(t.converged);
  }
}

TEST(Svm, KktConditionsAtExit) {
  const SvmTraining& t = arm_svm();
  const SampleSet& d = arm_data().ik;
  const SvmConfig cfg;
  ASSERT_TRUE(t.converged);
  EXPECT_NEAR(t.alpha.dot(d.labels), 0.0, 1e-8);
  const double eps = cfg.kkt_tol;
  for (int i = 0; i < d.size(); ++i) {
    const double a = t.alpha[i];
    ASSERT_GE(a, 0.0);
    ASSERT_LE(a, cfg.C);
    const double margin = d.labels[i] * t.model.raw_value(d.inputs.row(i).transpose());
    if (a == 0.0) {
      EXPECT_GE(margin, 1.0 - eps) << i;
    } else if (a == cfg.C) {
      EXPECT_LE(margin, 1.0 + eps) << i;
    } else {
      EXPECT_NEAR(margin, 1.0, eps) << i;
    }
  }
  // Non-support vectors are dropped from the stored model.
  EXPECT_EQ(t.model.support_count(), (t.alpha.array() > 0.0).count());
}

TEST(Svm, OutsideWorkspaceIsNegative) {
  EXPECT_LT(arm_svm().model.value(Eigen::Vector2d(2.5, 0.0)), 0.0);
  const Eigen::VectorXd inside = fk(planar_arm_2dof(), Eigen::Vector2d(0.7, 1.2)).coords();
  EXPECT_GT(arm_svm().model.value(inside), 0.0);
}

TEST(Svm, RejectsSingleClass) {
  try {
    train_svm(arm_data().fk, SvmConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingleClass);
  }
}

TEST(OcSvm, NuProperty) {
  const SvmTraining& t = arm_ocsvm();
  const SampleSet& d = arm_data().fk;
  // Free support vectors sit on the boundary only up to the solver tolerance,
  // so "outside" means below -kkt_tol; roughly a tenth of the set lies in
  // that band.
  int outside = 0;
  for (int i = 0; i < d.size(); ++i) {
    outside += t.model.raw_value(d.inputs.row(i).transpose()) < -SvmConfig{}.kkt_tol;
  }
  EXPECT_LE(static_cast<double>(outside) / d.size(), SvmConfig{}.nu + 0.02);
  EXPECT_NEAR(t.alpha.sum(), SvmConfig{}.nu * d.size(), 1e-8);
  EXPECT_EQ(t.model.kind(), ModelKind::kOcSvm);
}

TEST(OcSvm, IdenticalPointsArePositive) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Constant(20, 2, 0.7);
  const SvmTraining t = train_ocsvm(make_set(kR2, X, Eigen::VectorXd::Ones(20)), SvmConfig{});
  EXPECT_GE(t.model.value(Eigen::Vector2d(0.7, 0.7)), 0.0);
  EXPECT_LT(t.model.value(Eigen::Vector2d(3, 3)), 0.0);
}

TEST(OcSvm, RejectsMixedLabels) {
  try {
    train_ocsvm(arm_data().ik, SvmConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMixedLabels);
  }
  SvmConfig bad;
  bad.nu = 1.5;
  EXPECT_THROW(train_ocsvm(arm_data().fk, bad), Error);
}

TEST(Mlp, TwoSeparablePoints) {
  Eigen::MatrixXd X(2, 2);
  X << 0, 0, 1, 1;
  MlpConfig cfg;
  cfg.epochs = 500;
  cfg.learning_rate = 1e-2;
  const MlpTraining t = train_mlp(make_set(kR2, X, Eigen::Vector2d(1, -1)), cfg);
  EXPECT_LT(t.loss_curve.back(), 0.05);
  EXPECT_GT(t.model.value(Eigen::Vector2d(0, 0)), 0.0);
  EXPECT_LT(t.model.value(Eigen::Vector2d(1, 1)), 0.0);
}

TEST(Mlp, LossCurveIsSane) {
  const MlpTraining& t = arm_mlp();
  ASSERT_EQ(t.loss_curve.size(), 101u);
  for (double l : t.loss_curve) EXPECT_TRUE(std::isfinite(l));
  EXPECT_LE(t.loss_curve.back(), t.loss_curve.front());
  EXPECT_EQ(t.model.layer_sizes(), (std::vector<int>{64, 32, 1}));
}

TEST(Mlp, Deterministic) {
  MlpConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 77;
  const MlpTraining a = train_mlp(arm_data().ik, cfg);
  const MlpTraining b = train_mlp(arm_data().ik, cfg);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  EXPECT_EQ(model_to_json(a.model), model_to_json(b.model));
}

TEST(Mlp, BatchMatchesSingleEvaluation) {
  const MlpModel& m = arm_mlp().model;
  const Eigen::VectorXd batch = m.raw_values(arm_data().ik.inputs.topRows(50));
  for (int i = 0; i < 50; ++i) {
    EXPECT_NEAR(batch[i], m.raw_value(arm_data().ik.inputs.row(i).transpose()), 1e-12);
  }
}

TEST(Mlp, RejectsSingleClass) {
  EXPECT_THROW(train_mlp(arm_data().fk, MlpConfig{}), Error);
}

// Relative error of the analytic gradient against central differences with
// h = 1e-6. The floor of 1 on the gradient magnitude keeps points far from the
// data, where the gradient is ~0 and differences are pure round-off, from
// dominating; inside the data the gradient magnitude is well above 1.
void check_gradients(const ReachabilityMap& m, bool skip_kinks, std::uint64_t seed) {
  Rng rng(seed);
  int checked = 0;
  while (checked < 1000) {
    const Eigen::Vector2d x(rng.uniform(-1.2, 2.2), rng.uniform(-0.2, 2.2));
    if (skip_kinks) {
      if (static_cast<const MlpModel&>(m).min_abs_preactivation(x) < 1e-4) continue;
    }
    const Eigen::VectorXd fd =
        testing::central_gradient([&](const Eigen::VectorXd& z) { return m.value(z); }, x);
    EXPECT_LT(testing::relative_error(m.gradient(x), fd), 1e-5);
    ++checked;
  }
}

TEST(Gradients, SvmMatchesFiniteDifferences) {
  check_gradients(arm_svm().model, false, 41);
  check_gradients(arm_ocsvm().model, false, 42);
}

TEST(Gradients, MlpMatchesFiniteDifferences) { check_gradients(arm_mlp().model, true, 43); }

TEST(ModelIo, RoundTrip) {
  Rng rng(51);
  const std::string path =
      (std::filesystem::temp_directory_path() / "reachmap_model_roundtrip.json").string();
  for (const ReachabilityMap* m : std::initializer_list<const ReachabilityMap*>{
           &arm_svm().model, &arm_ocsvm().model, &arm_mlp().model}) {
    save_model(*m, path);
    const auto back = load_model(path);
    EXPECT_EQ(back->offset(), m->offset());
    for (int i = 0; i < 100; ++i) {
      const Eigen::Vector2d x(rng.uniform(-1.2, 2.2), rng.uniform(-0.2, 2.2));
      EXPECT_NEAR(back->value(x), m->value(x), 1e-12);
    }
    EXPECT_EQ(model_to_json(*back), model_to_json(*m));
  }
  std::remove(path.c_str());
}

TEST(ModelIo, SchemaErrors) {
  try {
    model_from_json("{\"kind\": \"tree\", \"space\": \"R2\", \"offset\": 0, \"parameters\": {}}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
  EXPECT_THROW(model_from_json("{"), Error);
  EXPECT_THROW(model_to_json(OffsetMap(std::make_shared<SvmModel>(single_sv(1)), 0.0)), Error);
}

TEST(Wrappers, MirroredMapReflectsInput) {
  Eigen::MatrixXd sv(3, 4);
  sv << 0.1, 0.2, 1, 0, 0.0, 0.3, 0.8, 0.6, -0.2, 0.25, 0.6, -0.8;
  auto inner = std::make_shared<SvmModel>(ModelKind::kSvm, kSE2, 3.0, Eigen::Vector3d(1, -0.5, 0.7),
                                          sv, -0.1, 0.05);
  const MirroredMap mirror(inner);
  Rng rng(61);
  for (int i = 0; i < 200; ++i) {
    const double t = rng.uniform(-3, 3);
    const Eigen::Vector4d x(rng.uniform(-1, 1), rng.uniform(-1, 1), std::cos(t), std::sin(t));
    const Eigen::Vector4d xr(x[0], -x[1], x[2], -x[3]);
    EXPECT_EQ(mirror.value(x), inner->value(xr));
    const Eigen::VectorXd fd =
        testing::central_gradient([&](const Eigen::VectorXd& z) { return mirror.value(z); }, x);
    EXPECT_LT(testing::relative_error(mirror.gradient(x), fd), 1e-6);
  }
  EXPECT_THROW(MirroredMap(std::make_shared<SvmModel>(single_sv(1))), Error);
}

TEST(Wrappers, OffsetMapOverridesOffset) {
  auto inner = std::make_shared<SvmModel>(single_sv(1.0).with_offset(0.1));
  const OffsetMap zero(inner, 0.0);
  const Eigen::Vector2d x(0.3, 0.3);
  EXPECT_EQ(zero.value(x), single_sv(1.0).value(x));
  EXPECT_EQ(zero.gradient(x), inner->gradient(x));
}

}  // namespace
}  // namespace reachmap
