#include "reachmap/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "reachmap/error.hpp"
#include "reachmap/rng.hpp"

namespace reachmap {

namespace {

constexpr double kQpRegularization = 1e-8;
constexpr double kElasticPenalty = 100.0;
constexpr double kMinRadiusScale = 1e-6;

bool has_angle(const TaskSpace& space) { return space.kind() == SpaceKind::kSE2; }

// a - b with the SE2 angle difference wrapped.
Eigen::VectorXd pose_diff(const TaskSpace& space, const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd d = a - b;
  if (has_angle(space)) d[2] = normalize_angle(d[2]);
  return d;
}

void add_ref_gradient(const PlanProblem& problem, const PlanState& state, const VariableLayout& layout,
                      const PoseRef& ref, const Eigen::RowVectorXd& g, Eigen::Ref<Eigen::RowVectorXd> row) {
  const int dim = problem.space.pose_dim();
  switch (ref.kind) {
    case PoseRef::Kind::kPose:
      if (layout.pose_offset[ref.a] >= 0) row.segment(layout.pose_offset[ref.a], dim) += g;
      break;
    case PoseRef::Kind::kMidpoint:
      if (layout.pose_offset[ref.a] >= 0) row.segment(layout.pose_offset[ref.a], dim) += 0.5 * g;
      if (layout.pose_offset[ref.b] >= 0) row.segment(layout.pose_offset[ref.b], dim) += 0.5 * g;
      break;
    case PoseRef::Kind::kTrajectory:
      if (layout.param_offset[ref.a] >= 0) {
        row[layout.param_offset[ref.a]] += g.dot(problem.trajectory->tangent(state.params[ref.a]));
      }
      break;
  }
}

void check_ref(const PlanProblem& problem, const PoseRef& ref) {
  const auto pose_ok = [&](int i) { return i >= 0 && i < problem.pose_count(); };
  switch (ref.kind) {
    case PoseRef::Kind::kPose:
      if (!pose_ok(ref.a)) throw Error(ErrorCode::kInvalidArgument, "constraint refers to a missing pose");
      break;
    case PoseRef::Kind::kMidpoint:
      if (!pose_ok(ref.a) || !pose_ok(ref.b)) {
        throw Error(ErrorCode::kInvalidArgument, "constraint refers to a missing pose");
      }
      break;
    case PoseRef::Kind::kTrajectory:
      if (!problem.trajectory) throw Error(ErrorCode::kInvalidArgument, "trajectory constraint without a trajectory");
      if (ref.a < 0 || ref.a >= problem.param_count()) {
        throw Error(ErrorCode::kInvalidArgument, "constraint refers to a missing trajectory parameter");
      }
      break;
  }
}

Pose offset_pose(const Pose& base, double x, double y) { return compose(base, Pose::se2(x, y, 0.0)); }

Pose lerp_pose(const Pose& a, const Pose& b, double t) {
  const Eigen::VectorXd d = pose_diff(a.space(), b.coords(), a.coords());
  return Pose::raw(a.space(), a.coords() + t * d);
}

// Foot order of a footstep-style sequence: pose 0 is the first swing foot,
// then feet alternate.
std::vector<Side> alternate_sides(Side first_swing, int n_steps) {
  std::vector<Side> sides;
  sides.push_back(first_swing);
  sides.push_back(other(first_swing));
  for (int k = 1; k <= n_steps; ++k) sides.push_back(k % 2 == 1 ? first_swing : other(first_swing));
  return sides;
}

const MapPtr& foot_map(const FootstepMaps& maps, Side swing) {
  return swing == Side::kLeft ? maps.left_from_right : maps.right_from_left;
}

void check_maps(const FootstepMaps& maps) {
  if (!maps.left_from_right || !maps.right_from_left) {
    throw Error(ErrorCode::kInvalidArgument, "both footstep maps are required");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string plan_variant_name(PlanVariant v) {
  switch (v) {
    case PlanVariant::kBasic: return "basic";
    case PlanVariant::kSimultaneous: return "simultaneous";
    case PlanVariant::kSequential: return "sequential";
    case PlanVariant::kSequentialWithParam: return "sequential-param";
  }
  return "?";
}

PlanVariant plan_variant_from_name(const std::string& name) {
  for (PlanVariant v : {PlanVariant::kBasic, PlanVariant::kSimultaneous, PlanVariant::kSequential,
                        PlanVariant::kSequentialWithParam}) {
    if (plan_variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown plan variant '" + name + "'");
}

PoseTrajectory door_arc(double radius, double hinge_x, double hinge_y) {
  if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "door radius must be positive");
  PoseTrajectory t;
  const TaskSpace se2(SpaceKind::kSE2);
  t.pose = [=](double s) {
    return Pose::raw(se2, Eigen::Vector3d(hinge_x + radius * std::cos(s), hinge_y + radius * std::sin(s), s));
  };
  t.tangent = [=](double s) -> Eigen::VectorXd {
    return Eigen::Vector3d(-radius * std::sin(s), radius * std::cos(s), 1.0);
  };
  t.name = "door-arc";
  return t;
}

SqpConfig SqpConfig::defaults(PlanVariant v) {
  SqpConfig cfg;
  cfg.lambda = v == PlanVariant::kSimultaneous ? 1e-2 : 1.0;
  return cfg;
}

Eigen::VectorXd SqpConfig::pose_radius(const TaskSpace& space) const {
  if (trust_radius.size() > 0) {
    if (trust_radius.size() != space.pose_dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "trust radius needs one entry per pose coordinate");
    }
    return trust_radius;
  }
  Eigen::VectorXd r = Eigen::VectorXd::Constant(space.pose_dim(), 0.1);
  if (has_angle(space)) r[2] = 0.2;
  return r;
}

PlanState initial_state(const PlanProblem& problem) {
  PlanState s;
  for (const Pose& p : problem.initial) s.poses.push_back(p.coords());
  s.params = problem.param_initial;
  return s;
}

VariableLayout variable_layout(const PlanProblem& problem) {
  VariableLayout layout;
  const int dim = problem.space.pose_dim();
  for (int i = 0; i < problem.pose_count(); ++i) {
    if (problem.fixed[i]) {
      layout.pose_offset.push_back(-1);
    } else {
      layout.pose_offset.push_back(layout.size);
      layout.size += dim;
    }
  }
  for (int k = 0; k < problem.param_count(); ++k) {
    if (problem.param_fixed[k]) {
      layout.param_offset.push_back(-1);
    } else {
      layout.param_offset.push_back(layout.size);
      layout.size += 1;
    }
  }
  return layout;
}

void validate_problem(const PlanProblem& problem) {
  const TaskSpace& space = problem.space;
  if (space.kind() == SpaceKind::kSE3) {
    throw Error(ErrorCode::kUnsupportedSpace, "planning in SE3 is not supported");
  }
  if (problem.pose_count() < 1) throw Error(ErrorCode::kInvalidArgument, "a plan needs at least one pose");
  if (static_cast<int>(problem.fixed.size()) != problem.pose_count()) {
    throw Error(ErrorCode::kInvalidArgument, "fixed flags must match the pose count");
  }
  if (static_cast<int>(problem.param_fixed.size()) != problem.param_count()) {
    throw Error(ErrorCode::kInvalidArgument, "parameter fixed flags must match the parameter count");
  }
  for (const Pose& p : problem.initial) {
    if (p.space() != space) throw Error(ErrorCode::kSpaceMismatch, "initial pose in the wrong task space");
    if (!p.coords().allFinite()) throw Error(ErrorCode::kInvalidArgument, "initial poses must be finite");
  }
  for (double s : problem.param_initial) {
    if (!std::isfinite(s)) throw Error(ErrorCode::kInvalidArgument, "initial parameters must be finite");
  }
  if (problem.param_count() > 0 && !problem.trajectory) {
    throw Error(ErrorCode::kInvalidArgument, "parameters need a trajectory");
  }
  if (problem.variant == PlanVariant::kSequentialWithParam && !problem.trajectory) {
    throw Error(ErrorCode::kInvalidArgument, "the parameterized variant needs a trajectory");
  }
  if (problem.trajectory && (!problem.trajectory->pose || !problem.trajectory->tangent)) {
    throw Error(ErrorCode::kInvalidArgument, "trajectory needs a pose and a tangent function");
  }
  for (const ReachConstraint& c : problem.reach) {
    if (!c.map) throw Error(ErrorCode::kInvalidArgument, "reachability constraint without a map");
    if (c.map->space() != space) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "map trained on " + c.map->space().name() + " used in a " + space.name() + " problem");
    }
    check_ref(problem, c.anchor);
    check_ref(problem, c.target);
  }
  for (const LinearConstraint& l : problem.linear) {
    if (l.pose < 0 || l.pose >= problem.pose_count()) {
      throw Error(ErrorCode::kInvalidArgument, "linear constraint on a missing pose");
    }
    if (l.a.size() != space.pose_dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "linear constraint needs one coefficient per pose coordinate");
    }
  }
  for (const PoseTerm& t : problem.targets) {
    if (t.pose < 0 || t.pose >= problem.pose_count()) throw Error(ErrorCode::kInvalidArgument, "target on a missing pose");
    if (t.target.space() != space) throw Error(ErrorCode::kSpaceMismatch, "target in the wrong task space");
    if (!(t.weight >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "target weights must be nonnegative");
  }
  for (const auto& [a, b] : problem.smoothing) {
    if (a < 0 || b < 0 || a >= problem.pose_count() || b >= problem.pose_count()) {
      throw Error(ErrorCode::kInvalidArgument, "smoothing term on a missing pose");
    }
  }
  for (const ParamTerm& t : problem.param_targets) {
    if (t.index < 0 || t.index >= problem.param_count()) {
      throw Error(ErrorCode::kInvalidArgument, "parameter target on a missing parameter");
    }
  }
  if (variable_layout(problem).size == 0) throw Error(ErrorCode::kInvalidArgument, "the plan has no free variables");
}

Pose resolve(const PlanProblem& problem, const PlanState& state, const PoseRef& ref) {
  const TaskSpace& space = problem.space;
  switch (ref.kind) {
    case PoseRef::Kind::kPose:
      return Pose::raw(space, state.poses[ref.a]);
    case PoseRef::Kind::kMidpoint: {
      const Eigen::VectorXd& a = state.poses[ref.a];
      Eigen::VectorXd m = 0.5 * (a + state.poses[ref.b]);
      if (has_angle(space)) m[2] = a[2] + 0.5 * normalize_angle(state.poses[ref.b][2] - a[2]);
      return Pose::raw(space, m);
    }
    case PoseRef::Kind::kTrajectory:
      return problem.trajectory->pose(state.params[ref.a]);
  }
  return Pose::identity(space);
}

Eigen::VectorXd reach_values(const PlanProblem& problem, const PlanState& state) {
  Eigen::VectorXd f(static_cast<Eigen::Index>(problem.reach.size()));
  for (std::size_t k = 0; k < problem.reach.size(); ++k) {
    const ReachConstraint& c = problem.reach[k];
    f[static_cast<Eigen::Index>(k)] =
        c.map->value(encode_rel(resolve(problem, state, c.anchor), resolve(problem, state, c.target)));
  }
  return f;
}

double plan_objective(const PlanProblem& problem, const PlanState& state, const SqpConfig& cfg) {
  const TaskSpace& space = problem.space;
  double J = 0.0;
  for (const PoseTerm& t : problem.targets) {
    const double w = t.weight * (t.lambda_weighted ? cfg.lambda : 1.0);
    J += 0.5 * w * pose_diff(space, state.poses[t.pose], t.target.coords()).squaredNorm();
  }
  for (const auto& [a, b] : problem.smoothing) {
    J += 0.5 * cfg.lambda * pose_diff(space, state.poses[a], state.poses[b]).squaredNorm();
  }
  for (const ParamTerm& t : problem.param_targets) {
    const double d = state.params[t.index] - t.target;
    J += 0.5 * t.weight * d * d;
  }
  for (int k = 1; k < problem.param_count(); ++k) {
    const double d = state.params[k] - state.params[k - 1];
    J += 0.5 * problem.param_smoothing * d * d;
  }
  return J;
}

double plan_violation(const PlanProblem& problem, const PlanState& state, double margin) {
  double v = 0.0;
  const Eigen::VectorXd f = reach_values(problem, state);
  for (Eigen::Index k = 0; k < f.size(); ++k) v = std::max(v, margin - f[k]);
  for (const LinearConstraint& l : problem.linear) v = std::max(v, l.b - l.a.dot(state.poses[l.pose]));
  if (problem.monotone_params) {
    for (int k = 1; k < problem.param_count(); ++k) v = std::max(v, state.params[k - 1] - state.params[k]);
  }
  return std::max(v, 0.0);
}

LocalQp build_local_qp(const PlanProblem& problem, const PlanState& state, const SqpConfig& cfg,
                       double radius_scale) {
  const TaskSpace& space = problem.space;
  const int dim = space.pose_dim();
  const VariableLayout layout = variable_layout(problem);
  const int n = layout.size;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);

  LocalQp out;
  QpProblem& qp = out.qp;
  qp.Q = kQpRegularization * Eigen::MatrixXd::Identity(n, n);
  qp.c = Eigen::VectorXd::Zero(n);

  for (const PoseTerm& t : problem.targets) {
    const int off = layout.pose_offset[t.pose];
    if (off < 0) continue;
    const double w = t.weight * (t.lambda_weighted ? cfg.lambda : 1.0);
    qp.Q.block(off, off, dim, dim) += w * I;
    qp.c.segment(off, dim) += w * pose_diff(space, state.poses[t.pose], t.target.coords());
  }
  for (const auto& [a, b] : problem.smoothing) {
    const int oa = layout.pose_offset[a], ob = layout.pose_offset[b];
    const Eigen::VectorXd d = pose_diff(space, state.poses[a], state.poses[b]);
    if (oa >= 0) {
      qp.Q.block(oa, oa, dim, dim) += cfg.lambda * I;
      qp.c.segment(oa, dim) += cfg.lambda * d;
    }
    if (ob >= 0) {
      qp.Q.block(ob, ob, dim, dim) += cfg.lambda * I;
      qp.c.segment(ob, dim) -= cfg.lambda * d;
    }
    if (oa >= 0 && ob >= 0) {
      qp.Q.block(oa, ob, dim, dim) -= cfg.lambda * I;
      qp.Q.block(ob, oa, dim, dim) -= cfg.lambda * I;
    }
  }
  for (const ParamTerm& t : problem.param_targets) {
    const int off = layout.param_offset[t.index];
    if (off < 0) continue;
    qp.Q(off, off) += t.weight;
    qp.c[off] += t.weight * (state.params[t.index] - t.target);
  }
  for (int k = 1; k < problem.param_count() && problem.param_smoothing > 0.0; ++k) {
    const int o0 = layout.param_offset[k - 1], o1 = layout.param_offset[k];
    const double w = problem.param_smoothing, d = state.params[k] - state.params[k - 1];
    if (o1 >= 0) {
      qp.Q(o1, o1) += w;
      qp.c[o1] += w * d;
    }
    if (o0 >= 0) {
      qp.Q(o0, o0) += w;
      qp.c[o0] -= w * d;
    }
    if (o0 >= 0 && o1 >= 0) {
      qp.Q(o0, o1) -= w;
      qp.Q(o1, o0) -= w;
    }
  }

  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  out.values.resize(static_cast<Eigen::Index>(problem.reach.size()));
  for (std::size_t k = 0; k < problem.reach.size(); ++k) {
    const ReachConstraint& c = problem.reach[k];
    const Pose anchor = resolve(problem, state, c.anchor);
    const Pose target = resolve(problem, state, c.target);
    const Eigen::VectorXd x = encode_rel(anchor, target);
    const double f = c.map->value(x);
    out.values[static_cast<Eigen::Index>(k)] = f;
    const Eigen::RowVectorXd g = c.map->gradient(x).transpose();
    const auto [j0, j1] = jac_rel(anchor, target);
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    add_ref_gradient(problem, state, layout, c.anchor, g * j0, row);
    add_ref_gradient(problem, state, layout, c.target, g * j1, row);
    if (row.cwiseAbs().maxCoeff() == 0.0) continue;  // nothing free to move
    rows.push_back(row);
    rhs.push_back(cfg.margin - f);
    out.reach_index.push_back(static_cast<int>(k));
  }
  out.reach_rows = static_cast<int>(rows.size());
  for (const LinearConstraint& l : problem.linear) {
    const int off = layout.pose_offset[l.pose];
    if (off < 0) continue;
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
    row.segment(off, dim) = l.a.transpose();
    rows.push_back(row);
    rhs.push_back(l.b - l.a.dot(state.poses[l.pose]));
  }
  if (problem.monotone_params) {
    for (int k = 1; k < problem.param_count(); ++k) {
      const int o0 = layout.param_offset[k - 1], o1 = layout.param_offset[k];
      if (o0 < 0 && o1 < 0) continue;
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(n);
      if (o1 >= 0) row[o1] += 1.0;
      if (o0 >= 0) row[o0] -= 1.0;
      rows.push_back(row);
      rhs.push_back(state.params[k - 1] - state.params[k]);
    }
  }
  qp.A.resize(static_cast<Eigen::Index>(rows.size()), n);
  qp.b.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    qp.A.row(static_cast<Eigen::Index>(r)) = rows[r];
    qp.b[static_cast<Eigen::Index>(r)] = rhs[r];
  }

  const Eigen::VectorXd radius = cfg.pose_radius(space);
  qp.upper.resize(n);
  for (int i = 0; i < problem.pose_count(); ++i) {
    if (layout.pose_offset[i] >= 0) qp.upper.segment(layout.pose_offset[i], dim) = radius_scale * radius;
  }
  for (int k = 0; k < problem.param_count(); ++k) {
    if (layout.param_offset[k] >= 0) qp.upper[layout.param_offset[k]] = radius_scale * cfg.param_radius;
  }
  qp.lower = -qp.upper;
  return out;
}

namespace {

// Minimum-violation variant: every row gets a slack t >= 0 with a linear
// penalty, so the QP is always feasible inside the trust box.
QpProblem elastic_qp(const QpProblem& qp) {
  const int n = qp.n(), m = qp.m();
  QpProblem e;
  e.Q = Eigen::MatrixXd::Identity(n + m, n + m);
  e.Q.topLeftCorner(n, n) = qp.Q;
  e.c.resize(n + m);
  e.c << qp.c, Eigen::VectorXd::Constant(m, kElasticPenalty);
  e.A.resize(m, n + m);
  e.A << qp.A, Eigen::MatrixXd::Identity(m, m);
  e.b = qp.b;
  e.lower.resize(n + m);
  e.upper.resize(n + m);
  e.lower << qp.lower, Eigen::VectorXd::Zero(m);
  e.upper << qp.upper, Eigen::VectorXd::Constant(m, std::numeric_limits<double>::infinity());
  return e;
}

PlanState apply_step(const PlanProblem& problem, const VariableLayout& layout, const PlanState& state,
                     const Eigen::VectorXd& delta) {
  const int dim = problem.space.pose_dim();
  PlanState next = state;
  for (int i = 0; i < problem.pose_count(); ++i) {
    if (layout.pose_offset[i] >= 0) next.poses[i] += delta.segment(layout.pose_offset[i], dim);
  }
  for (int k = 0; k < problem.param_count(); ++k) {
    if (layout.param_offset[k] >= 0) next.params[k] += delta[layout.param_offset[k]];
  }
  return next;
}

}  // namespace

PlanResult sqp_solve(const PlanProblem& problem, const SqpConfig& cfg) {
  validate_problem(problem);
  if (cfg.max_iters < 1 || !(cfg.step_tol > 0.0) || !(cfg.constraint_tol > 0.0) || !(cfg.lambda >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "SQP iterations, tolerances and lambda must be positive");
  }
  const Eigen::VectorXd radius = cfg.pose_radius(problem.space);
  if ((radius.array() <= 0.0).any() || !(cfg.param_radius >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "trust radii must be positive");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const VariableLayout layout = variable_layout(problem);
  const int dim = problem.space.pose_dim();

  PlanState state = initial_state(problem);
  if (cfg.init_jitter > 0.0) {
    Rng rng(cfg.rng_seed);
    for (int i = 0; i < problem.pose_count(); ++i) {
      if (problem.fixed[i]) continue;
      for (int d = 0; d < dim; ++d) state.poses[i][d] += rng.uniform(-cfg.init_jitter, cfg.init_jitter);
    }
  }
  Eigen::VectorXd var_radius(layout.size);
  for (int i = 0; i < problem.pose_count(); ++i) {
    if (layout.pose_offset[i] >= 0) var_radius.segment(layout.pose_offset[i], dim) = radius;
  }
  for (int k = 0; k < problem.param_count(); ++k) {
    if (layout.param_offset[k] >= 0) var_radius[layout.param_offset[k]] = cfg.param_radius;
  }

  PlanResult result;
  double J = plan_objective(problem, state, cfg);
  double V = plan_violation(problem, state, cfg.margin);
  double scale = 1.0;
  double mu = 1.0;
  int streak = 0;
  // Quasi-Newton state: B, and the multiplier-weighted constraint gradient
  // and objective gradient at the last accepted point.
  Eigen::MatrixXd B;
  Eigen::VectorXd last_step, last_grad, lambda_k;
  Eigen::MatrixXd last_rows;
  const auto reach_gradients = [&](const LocalQp& l) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(problem.reach.size()), layout.size);
    for (int r = 0; r < l.reach_rows; ++r) g.row(l.reach_index[static_cast<std::size_t>(r)]) = l.qp.A.row(r);
    return g;
  };
  for (int it = 0; it < cfg.max_iters; ++it) {
    result.iterations = it + 1;
    SqpIterate rec;
    LocalQp local = build_local_qp(problem, state, cfg, scale);
    if (cfg.quasi_newton && layout.size > 0) {
      const Eigen::MatrixXd rows = reach_gradients(local);
      if (B.size() == 0) {
        B = local.qp.Q;
      } else if (last_step.size() > 0) {
        // y = grad L(new) - grad L(old) with the latest multipliers; Powell
        // damping keeps B positive definite.
        const Eigen::VectorXd y = (local.qp.c - last_grad) - (rows - last_rows).transpose() * lambda_k;
        const Eigen::VectorXd Bs = B * last_step;
        const double sBs = last_step.dot(Bs), sy = last_step.dot(y);
        if (sBs > 1e-300) {
          const double theta = sy >= 0.2 * sBs ? 1.0 : 0.8 * sBs / (sBs - sy);
          const Eigen::VectorXd r = theta * y + (1.0 - theta) * Bs;
          B += r * r.transpose() / last_step.dot(r) - Bs * Bs.transpose() / sBs;
          B = 0.5 * (B + B.transpose()).eval();
        }
      }
      last_step.resize(0);
      last_grad = local.qp.c;
      last_rows = rows;
      local.qp.Q = B;
    }
    QpSolution sol = solve_qp(local.qp, cfg.qp_tol);
    rec.qp_status = sol.status;
    if (sol.status != QpStatus::kOptimal) {
      sol = solve_qp(elastic_qp(local.qp), cfg.qp_tol);
      rec.elastic = true;
      if (sol.status != QpStatus::kOptimal) {
        rec.radius_scale = scale;
        rec.objective = J;
        rec.violation = V;
        result.trace.push_back(rec);
        continue;
      }
    }
    rec.radius_scale = scale;
    if (sol.row_multipliers.size() > 0) mu = std::max(mu, 2.0 * sol.row_multipliers.cwiseAbs().sum() + 1.0);
    Eigen::VectorXd delta = sol.z.head(layout.size);
    PlanState cand = apply_step(problem, layout, state, delta);
    double Jn = plan_objective(problem, cand, cfg);
    double Vn = plan_violation(problem, cand, cfg.margin);
    // Exact-penalty merit J + mu V; mu tracks the constraint multipliers so
    // that a minimizer of the merit is a KKT point of the plan.
    const auto acceptable = [&](double j_new, double v_new) {
      const double merit = J + mu * V;
      return j_new + mu * v_new < merit - 1e-14 * (1.0 + std::abs(merit)) || (v_new <= V && j_new <= J);
    };
    rec.accepted = acceptable(Jn, Vn);
    if (!rec.accepted && !rec.elastic && local.reach_rows > 0) {
      // Second-order correction: shift each reachability row by the error of
      // its linearization at the trial point.
      const Eigen::VectorXd f_trial = reach_values(problem, cand);
      QpProblem soc = local.qp;
      for (int r = 0; r < local.reach_rows; ++r) {
        const int k = local.reach_index[static_cast<std::size_t>(r)];
        soc.b[r] = cfg.margin - f_trial[k] + soc.A.row(r).dot(delta);
      }
      const QpSolution corrected = solve_qp(soc, cfg.qp_tol);
      if (corrected.status == QpStatus::kOptimal) {
        const PlanState cand2 = apply_step(problem, layout, state, corrected.z);
        const double J2 = plan_objective(problem, cand2, cfg);
        const double V2 = plan_violation(problem, cand2, cfg.margin);
        if (acceptable(J2, V2)) {
          delta = corrected.z;
          cand = cand2;
          Jn = J2;
          Vn = V2;
          rec.accepted = true;
          rec.second_order = true;
        }
      }
    }
    rec.step_inf = delta.size() > 0 ? delta.cwiseAbs().maxCoeff() : 0.0;
    for (int j = 0; j < layout.size; ++j) {
      if (var_radius[j] > 0.0) rec.max_step_ratio = std::max(rec.max_step_ratio, std::abs(delta[j]) / var_radius[j]);
    }
    rec.objective = Jn;
    rec.violation = Vn;
    const bool small = rec.step_inf <= cfg.step_tol && !rec.elastic;
    result.trace.push_back(rec);
    if (cfg.quasi_newton && sol.row_multipliers.size() >= local.reach_rows) {
      lambda_k = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(problem.reach.size()));
      for (int r = 0; r < local.reach_rows; ++r) {
        lambda_k[local.reach_index[static_cast<std::size_t>(r)]] = sol.row_multipliers[r];
      }
    }
    if (rec.accepted) {
      if (cfg.quasi_newton && lambda_k.size() > 0) last_step = delta;
      state = cand;
      J = Jn;
      V = Vn;
      if (++streak >= 2) {
        scale = std::min(1.0, 2.0 * scale);
        streak = 0;
      }
    } else {
      streak = 0;
      scale *= 0.5;
    }
    if (small && V <= cfg.constraint_tol) {
      result.converged = true;
      break;
    }
    if (scale < kMinRadiusScale) break;
  }

  for (int i = 0; i < problem.pose_count(); ++i) result.poses.push_back(Pose(problem.space, state.poses[i]));
  result.params = state.params;
  result.constraint_values = reach_values(problem, state);
  for (const ReachConstraint& c : problem.reach) result.constraint_labels.push_back(c.label);
  result.objective = J;
  result.violation = plan_violation(problem, state, 0.0);
  for (const PoseTerm& t : problem.targets) {
    result.residuals.push_back(pose_diff(problem.space, state.poses[t.pose], t.target.coords()).norm());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------

PlanProblem basic_problem(MapPtr map, const Pose& target, const Pose& initial) {
  if (!map) throw Error(ErrorCode::kInvalidArgument, "missing map");
  PlanProblem p;
  p.variant = PlanVariant::kBasic;
  p.space = target.space();
  p.initial = {Pose::identity(p.space), initial};
  p.fixed = {1, 0};
  p.targets.push_back({1, target, 1.0, false});
  p.reach.push_back({std::move(map), PoseRef::pose(0), PoseRef::pose(1), "target"});
  return p;
}

PlanProblem placement_problem(const PlacementRequest& req, MapPtr map) {
  if (req.targets.empty()) throw Error(ErrorCode::kInvalidArgument, "placement needs at least one target");
  if (!map) throw Error(ErrorCode::kInvalidArgument, "missing map");
  PlanProblem p;
  p.variant = PlanVariant::kSimultaneous;
  p.space = req.base_initial.space();
  p.initial.push_back(req.base_initial);
  p.fixed.push_back(0);
  p.targets.push_back({0, req.base_target, 1.0, true});
  for (std::size_t i = 0; i < req.targets.size(); ++i) {
    const int idx = static_cast<int>(i) + 1;
    p.initial.push_back(req.targets[i]);
    p.fixed.push_back(0);
    p.targets.push_back({idx, req.targets[i], 1.0, false});
    p.reach.push_back({map, PoseRef::pose(0), PoseRef::pose(idx), "target " + std::to_string(idx)});
  }
  return p;
}

PlanResult plan_placement(const PlacementRequest& req, MapPtr map, const SqpConfig& cfg) {
  return sqp_solve(placement_problem(req, std::move(map)), cfg);
}

FootstepMaps FootstepMaps::mirrored(MapPtr left_from_right) {
  if (!left_from_right) throw Error(ErrorCode::kInvalidArgument, "missing footstep map");
  FootstepMaps m;
  m.right_from_left = std::make_shared<MirroredMap>(left_from_right);
  m.left_from_right = std::move(left_from_right);
  return m;
}

std::vector<Side> footstep_sides(const FootstepRequest& req) {
  return alternate_sides(req.first_swing, req.n_steps);
}

PlanProblem footstep_problem(const FootstepRequest& req, const FootstepMaps& maps) {
  check_maps(maps);
  if (req.n_steps < 2) throw Error(ErrorCode::kInvalidArgument, "footstep plans need at least two steps");
  const TaskSpace se2(SpaceKind::kSE2);
  for (const Pose* p : {&req.start_left, &req.start_right, &req.goal_left, &req.goal_right}) {
    if (p->space() != se2) throw Error(ErrorCode::kSpaceMismatch, "footstep poses must be SE2");
  }
  const std::vector<Side> sides = footstep_sides(req);
  const auto start = [&](Side s) { return s == Side::kLeft ? req.start_left : req.start_right; };
  const auto goal = [&](Side s) { return s == Side::kLeft ? req.goal_left : req.goal_right; };

  PlanProblem p;
  p.variant = PlanVariant::kSequential;
  p.space = se2;
  p.initial = {start(sides[0]), start(sides[1])};
  p.fixed = {1, 1};
  // Each foot moves in equal increments from its start to its goal.
  const int swings_first = (req.n_steps + 1) / 2, swings_second = req.n_steps / 2;
  int count_first = 0, count_second = 0;
  for (int k = 1; k <= req.n_steps; ++k) {
    const int idx = k + 1;
    const Side side = sides[idx];
    const bool first = side == sides[0];
    const double t = first ? static_cast<double>(++count_first) / swings_first
                           : static_cast<double>(++count_second) / swings_second;
    p.initial.push_back(lerp_pose(start(side), goal(side), t));
    p.fixed.push_back(0);
    p.smoothing.emplace_back(idx - 1, idx);
    p.reach.push_back({foot_map(maps, side), PoseRef::pose(idx - 1), PoseRef::pose(idx),
                       "step " + std::to_string(k)});
  }
  const int last = req.n_steps + 1;
  p.targets.push_back({last - 1, goal(sides[last - 1]), 1.0, false});
  p.targets.push_back({last, goal(sides[last]), 1.0, false});
  for (const HalfPlane& h : req.obstacles) {
    const int lo = std::max(1, h.first_step);
    const int hi = h.last_step < 0 ? req.n_steps : std::min(h.last_step, req.n_steps);
    for (int k = lo; k <= hi; ++k) {
      p.linear.push_back({k + 1, Eigen::Vector3d(h.normal[0], h.normal[1], 0.0), h.offset});
    }
  }
  return p;
}

PlanResult plan_footsteps(const FootstepRequest& req, const FootstepMaps& maps, const SqpConfig& cfg) {
  return sqp_solve(footstep_problem(req, maps), cfg);
}

std::vector<bool> verify_footsteps(const BipedModel& biped, const FootstepRequest& req, const PlanResult& plan,
                                   const IkOptions& opts) {
  const std::vector<Side> sides = footstep_sides(req);
  if (plan.poses.size() != sides.size()) {
    throw Error(ErrorCode::kInvalidArgument, "plan does not match the footstep request");
  }
  std::vector<bool> ok;
  for (std::size_t idx = 2; idx < plan.poses.size(); ++idx) {
    const Pose rel = compose(inverse(plan.poses[idx - 1]), plan.poses[idx]);
    ok.push_back(leg_pair_feasible(biped, sides[idx], rel, opts));
  }
  return ok;
}

PlanProblem trajectory_problem(const TrajectoryRequest& req, const FootstepMaps& foot_maps, MapPtr hand_map) {
  check_maps(foot_maps);
  if (!hand_map) throw Error(ErrorCode::kInvalidArgument, "missing hand map");
  if (req.n_steps < 1) throw Error(ErrorCode::kInvalidArgument, "trajectory plans need at least one step");
  if (!req.hand.pose || !req.hand.tangent) throw Error(ErrorCode::kInvalidArgument, "missing hand trajectory");
  const TaskSpace se2(SpaceKind::kSE2);
  const std::vector<Side> sides = alternate_sides(req.first_swing, req.n_steps);
  const auto start = [&](Side s) { return s == Side::kLeft ? req.start_left : req.start_right; };

  PlanProblem p;
  p.variant = PlanVariant::kSequentialWithParam;
  p.space = se2;
  p.trajectory = req.hand;
  p.initial = {start(sides[0]), start(sides[1])};
  p.fixed = {1, 1};
  const Pose hand_in_waist_inv = inverse(req.nominal_hand);
  for (int k = 0; k <= req.n_steps; ++k) {
    p.param_initial.push_back(req.s_start + (req.s_goal - req.s_start) * k / req.n_steps);
    p.param_fixed.push_back(k == 0 ? 1 : 0);
  }
  p.param_targets.push_back({req.n_steps, req.s_goal, req.s_weight});
  p.param_smoothing = req.s_smoothing;
  p.reach.push_back({hand_map, PoseRef::midpoint(0, 1), PoseRef::trajectory(0), "hand double 0"});
  for (int k = 1; k <= req.n_steps; ++k) {
    const int idx = k + 1;
    const Side side = sides[idx];
    // Waist where the hand sits at its nominal offset, feet at the hips.
    const Pose waist = compose(Pose(se2, req.hand.pose(p.param_initial[k]).coords()), hand_in_waist_inv);
    p.initial.push_back(offset_pose(waist, 0.0, side == Side::kLeft ? 0.1 : -0.1));
    p.fixed.push_back(0);
    p.smoothing.emplace_back(idx - 1, idx);
    p.reach.push_back({foot_map(foot_maps, side), PoseRef::pose(idx - 1), PoseRef::pose(idx),
                       "step " + std::to_string(k)});
    p.reach.push_back({hand_map, PoseRef::pose(idx - 1), PoseRef::trajectory(k - 1),
                       "hand single " + std::to_string(k)});
    p.reach.push_back({hand_map, PoseRef::midpoint(idx - 1, idx), PoseRef::trajectory(k),
                       "hand double " + std::to_string(k)});
  }
  return p;
}

PlanResult plan_with_trajectory_param(const TrajectoryRequest& req, const FootstepMaps& foot_maps,
                                      MapPtr hand_map, const SqpConfig& cfg) {
  return sqp_solve(trajectory_problem(req, foot_maps, std::move(hand_map)), cfg);
}

PlanProblem contact_problem(const ContactRequest& req, const FootstepMaps& foot_maps, MapPtr hand_map) {
  check_maps(foot_maps);
  if (!hand_map) throw Error(ErrorCode::kInvalidArgument, "missing hand map");
  if (req.order.empty()) throw Error(ErrorCode::kInvalidArgument, "contact order is empty");
  const TaskSpace se2(SpaceKind::kSE2);
  PlanProblem p;
  p.variant = PlanVariant::kSequential;
  p.space = se2;
  p.initial = {req.start_left, req.start_right, req.start_hand};
  p.fixed = {1, 1, 1};
  int left = 0, right = 1, hand = 2;
  const int n_left = static_cast<int>(std::count(req.order.begin(), req.order.end(), Contact::kLeftFoot));
  const int n_right = static_cast<int>(std::count(req.order.begin(), req.order.end(), Contact::kRightFoot));
  int moved_left = 0, moved_right = 0;
  for (std::size_t k = 0; k < req.order.size(); ++k) {
    const int idx = p.pose_count();
    const std::string tag = " " + std::to_string(k + 1);
    switch (req.order[k]) {
      case Contact::kLeftFoot:
      case Contact::kRightFoot: {
        const bool is_left = req.order[k] == Contact::kLeftFoot;
        const int prev = is_left ? left : right;
        const int stance = is_left ? right : left;
        const Pose& from = is_left ? req.start_left : req.start_right;
        const Pose& to = is_left ? req.goal_left : req.goal_right;
        const double t = is_left ? static_cast<double>(++moved_left) / n_left
                                 : static_cast<double>(++moved_right) / n_right;
        p.initial.push_back(lerp_pose(from, to, t));
        p.fixed.push_back(0);
        p.smoothing.emplace_back(prev, idx);
        const Side swing = is_left ? Side::kLeft : Side::kRight;
        p.reach.push_back({foot_map(foot_maps, swing), PoseRef::pose(stance), PoseRef::pose(idx), "foot" + tag});
        // Single support on the stance foot, then double support.
        p.reach.push_back({hand_map, PoseRef::pose(stance), PoseRef::pose(hand), "hand single" + tag});
        p.reach.push_back({hand_map, PoseRef::midpoint(stance, idx), PoseRef::pose(hand), "hand double" + tag});
        (is_left ? left : right) = idx;
        break;
      }
      case Contact::kHand: {
        p.initial.push_back(Pose::raw(se2, resolve(p, initial_state(p), PoseRef::pose(hand)).coords()));
        p.fixed.push_back(0);
        p.smoothing.emplace_back(hand, idx);
        p.reach.push_back({hand_map, PoseRef::midpoint(left, right), PoseRef::pose(idx), "hand" + tag});
        hand = idx;
        break;
      }
    }
  }
  p.targets.push_back({left, req.goal_left, 1.0, false});
  p.targets.push_back({right, req.goal_right, 1.0, false});
  return p;
}

// ---------------------------------------------------------------------------

std::string plan_to_csv(const PlanProblem& problem, const PlanResult& result) {
  const TaskSpace& space = problem.space;
  static const char* kNames[] = {"x", "y", "z"};
  std::string out = "kind,index,";
  const int dim = space.pose_dim();
  for (int d = 0; d < dim; ++d) {
    out += has_angle(space) && d == 2 ? "theta" : kNames[d];
    out += ',';
  }
  out += "value,label\n";
  for (std::size_t i = 0; i < result.poses.size(); ++i) {
    out += "pose," + std::to_string(i) + ',';
    for (int d = 0; d < dim; ++d) out += fmt(result.poses[i][d]) + ',';
    out += problem.fixed[i] ? ",fixed\n" : ",free\n";
  }
  for (std::size_t k = 0; k < result.params.size(); ++k) {
    out += "param," + std::to_string(k) + ',';
    for (int d = 0; d < dim; ++d) out += ',';
    out += fmt(result.params[k]) + ",s\n";
  }
  for (Eigen::Index k = 0; k < result.constraint_values.size(); ++k) {
    out += "constraint," + std::to_string(k) + ',';
    for (int d = 0; d < dim; ++d) out += ',';
    out += fmt(result.constraint_values[k]) + ',' + result.constraint_labels[static_cast<std::size_t>(k)] + '\n';
  }
  return out;
}

}  // namespace reachmap
