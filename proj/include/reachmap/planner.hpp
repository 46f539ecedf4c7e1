#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachmap/geometry.hpp"
#include "reachmap/kinematics.hpp"
#include "reachmap/models.hpp"
#include "reachmap/qp.hpp"

namespace reachmap {

enum class PlanVariant { kBasic, kSimultaneous, kSequential, kSequentialWithParam };

std::string plan_variant_name(PlanVariant v);
PlanVariant plan_variant_from_name(const std::string& name);

// A pose that a reachability constraint refers to: one of the problem poses,
// the midpoint of two of them, or the trajectory r_h(s_k).
struct PoseRef {
  enum class Kind { kPose, kMidpoint, kTrajectory };
  Kind kind = Kind::kPose;
  int a = 0;
  int b = 0;

  static PoseRef pose(int i) { return {Kind::kPose, i, i}; }
  static PoseRef midpoint(int i, int j) { return {Kind::kMidpoint, i, j}; }
  static PoseRef trajectory(int k) { return {Kind::kTrajectory, k, k}; }
};

// f(x_rel(anchor, target)) >= margin.
struct ReachConstraint {
  MapPtr map;
  PoseRef anchor;
  PoseRef target;
  std::string label;
};

// a . r_pose >= b on the pose coordinates (obstacle half-planes).
struct LinearConstraint {
  int pose = 0;
  Eigen::VectorXd a;
  double b = 0.0;
};

// (weight / 2) |r_pose - target|^2, angle differences wrapped. With
// lambda_weighted the weight is additionally multiplied by SqpConfig::lambda.
struct PoseTerm {
  int pose = 0;
  Pose target;
  double weight = 1.0;
  bool lambda_weighted = false;
};

struct ParamTerm {
  int index = 0;
  double target = 0.0;
  double weight = 1.0;
};

// A pose trajectory r_h(s) with its derivative d r_h / ds (pose coordinates).
struct PoseTrajectory {
  std::function<Pose(double)> pose;
  std::function<Eigen::VectorXd(double)> tangent;
  std::string name;
};

// r_h(s) = hinge + (l cos s, l sin s), hand yaw s.
PoseTrajectory door_arc(double radius, double hinge_x = 0.0, double hinge_y = 0.0);

struct PlanProblem {
  PlanVariant variant = PlanVariant::kSequential;
  TaskSpace space;
  std::vector<Pose> initial;  // initial guesses r_0..r_N
  std::vector<char> fixed;    // poses held at their initial value
  std::vector<PoseTerm> targets;
  std::vector<std::pair<int, int>> smoothing;  // (lambda / 2) |r_a - r_b|^2
  std::vector<ReachConstraint> reach;
  std::vector<LinearConstraint> linear;

  // SequentialWithParam only.
  std::optional<PoseTrajectory> trajectory;
  std::vector<double> param_initial;
  std::vector<char> param_fixed;
  std::vector<ParamTerm> param_targets;
  bool monotone_params = true;  // s_k >= s_{k-1}
  double param_smoothing = 0.0;  // (w / 2) sum_k (s_k - s_{k-1})^2

  int pose_count() const { return static_cast<int>(initial.size()); }
  int param_count() const { return static_cast<int>(param_initial.size()); }
};

struct SqpConfig {
  double lambda = 1.0;
  // Per pose coordinate; empty means 0.1 per position and 0.2 per angle.
  Eigen::VectorXd trust_radius;
  double param_radius = 0.05;
  int max_iters = 100;
  double step_tol = 1e-6;
  double constraint_tol = 1e-6;
  // Reachability rows are linearized as f >= margin.
  double margin = 0.0;
  double qp_tol = 1e-9;
  std::uint64_t rng_seed = 0;
  double init_jitter = 0.0;  // uniform noise added to free initial poses
  // Replace the objective Hessian in the local QP by a damped BFGS estimate
  // of the Lagrangian Hessian (seeded with the objective Hessian), so the
  // curvature of active reachability constraints is seen by the step.
  bool quasi_newton = true;

  // lambda 1e-2 for Simultaneous, 1.0 otherwise.
  static SqpConfig defaults(PlanVariant v);
  Eigen::VectorXd pose_radius(const TaskSpace& space) const;
};

// Current estimate: raw pose coordinates (angles not wrapped) and parameters.
struct PlanState {
  std::vector<Eigen::VectorXd> poses;
  std::vector<double> params;
};

PlanState initial_state(const PlanProblem& problem);

// Column offsets of the free poses and parameters in the QP variable vector.
struct VariableLayout {
  std::vector<int> pose_offset;   // -1 if fixed
  std::vector<int> param_offset;  // -1 if fixed
  int size = 0;
};

VariableLayout variable_layout(const PlanProblem& problem);

// Throws kInvalidArgument / kDimensionMismatch / kSpaceMismatch.
void validate_problem(const PlanProblem& problem);

struct LocalQp {
  QpProblem qp;
  int reach_rows = 0;  // rows [0, reach_rows) are reachability constraints
  std::vector<int> reach_index;  // constraint behind each of those rows
  Eigen::VectorXd values;  // f at the current state, one per reach constraint
};

// Local QP over the free variables. Box bounds are the trust radius scaled by
// radius_scale; Q carries +1e-8 I.
LocalQp build_local_qp(const PlanProblem& problem, const PlanState& state, const SqpConfig& cfg,
                       double radius_scale = 1.0);

double plan_objective(const PlanProblem& problem, const PlanState& state, const SqpConfig& cfg);
Eigen::VectorXd reach_values(const PlanProblem& problem, const PlanState& state);
// max(0, margin - f, b - a.r, s_{k-1} - s_k) over all constraints.
double plan_violation(const PlanProblem& problem, const PlanState& state, double margin);

Pose resolve(const PlanProblem& problem, const PlanState& state, const PoseRef& ref);

struct SqpIterate {
  double objective = 0.0;  // at the candidate
  double violation = 0.0;  // at the candidate
  double step_inf = 0.0;
  double radius_scale = 1.0;
  double max_step_ratio = 0.0;  // max_j |delta_j| / trust_radius_j
  bool accepted = false;
  bool elastic = false;
  bool second_order = false;  // accepted after a second-order correction
  QpStatus qp_status = QpStatus::kOptimal;
};

struct PlanResult {
  std::vector<Pose> poses;
  std::vector<double> params;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd constraint_values;  // f per reach constraint
  std::vector<std::string> constraint_labels;
  double objective = 0.0;
  double violation = 0.0;
  std::vector<SqpIterate> trace;
  // |r_i - target| per PoseTerm, in problem order.
  std::vector<double> residuals;
  double seconds = 0.0;
};

// Trust-region SQP. A step is accepted if it decreases the merit J + mu V
// (mu above the constraint multipliers) or if neither J nor V increases. A
// rejected step halves the radius; two accepted
// steps in a row double it again, up to the nominal radius. An infeasible
// local QP is replaced by its minimum-violation (elastic) version.
PlanResult sqp_solve(const PlanProblem& problem, const SqpConfig& cfg);

// ---------------------------------------------------------------------------
// Problem builders.

// min 1/2 |r - target|^2 s.t. f(x(r)) >= 0. Pose 0 is the fixed origin.
PlanProblem basic_problem(MapPtr map, const Pose& target, const Pose& initial);

struct PlacementRequest {
  std::vector<Pose> targets;
  Pose base_target;
  Pose base_initial;
};

// Pose 0 is the base, poses 1..N the end effector, initialized at the targets.
PlanProblem placement_problem(const PlacementRequest& req, MapPtr map);
PlanResult plan_placement(const PlacementRequest& req, MapPtr map, const SqpConfig& cfg);

struct HalfPlane {
  Eigen::Vector2d normal;  // n . (x, y) >= offset
  double offset = 0.0;
  int first_step = 1;      // applies to steps first_step..last_step (1-based)
  int last_step = -1;      // -1: through the final step
};

struct FootstepRequest {
  Pose start_left;
  Pose start_right;
  Pose goal_left;
  Pose goal_right;
  int n_steps = 10;
  Side first_swing = Side::kRight;
  std::vector<HalfPlane> obstacles;
};

struct FootstepMaps {
  MapPtr left_from_right;  // left foot relative to right foot
  MapPtr right_from_left;
  static FootstepMaps mirrored(MapPtr left_from_right);
};

// Pose 0 is the first swing foot's start, pose 1 the stance foot's start (both
// fixed); pose k + 1 is step k. Initialization interpolates each foot from its
// start to its goal.
PlanProblem footstep_problem(const FootstepRequest& req, const FootstepMaps& maps);
PlanResult plan_footsteps(const FootstepRequest& req, const FootstepMaps& maps, const SqpConfig& cfg);
// Side of every pose in a footstep problem.
std::vector<Side> footstep_sides(const FootstepRequest& req);
// Leg-pair IK for each planned step relative to the preceding foot.
std::vector<bool> verify_footsteps(const BipedModel& biped, const FootstepRequest& req,
                                   const PlanResult& plan, const IkOptions& opts);

struct TrajectoryRequest {
  Pose start_left;
  Pose start_right;
  int n_steps = 6;
  Side first_swing = Side::kRight;
  PoseTrajectory hand;
  double s_start = 0.0;
  double s_goal = 1.0;
  double s_weight = 1.0;
  double s_smoothing = 0.1;
  // Hand pose in the waist frame used to place the initial footsteps.
  Pose nominal_hand = Pose::se2(0.45, -0.2, 0.0);
};

// Poses as in footstep_problem; param k is the hand parameter after step k
// (param 0 at s_start, fixed). Single support of step k anchors the hand at
// the stance foot with s_{k-1}; double support after step k anchors it at the
// midpoint of both feet with s_k.
PlanProblem trajectory_problem(const TrajectoryRequest& req, const FootstepMaps& foot_maps,
                               MapPtr hand_map);
PlanResult plan_with_trajectory_param(const TrajectoryRequest& req, const FootstepMaps& foot_maps,
                                      MapPtr hand_map, const SqpConfig& cfg);

// Contact sequence with a fixed transition order. Each contact is a foot or
// the hand; the waist anchor is the stance foot in single support and the
// feet midpoint in double support.
enum class Contact { kLeftFoot, kRightFoot, kHand };

struct ContactRequest {
  Pose start_left;
  Pose start_right;
  Pose start_hand;
  std::vector<Contact> order;  // one entry per planned contact
  Pose goal_left;
  Pose goal_right;
};

PlanProblem contact_problem(const ContactRequest& req, const FootstepMaps& foot_maps, MapPtr hand_map);

// Long-format CSV, header kind,index,<pose coords>,value,label. Pose rows carry
// coordinates and fixed/free, param rows the value of s, constraint rows f.
std::string plan_to_csv(const PlanProblem& problem, const PlanResult& result);
std::string plan_to_json(const PlanResult& result);

// Plan problem files (JSON). Every file has "kind" (basic, placement,
// footsteps, trajectory, contacts), "models" (paths relative to the file) and
// an optional "sqp" block overriding SqpConfig fields. Poses are arrays in
// the problem's task space. Unknown keys are schema errors. See README for
// the per-kind fields.
struct PlanFile {
  std::string kind;
  PlanProblem problem;
  SqpConfig config;
  std::vector<std::string> model_paths;  // resolved, in the order loaded
};

PlanFile plan_file_from_json(const std::string& text, const std::string& base_dir);
PlanFile load_plan_file(const std::string& path);

}  // namespace reachmap
