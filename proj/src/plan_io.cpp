#include <initializer_list>

#include <json.hpp>

#include "reachmap/chain_io.hpp"
#include "reachmap/error.hpp"
#include "reachmap/planner.hpp"

namespace reachmap {

std::string plan_to_json(const PlanResult& result) {
  nlohmann::ordered_json j;
  j["converged"] = result.converged;
  j["iterations"] = result.iterations;
  j["objective"] = result.objective;
  j["violation"] = result.violation;
  auto poses = nlohmann::ordered_json::array();
  for (const Pose& p : result.poses) {
    poses.push_back(std::vector<double>(p.coords().data(), p.coords().data() + p.coords().size()));
  }
  j["poses"] = poses;
  j["params"] = result.params;
  auto cons = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < result.constraint_values.size(); ++k) {
    cons.push_back({{"label", result.constraint_labels[static_cast<std::size_t>(k)]},
                    {"value", result.constraint_values[k]}});
  }
  j["constraints"] = cons;
  j["residuals"] = result.residuals;
  auto trace = nlohmann::ordered_json::array();
  for (const SqpIterate& it : result.trace) {
    trace.push_back({{"objective", it.objective},
                     {"violation", it.violation},
                     {"step", it.step_inf},
                     {"radius_scale", it.radius_scale},
                     {"accepted", it.accepted},
                     {"elastic", it.elastic},
                     {"second_order", it.second_order},
                     {"qp", qp_status_name(it.qp_status)}});
  }
  j["trace"] = trace;
  return j.dump(2) + "\n";
}


namespace {

using Json = nlohmann::json;

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error(ErrorCode::kSchema, where + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(ErrorCode::kSchema, "unknown key '" + it.key() + "' in " + where);
  }
}

const Json& need(const Json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw Error(ErrorCode::kSchema, where + " is missing '" + key + "'");
  return obj.at(key);
}

double number(const Json& j, const std::string& what) {
  if (!j.is_number()) throw Error(ErrorCode::kSchema, what + " must be a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& what) {
  if (!j.is_number_integer()) throw Error(ErrorCode::kSchema, what + " must be an integer");
  return j.get<int>();
}

Pose pose(const Json& j, TaskSpace space, const std::string& what) {
  const int n = space.coord_dim();
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    throw Error(ErrorCode::kSchema, what + " must be an array of " + std::to_string(n) + " numbers");
  }
  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) c[i] = number(j[static_cast<std::size_t>(i)], what);
  return Pose(space, c);
}

Side side(const Json& j, const std::string& what) {
  if (j == "left") return Side::kLeft;
  if (j == "right") return Side::kRight;
  throw Error(ErrorCode::kSchema, what + " must be \"left\" or \"right\"");
}

std::string join_path(const std::string& dir, const std::string& p) {
  if (p.empty() || p.front() == '/' || dir.empty()) return p;
  return dir.back() == '/' ? dir + p : dir + "/" + p;
}

struct Loader {
  std::string base_dir;
  PlanFile* file;

  MapPtr map(const Json& models, const char* key) {
    const Json& j = need(models, key, "models");
    if (!j.is_string()) throw Error(ErrorCode::kSchema, std::string("models.") + key + " must be a path");
    const std::string path = join_path(base_dir, j.get<std::string>());
    file->model_paths.push_back(path);
    return load_model(path);
  }
};

void apply_sqp(const Json& j, SqpConfig& cfg) {
  check_keys(j, "sqp", {"lambda", "trust_radius", "param_radius", "max_iters", "step_tol", "constraint_tol",
                        "margin", "qp_tol", "seed", "init_jitter"});
  if (j.contains("lambda")) cfg.lambda = number(j["lambda"], "sqp.lambda");
  if (j.contains("trust_radius")) {
    const Json& t = j["trust_radius"];
    if (!t.is_array()) throw Error(ErrorCode::kSchema, "sqp.trust_radius must be an array");
    cfg.trust_radius.resize(static_cast<Eigen::Index>(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
      cfg.trust_radius[static_cast<Eigen::Index>(i)] = number(t[i], "sqp.trust_radius");
    }
  }
  if (j.contains("param_radius")) cfg.param_radius = number(j["param_radius"], "sqp.param_radius");
  if (j.contains("max_iters")) cfg.max_iters = integer(j["max_iters"], "sqp.max_iters");
  if (j.contains("step_tol")) cfg.step_tol = number(j["step_tol"], "sqp.step_tol");
  if (j.contains("constraint_tol")) cfg.constraint_tol = number(j["constraint_tol"], "sqp.constraint_tol");
  if (j.contains("margin")) cfg.margin = number(j["margin"], "sqp.margin");
  if (j.contains("qp_tol")) cfg.qp_tol = number(j["qp_tol"], "sqp.qp_tol");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw Error(ErrorCode::kSchema, "sqp.seed must be a non-negative integer");
    cfg.rng_seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("init_jitter")) cfg.init_jitter = number(j["init_jitter"], "sqp.init_jitter");
}

}  // namespace

PlanFile plan_file_from_json(const std::string& text, const std::string& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("plan file: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "plan file must be a JSON object");
  PlanFile out;
  Loader load{base_dir, &out};
  const Json& kind_j = need(j, "kind", "plan file");
  if (!kind_j.is_string()) throw Error(ErrorCode::kSchema, "kind must be a string");
  out.kind = kind_j.get<std::string>();
  const Json& models = need(j, "models", "plan file");
  const TaskSpace se2(SpaceKind::kSE2);

  if (out.kind == "basic") {
    check_keys(j, "plan file", {"kind", "models", "sqp", "target", "initial"});
    check_keys(models, "models", {"map"});
    MapPtr m = load.map(models, "map");
    const Pose target = pose(need(j, "target", "plan file"), m->space(), "target");
    const Pose initial = j.contains("initial") ? pose(j["initial"], m->space(), "initial") : target;
    out.problem = basic_problem(m, target, initial);
  } else if (out.kind == "placement") {
    check_keys(j, "plan file", {"kind", "models", "sqp", "targets", "base"});
    check_keys(models, "models", {"map"});
    MapPtr m = load.map(models, "map");
    PlacementRequest req;
    const Json& targets = need(j, "targets", "plan file");
    if (!targets.is_array() || targets.empty()) throw Error(ErrorCode::kSchema, "targets must be a non-empty array");
    for (const Json& t : targets) req.targets.push_back(pose(t, m->space(), "targets[]"));
    const Json& base = need(j, "base", "plan file");
    check_keys(base, "base", {"initial", "target"});
    req.base_initial = pose(need(base, "initial", "base"), m->space(), "base.initial");
    req.base_target = base.contains("target") ? pose(base["target"], m->space(), "base.target") : req.base_initial;
    out.problem = placement_problem(req, m);
  } else if (out.kind == "footsteps") {
    check_keys(j, "plan file", {"kind", "models", "sqp", "start", "goal", "steps", "first_swing", "obstacles"});
    check_keys(models, "models", {"feet"});
    const FootstepMaps fm = FootstepMaps::mirrored(load.map(models, "feet"));
    FootstepRequest req;
    const Json& start = need(j, "start", "plan file");
    const Json& goal = need(j, "goal", "plan file");
    check_keys(start, "start", {"left", "right"});
    check_keys(goal, "goal", {"left", "right"});
    req.start_left = pose(need(start, "left", "start"), se2, "start.left");
    req.start_right = pose(need(start, "right", "start"), se2, "start.right");
    req.goal_left = pose(need(goal, "left", "goal"), se2, "goal.left");
    req.goal_right = pose(need(goal, "right", "goal"), se2, "goal.right");
    if (j.contains("steps")) req.n_steps = integer(j["steps"], "steps");
    if (j.contains("first_swing")) req.first_swing = side(j["first_swing"], "first_swing");
    if (j.contains("obstacles")) {
      if (!j["obstacles"].is_array()) throw Error(ErrorCode::kSchema, "obstacles must be an array");
      for (const Json& o : j["obstacles"]) {
        check_keys(o, "obstacle", {"normal", "offset", "first_step", "last_step"});
        HalfPlane h;
        const Json& n = need(o, "normal", "obstacle");
        if (!n.is_array() || n.size() != 2) throw Error(ErrorCode::kSchema, "obstacle normal must be [nx, ny]");
        h.normal = Eigen::Vector2d(number(n[0], "normal"), number(n[1], "normal"));
        h.offset = number(need(o, "offset", "obstacle"), "obstacle offset");
        if (o.contains("first_step")) h.first_step = integer(o["first_step"], "first_step");
        if (o.contains("last_step")) h.last_step = integer(o["last_step"], "last_step");
        req.obstacles.push_back(h);
      }
    }
    out.problem = footstep_problem(req, fm);
  } else if (out.kind == "trajectory") {
    check_keys(j, "plan file", {"kind", "models", "sqp", "start", "steps", "first_swing", "hand", "s", "nominal_hand"});
    check_keys(models, "models", {"feet", "hand"});
    const FootstepMaps fm = FootstepMaps::mirrored(load.map(models, "feet"));
    MapPtr hand_map = load.map(models, "hand");
    TrajectoryRequest req;
    const Json& hand = need(j, "hand", "plan file");
    check_keys(hand, "hand", {"radius", "hinge"});
    double hx = 0.0, hy = 0.0;
    if (hand.contains("hinge")) {
      const Json& h = hand["hinge"];
      if (!h.is_array() || h.size() != 2) throw Error(ErrorCode::kSchema, "hand.hinge must be [x, y]");
      hx = number(h[0], "hand.hinge");
      hy = number(h[1], "hand.hinge");
    }
    req.hand = door_arc(number(need(hand, "radius", "hand"), "hand.radius"), hx, hy);
    if (j.contains("s")) {
      const Json& s = j["s"];
      check_keys(s, "s", {"start", "goal", "weight", "smoothing"});
      if (s.contains("start")) req.s_start = number(s["start"], "s.start");
      if (s.contains("goal")) req.s_goal = number(s["goal"], "s.goal");
      if (s.contains("weight")) req.s_weight = number(s["weight"], "s.weight");
      if (s.contains("smoothing")) req.s_smoothing = number(s["smoothing"], "s.smoothing");
    }
    if (j.contains("nominal_hand")) req.nominal_hand = pose(j["nominal_hand"], se2, "nominal_hand");
    if (j.contains("steps")) req.n_steps = integer(j["steps"], "steps");
    if (j.contains("first_swing")) req.first_swing = side(j["first_swing"], "first_swing");
    if (j.contains("start")) {
      const Json& start = j["start"];
      check_keys(start, "start", {"left", "right"});
      req.start_left = pose(need(start, "left", "start"), se2, "start.left");
      req.start_right = pose(need(start, "right", "start"), se2, "start.right");
    } else {
      // Stand so that the hand is at its nominal waist-frame pose at s_start.
      const Pose waist = compose(req.hand.pose(req.s_start), inverse(req.nominal_hand));
      req.start_left = compose(waist, Pose::se2(0.0, 0.1, 0.0));
      req.start_right = compose(waist, Pose::se2(0.0, -0.1, 0.0));
    }
    out.problem = trajectory_problem(req, fm, hand_map);
  } else if (out.kind == "contacts") {
    check_keys(j, "plan file", {"kind", "models", "sqp", "start", "goal", "order"});
    check_keys(models, "models", {"feet", "hand"});
    const FootstepMaps fm = FootstepMaps::mirrored(load.map(models, "feet"));
    MapPtr hand_map = load.map(models, "hand");
    ContactRequest req;
    const Json& start = need(j, "start", "plan file");
    const Json& goal = need(j, "goal", "plan file");
    check_keys(start, "start", {"left", "right", "hand"});
    check_keys(goal, "goal", {"left", "right"});
    req.start_left = pose(need(start, "left", "start"), se2, "start.left");
    req.start_right = pose(need(start, "right", "start"), se2, "start.right");
    req.start_hand = pose(need(start, "hand", "start"), se2, "start.hand");
    req.goal_left = pose(need(goal, "left", "goal"), se2, "goal.left");
    req.goal_right = pose(need(goal, "right", "goal"), se2, "goal.right");
    const Json& order = need(j, "order", "plan file");
    if (!order.is_array() || order.empty()) throw Error(ErrorCode::kSchema, "order must be a non-empty array");
    for (const Json& c : order) {
      if (c == "left") req.order.push_back(Contact::kLeftFoot);
      else if (c == "right") req.order.push_back(Contact::kRightFoot);
      else if (c == "hand") req.order.push_back(Contact::kHand);
      else throw Error(ErrorCode::kSchema, "order entries must be \"left\", \"right\" or \"hand\"");
    }
    out.problem = contact_problem(req, fm, hand_map);
  } else {
    throw Error(ErrorCode::kSchema, "unknown plan kind '" + out.kind + "'");
  }

  out.config = SqpConfig::defaults(out.problem.variant);
  if (j.contains("sqp")) apply_sqp(j["sqp"], out.config);
  return out;
}

PlanFile load_plan_file(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return plan_file_from_json(load_text(path), slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace reachmap
