#include "reachmap/chain_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reachmap/error.hpp"

namespace reachmap {

namespace {

using nlohmann::json;

json transform_json(const Eigen::Isometry3d& t) {
  const Eigen::Vector3d p = t.translation();
  // Z-Y-X (yaw, pitch, roll) extraction; rpy = (roll, pitch, yaw).
  const Eigen::Vector3d ypr = t.linear().eulerAngles(2, 1, 0);
  return {{"translation", {p.x(), p.y(), p.z()}}, {"rpy", {ypr[2], ypr[1], ypr[0]}}};
}

Eigen::Vector3d vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw Error(ErrorCode::kSchema, std::string(what) + " must be an array of 3 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Isometry3d transform_from(const json& j) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  if (j.is_null()) return t;
  if (j.contains("translation")) t.translation() = vec3(j["translation"], "translation");
  if (j.contains("rpy")) {
    const Eigen::Vector3d rpy = vec3(j["rpy"], "rpy");
    t.linear() = (Eigen::AngleAxisd(rpy[2], Eigen::Vector3d::UnitZ()) *
                  Eigen::AngleAxisd(rpy[1], Eigen::Vector3d::UnitY()) *
                  Eigen::AngleAxisd(rpy[0], Eigen::Vector3d::UnitX()))
                     .toRotationMatrix();
  }
  return t;
}

json chain_json(const SerialChain& chain) {
  json joints = json::array();
  for (const Joint& jt : chain.joints()) {
    joints.push_back({{"axis", {jt.axis.x(), jt.axis.y(), jt.axis.z()}},
                      {"limits", {jt.lower, jt.upper}},
                      {"offset", transform_json(jt.offset)}});
  }
  json caps = json::array();
  for (const CollisionCapsule& c : chain.capsules()) {
    caps.push_back({{"frames", {c.frame_a, c.frame_b}}, {"radius", c.radius}});
  }
  return {{"type", "chain"},          {"name", chain.name()},
          {"space", chain.space().name()}, {"base", transform_json(chain.base())},
          {"joints", joints},         {"capsules", caps}};
}

SerialChain chain_from(const json& j) {
  std::vector<Joint> joints;
  for (const json& jj : j.at("joints")) {
    Joint jt;
    jt.axis = vec3(jj.at("axis"), "axis");
    const json& lim = jj.at("limits");
    if (!lim.is_array() || lim.size() != 2) throw Error(ErrorCode::kSchema, "limits must be [lo, hi]");
    jt.lower = lim[0].get<double>();
    jt.upper = lim[1].get<double>();
    jt.offset = transform_from(jj.value("offset", json()));
    joints.push_back(jt);
  }
  std::vector<CollisionCapsule> caps;
  for (const json& c : j.value("capsules", json::array())) {
    const json& f = c.at("frames");
    caps.push_back({f.at(0).get<int>(), f.at(1).get<int>(), c.at("radius").get<double>()});
  }
  return SerialChain(j.value("name", std::string("chain")),
                     TaskSpace::from_name(j.at("space").get<std::string>()),
                     transform_from(j.value("base", json())), std::move(joints), std::move(caps));
}

}  // namespace

std::string chain_to_json(const SerialChain& chain) { return chain_json(chain).dump(2) + "\n"; }

std::string biped_to_json(const BipedModel& biped) {
  const json j = {{"type", "biped"},
                  {"left_leg", chain_json(biped.left_leg)},
                  {"right_leg", chain_json(biped.right_leg)},
                  {"foot", {{"heel", biped.heel}, {"toe", biped.toe}, {"radius", biped.foot_radius}}}};
  return j.dump(2) + "\n";
}

Robot robot_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    const std::string type = j.value("type", std::string("chain"));
    if (type == "chain") return chain_from(j);
    if (type == "biped") {
      BipedModel b;
      b.left_leg = chain_from(j.at("left_leg"));
      b.right_leg = chain_from(j.at("right_leg"));
      const json& foot = j.at("foot");
      b.heel = foot.at("heel").get<double>();
      b.toe = foot.at("toe").get<double>();
      b.foot_radius = foot.at("radius").get<double>();
      return b;
    }
    throw Error(ErrorCode::kSchema, "unknown robot type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("robot description: ") + e.what());
  }
}

std::string load_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

Robot load_robot(const std::string& path) { return robot_from_json(load_text(path)); }

SerialChain load_chain(const std::string& path) {
  Robot r = load_robot(path);
  if (auto* c = std::get_if<SerialChain>(&r)) return *c;
  throw Error(ErrorCode::kSchema, "'" + path + "' describes a biped, expected a single chain");
}

}  // namespace reachmap
