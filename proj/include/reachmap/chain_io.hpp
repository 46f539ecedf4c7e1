#pragma once

#include <string>
#include <variant>

#include "reachmap/kinematics.hpp"

namespace reachmap {

// Chain description files are JSON:
//   {"type": "chain", "name": ..., "space": "R2",
//    "base": {"translation": [x, y, z], "rpy": [r, p, y]},
//    "joints": [{"axis": [0, 0, 1], "limits": [lo, hi],
//                "offset": {"translation": [...], "rpy": [...]}}, ...],
//    "capsules": [{"frames": [a, b], "radius": r}, ...]}
// A biped file has "type": "biped", "left_leg" and "right_leg" chain objects
// and "foot": {"heel": h, "toe": t, "radius": r}.
using Robot = std::variant<SerialChain, BipedModel>;

std::string chain_to_json(const SerialChain& chain);
std::string biped_to_json(const BipedModel& biped);
Robot robot_from_json(const std::string& text);

Robot load_robot(const std::string& path);
SerialChain load_chain(const std::string& path);
void save_text(const std::string& path, const std::string& text);
std::string load_text(const std::string& path);

}  // namespace reachmap
