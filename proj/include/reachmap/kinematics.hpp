#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "reachmap/geometry.hpp"

namespace reachmap {

// A revolute joint. The joint frame rotates about `axis` (expressed in the
// joint frame) and `offset` then carries it to the next joint frame.
struct Joint {
  Eigen::Vector3d axis = Eigen::Vector3d::UnitZ();
  double lower = 0.0;
  double upper = 0.0;
  Eigen::Isometry3d offset = Eigen::Isometry3d::Identity();
};

// Capsule spanning the origins of two chain frames. Frame k < dof is the
// frame of joint k, frame dof is the end effector.
struct CollisionCapsule {
  int frame_a = 0;
  int frame_b = 0;
  double radius = 0.0;
};

class SerialChain {
 public:
  SerialChain() = default;
  SerialChain(std::string name, TaskSpace space, Eigen::Isometry3d base, std::vector<Joint> joints,
              std::vector<CollisionCapsule> capsules = {});

  const std::string& name() const { return name_; }
  TaskSpace space() const { return space_; }
  const Eigen::Isometry3d& base() const { return base_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<CollisionCapsule>& capsules() const { return capsules_; }
  int dof() const { return static_cast<int>(joints_.size()); }

  Eigen::VectorXd lower_limits() const;
  Eigen::VectorXd upper_limits() const;
  bool within_limits(const Eigen::VectorXd& q, double slack = 0.0) const;
  Eigen::VectorXd clamp(Eigen::VectorXd q) const;

  // Upper bound on the distance from the first joint to the end effector.
  double reach() const;

  // World transforms of frames 0..dof (joint frames after the joint rotation
  // is applied, then the end effector).
  std::vector<Eigen::Isometry3d> frames(const Eigen::VectorXd& q) const;

 private:
  std::string name_;
  TaskSpace space_;
  Eigen::Isometry3d base_ = Eigen::Isometry3d::Identity();
  std::vector<Joint> joints_;
  std::vector<CollisionCapsule> capsules_;
};

// End-effector pose in the chain's task space. Joint limits are not checked.
Pose fk(const SerialChain& chain, const Eigen::VectorXd& q);

// Analytic Jacobian of fk, pose_dim x dof. SE2 rows are (x, y, yaw), SE3 rows
// are linear velocity followed by angular velocity in the world frame.
Eigen::MatrixXd fk_jacobian(const SerialChain& chain, const Eigen::VectorXd& q);

// Tangent-space error from `current` to `target` (angles wrapped).
Eigen::VectorXd pose_error(const Pose& target, const Pose& current);

struct IkOptions {
  double damping = 0.1;
  int max_iters = 200;
  double tol = 1e-4;
  int restarts = 10;
  std::uint64_t rng_seed = 0;
};

// Damped least squares with per-step clamping to the joint limits and random
// restarts. The damping term is scaled by the current error norm so the final
// iterations behave like Gauss-Newton. Returns a configuration with task error
// <= tol, within limits and free of self-collision, or nullopt.
std::optional<Eigen::VectorXd> solve_ik(const SerialChain& chain, const Pose& target,
                                        const IkOptions& opts);

// Closest distance between segments [p0, p1] and [q0, q1].
double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1);

bool capsules_intersect(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1, double ra,
                        const Eigen::Vector3d& b0, const Eigen::Vector3d& b1, double rb);

// True iff two declared capsules that do not share a frame intersect.
bool self_collision(const SerialChain& chain, const Eigen::VectorXd& q);

// Planar two-link arm with unit links and limits psi1 in [0, pi/2],
// psi2 in [0, pi]. Home pose (q = 0) is (2, 0).
SerialChain planar_arm_2dof(double l1 = 1.0, double l2 = 1.0);

// Brute-force reachability oracle: sweeps a uniform joint grid (endpoints
// included), and accepts a point lying within half a grid cell's local
// workspace displacement of some collision-free grid configuration.
// Restricted to position task spaces and chains with at most 3 joints.
class GridOracle {
 public:
  GridOracle(const SerialChain& chain, int resolution);

  bool reachable(const Eigen::VectorXd& point) const;
  int resolution() const { return resolution_; }
  std::size_t size() const { return radius_.size(); }

 private:
  long long cell_key(const Eigen::Vector3d& p) const;

  int resolution_;
  int dim_;
  double cell_;
  std::vector<float> points_;  // dim_ floats per grid configuration
  std::vector<float> radius_;
  std::vector<std::pair<long long, std::uint32_t>> index_;  // sorted (cell, point)
};

bool oracle_reachable(const SerialChain& chain, const Eigen::VectorXd& point, int grid_resolution);

// ---------------------------------------------------------------------------
// Simplified biped used for footstep reachability.

enum class Side { kLeft, kRight };

inline Side other(Side s) { return s == Side::kLeft ? Side::kRight : Side::kLeft; }

// Each leg runs from the waist frame to the sole and is evaluated in SE2
// (sole x, y, yaw). Feet are capsules along the sole's x axis.
struct BipedModel {
  SerialChain left_leg;
  SerialChain right_leg;
  double heel = -0.08;
  double toe = 0.12;
  double foot_radius = 0.045;

  const SerialChain& leg(Side s) const { return s == Side::kLeft ? left_leg : right_leg; }
};

// Legs with hip yaw, hip roll and hip pitch joints and a 0.6 m leg, hips 0.1 m
// either side of the waist.
BipedModel default_biped();

bool feet_collide(const BipedModel& biped, const Pose& left, const Pose& right);

enum class WaistAnchor { kStance, kSwing, kMidpoint };

// Leg-pair IK for one stance/swing relation. The stance foot sits at the
// origin; the waist is placed on the stance foot, the swing foot or their
// midpoint with yaw halfway between the feet, and the relation is feasible if
// any placement admits IK for both legs without the feet colliding.
bool leg_pair_feasible(const BipedModel& biped, Side swing, const Pose& swing_in_stance,
                       const IkOptions& opts);

// Same check for a single waist placement; exposed for tests.
bool leg_pair_feasible_at(const BipedModel& biped, Side swing, const Pose& swing_in_stance,
                          WaistAnchor anchor, const IkOptions& opts);

// Planar three-link right arm from the waist, task space SE2 (hand x, y, yaw).
SerialChain default_hand_arm();

}  // namespace reachmap
