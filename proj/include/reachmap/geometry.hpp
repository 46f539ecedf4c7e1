#pragma once

#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace reachmap {

// Kinds of end-effector task space. SE3 poses are stored as position plus a
// unit quaternion (w, x, y, z).
enum class SpaceKind { kR2, kSE2, kR3, kSE3 };

class TaskSpace {
 public:
  constexpr TaskSpace() = default;
  constexpr explicit TaskSpace(SpaceKind kind) : kind_(kind) {}

  static TaskSpace from_name(std::string_view name);

  constexpr SpaceKind kind() const { return kind_; }

  // Tangent dimension of a pose (the size of a planner update step).
  constexpr int pose_dim() const {
    switch (kind_) {
      case SpaceKind::kR2: return 2;
      case SpaceKind::kSE2: return 3;
      case SpaceKind::kR3: return 3;
      case SpaceKind::kSE3: return 6;
    }
    return 0;
  }

  // Number of stored coordinates; differs from pose_dim only for SE3.
  constexpr int coord_dim() const { return kind_ == SpaceKind::kSE3 ? 7 : pose_dim(); }

  // Length of the model input vector produced by encode().
  constexpr int input_dim() const {
    switch (kind_) {
      case SpaceKind::kR2: return 2;
      case SpaceKind::kSE2: return 4;
      case SpaceKind::kR3: return 3;
      case SpaceKind::kSE3: return 12;
    }
    return 0;
  }

  constexpr bool has_orientation() const {
    return kind_ == SpaceKind::kSE2 || kind_ == SpaceKind::kSE3;
  }

  // Index of the angle coordinate for SE2, -1 otherwise.
  constexpr int angle_index() const { return kind_ == SpaceKind::kSE2 ? 2 : -1; }

  std::string name() const;

  friend constexpr bool operator==(TaskSpace a, TaskSpace b) { return a.kind_ == b.kind_; }

 private:
  SpaceKind kind_ = SpaceKind::kR2;
};

// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

class Pose {
 public:
  Pose() = default;
  // Validates the coordinate count; SE2 angles are normalized and SE3
  // quaternions must already be unit length within 1e-9.
  Pose(TaskSpace space, Eigen::VectorXd coords);

  // Skips angle normalization. The planner iterates on raw coordinates;
  // everything else should use the checked constructor.
  static Pose raw(TaskSpace space, Eigen::VectorXd coords);

  static Pose identity(TaskSpace space);
  static Pose r2(double x, double y);
  static Pose se2(double x, double y, double theta);
  static Pose r3(double x, double y, double z);
  static Pose se3(const Eigen::Vector3d& position, const Eigen::Quaterniond& rotation);

  TaskSpace space() const { return space_; }
  const Eigen::VectorXd& coords() const { return coords_; }
  double operator[](int i) const { return coords_[i]; }

  Eigen::Vector3d position() const;
  // Rotation as a 3x3 matrix (planar rotations embed about z).
  Eigen::Matrix3d rotation() const;

 private:
  TaskSpace space_;
  Eigen::VectorXd coords_ = Eigen::VectorXd::Zero(2);
};

Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);

// Model input for an absolute pose: positions pass through, SE2 becomes
// (x, y, cos t, sin t) and SE3 becomes (x, y, z, R00, R01, ..., R22).
Eigen::VectorXd encode(const Pose& p);

// Model input for the pose of r1 expressed relative to r0.
Eigen::VectorXd encode_rel(const Pose& r0, const Pose& r1);

// Analytic derivatives of encode_rel with respect to the coordinates of r0
// and r1 (each input_dim x pose_dim). Defined for R2, R3 and SE2 only.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> jac_rel(const Pose& r0, const Pose& r1);

}  // namespace reachmap
