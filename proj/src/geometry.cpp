#include "reachmap/geometry.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "reachmap/error.hpp"

namespace reachmap {

namespace {

constexpr double kQuatTol = 1e-9;

void require_same_space(const Pose& a, const Pose& b) {
  if (!(a.space() == b.space())) {
    throw Error(ErrorCode::kSpaceMismatch,
                "poses live in different task spaces: " + a.space().name() + " vs " +
                    b.space().name());
  }
}

Eigen::Quaterniond quat_of(const Eigen::VectorXd& c) {
  return Eigen::Quaterniond(c[3], c[4], c[5], c[6]);
}

}  // namespace

TaskSpace TaskSpace::from_name(std::string_view name) {
  if (name == "R2") return TaskSpace(SpaceKind::kR2);
  if (name == "SE2") return TaskSpace(SpaceKind::kSE2);
  if (name == "R3") return TaskSpace(SpaceKind::kR3);
  if (name == "SE3") return TaskSpace(SpaceKind::kSE3);
  throw Error(ErrorCode::kInvalidArgument, "unknown task space '" + std::string(name) + "'");
}

std::string TaskSpace::name() const {
  switch (kind_) {
    case SpaceKind::kR2: return "R2";
    case SpaceKind::kSE2: return "SE2";
    case SpaceKind::kR3: return "R3";
    case SpaceKind::kSE3: return "SE3";
  }
  return "?";
}

double normalize_angle(double angle) {
  double a = std::remainder(angle, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

Pose::Pose(TaskSpace space, Eigen::VectorXd coords) : space_(space), coords_(std::move(coords)) {
  if (coords_.size() != space_.coord_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                space_.name() + " pose needs " + std::to_string(space_.coord_dim()) +
                    " coordinates, got " + std::to_string(coords_.size()));
  }
  if (!coords_.allFinite()) throw Error(ErrorCode::kInvalidPose, "pose has non-finite coordinates");
  if (space_.kind() == SpaceKind::kSE2) coords_[2] = normalize_angle(coords_[2]);
  if (space_.kind() == SpaceKind::kSE3) {
    const double norm = coords_.tail<4>().norm();
    if (std::abs(norm - 1.0) > kQuatTol) {
      throw Error(ErrorCode::kInvalidPose, "SE3 quaternion is not unit length (norm " +
                                               std::to_string(norm) + ")");
    }
  }
}

Pose Pose::raw(TaskSpace space, Eigen::VectorXd coords) {
  if (coords.size() != space.coord_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "raw pose has wrong coordinate count");
  }
  Pose p;
  p.space_ = space;
  p.coords_ = std::move(coords);
  return p;
}

Pose Pose::identity(TaskSpace space) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(space.coord_dim());
  if (space.kind() == SpaceKind::kSE3) c[3] = 1.0;
  return Pose(space, c);
}

Pose Pose::r2(double x, double y) { return Pose(TaskSpace(SpaceKind::kR2), Eigen::Vector2d(x, y)); }

Pose Pose::se2(double x, double y, double theta) {
  return Pose(TaskSpace(SpaceKind::kSE2), Eigen::Vector3d(x, y, theta));
}

Pose Pose::r3(double x, double y, double z) {
  return Pose(TaskSpace(SpaceKind::kR3), Eigen::Vector3d(x, y, z));
}

Pose Pose::se3(const Eigen::Vector3d& position, const Eigen::Quaterniond& rotation) {
  Eigen::VectorXd c(7);
  c << position, rotation.w(), rotation.x(), rotation.y(), rotation.z();
  return Pose(TaskSpace(SpaceKind::kSE3), c);
}

Eigen::Vector3d Pose::position() const {
  switch (space_.kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kSE2: return {coords_[0], coords_[1], 0.0};
    case SpaceKind::kR3:
    case SpaceKind::kSE3: return coords_.head<3>();
  }
  return Eigen::Vector3d::Zero();
}

Eigen::Matrix3d Pose::rotation() const {
  switch (space_.kind()) {
    case SpaceKind::kSE2: return Eigen::AngleAxisd(coords_[2], Eigen::Vector3d::UnitZ()).toRotationMatrix();
    case SpaceKind::kSE3: return quat_of(coords_).normalized().toRotationMatrix();
    default: return Eigen::Matrix3d::Identity();
  }
}

Pose compose(const Pose& a, const Pose& b) {
  require_same_space(a, b);
  const Eigen::VectorXd& x = a.coords();
  const Eigen::VectorXd& y = b.coords();
  switch (a.space().kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kR3: return Pose(a.space(), x + y);
    case SpaceKind::kSE2: {
      const double c = std::cos(x[2]), s = std::sin(x[2]);
      return Pose::se2(x[0] + c * y[0] - s * y[1], x[1] + s * y[0] + c * y[1], x[2] + y[2]);
    }
    case SpaceKind::kSE3: {
      const Eigen::Quaterniond qa = quat_of(x), qb = quat_of(y);
      const Eigen::Vector3d p = x.head<3>() + qa * y.head<3>();
      return Pose::se3(p, (qa * qb).normalized());
    }
  }
  return a;
}

Pose inverse(const Pose& p) {
  const Eigen::VectorXd& x = p.coords();
  switch (p.space().kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kR3: return Pose(p.space(), -x);
    case SpaceKind::kSE2: {
      const double c = std::cos(x[2]), s = std::sin(x[2]);
      return Pose::se2(-c * x[0] - s * x[1], s * x[0] - c * x[1], -x[2]);
    }
    case SpaceKind::kSE3: {
      const Eigen::Quaterniond qi = quat_of(x).conjugate();
      return Pose::se3(-(qi * Eigen::Vector3d(x.head<3>())), qi);
    }
  }
  return p;
}

Eigen::VectorXd encode(const Pose& p) {
  const Eigen::VectorXd& x = p.coords();
  switch (p.space().kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kR3: return x;
    case SpaceKind::kSE2: return Eigen::Vector4d(x[0], x[1], std::cos(x[2]), std::sin(x[2]));
    case SpaceKind::kSE3: {
      const double norm = x.tail<4>().norm();
      if (std::abs(norm - 1.0) > kQuatTol) {
        throw Error(ErrorCode::kInvalidPose, "SE3 quaternion is not unit length");
      }
      const Eigen::Matrix3d r = quat_of(x).toRotationMatrix();
      Eigen::VectorXd out(12);
      out.head<3>() = x.head<3>();
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) out[3 + 3 * i + j] = r(i, j);
      return out;
    }
  }
  return x;
}

Eigen::VectorXd encode_rel(const Pose& r0, const Pose& r1) {
  require_same_space(r0, r1);
  switch (r0.space().kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kR3: return r1.coords() - r0.coords();
    case SpaceKind::kSE2: {
      // Written out so that raw (unnormalized) angles behave identically.
      const Eigen::VectorXd& a = r0.coords();
      const Eigen::VectorXd& b = r1.coords();
      const double c = std::cos(a[2]), s = std::sin(a[2]);
      const double dx = b[0] - a[0], dy = b[1] - a[1], dt = b[2] - a[2];
      return Eigen::Vector4d(c * dx + s * dy, -s * dx + c * dy, std::cos(dt), std::sin(dt));
    }
    case SpaceKind::kSE3: return encode(compose(inverse(r0), r1));
  }
  return {};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> jac_rel(const Pose& r0, const Pose& r1) {
  require_same_space(r0, r1);
  const TaskSpace space = r0.space();
  const int n = space.pose_dim();
  switch (space.kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kR3:
      return {-Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Identity(n, n)};
    case SpaceKind::kSE2: {
      const Eigen::VectorXd& a = r0.coords();
      const Eigen::VectorXd& b = r1.coords();
      const double c = std::cos(a[2]), s = std::sin(a[2]);
      const double dx = b[0] - a[0], dy = b[1] - a[1], dt = b[2] - a[2];
      const double cd = std::cos(dt), sd = std::sin(dt);
      Eigen::MatrixXd j0 = Eigen::MatrixXd::Zero(4, 3);
      Eigen::MatrixXd j1 = Eigen::MatrixXd::Zero(4, 3);
      // rows: u = c dx + s dy, v = -s dx + c dy, cos(dt), sin(dt)
      j0(0, 0) = -c;
      j0(0, 1) = -s;
      j0(0, 2) = -s * dx + c * dy;
      j0(1, 0) = s;
      j0(1, 1) = -c;
      j0(1, 2) = -c * dx - s * dy;
      j0(2, 2) = sd;
      j0(3, 2) = -cd;
      j1(0, 0) = c;
      j1(0, 1) = s;
      j1(1, 0) = -s;
      j1(1, 1) = c;
      j1(2, 2) = -sd;
      j1(3, 2) = cd;
      return {j0, j1};
    }
    case SpaceKind::kSE3: break;
  }
  throw Error(ErrorCode::kUnsupportedSpace, "relative-pose Jacobians are not available for SE3");
}

}  // namespace reachmap
