#include "reachmap/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "reachmap/error.hpp"
#include "reachmap/rng.hpp"

namespace reachmap {

namespace {

Eigen::Isometry3d joint_rotation(const Joint& j, double q) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = Eigen::AngleAxisd(q, j.axis).toRotationMatrix();
  return t;
}

Eigen::Isometry3d translation(double x, double y, double z) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translation() = Eigen::Vector3d(x, y, z);
  return t;
}

Joint make_joint(const Eigen::Vector3d& axis, double lo, double hi,
                 const Eigen::Isometry3d& offset = Eigen::Isometry3d::Identity()) {
  Joint j;
  j.axis = axis;
  j.lower = lo;
  j.upper = hi;
  j.offset = offset;
  return j;
}

void check_q(const SerialChain& chain, const Eigen::VectorXd& q) {
  if (q.size() != chain.dof()) {
    throw Error(ErrorCode::kDimensionMismatch, "chain '" + chain.name() + "' has " +
                                                   std::to_string(chain.dof()) + " joints, got " +
                                                   std::to_string(q.size()) + " values");
  }
}

// Joint frames before rotation (origins and world axes) plus the end effector.
struct ChainState {
  std::vector<Eigen::Vector3d> origin;
  std::vector<Eigen::Vector3d> axis;
  Eigen::Isometry3d ee;
};

ChainState chain_state(const SerialChain& chain, const Eigen::VectorXd& q) {
  check_q(chain, q);
  ChainState st;
  Eigen::Isometry3d t = chain.base();
  for (int k = 0; k < chain.dof(); ++k) {
    const Joint& j = chain.joints()[k];
    st.origin.push_back(t.translation());
    st.axis.push_back(t.linear() * j.axis.normalized());
    t = t * joint_rotation(j, q[k]) * j.offset;
  }
  st.ee = t;
  return st;
}

Pose project(TaskSpace space, const Eigen::Isometry3d& t) {
  const Eigen::Vector3d p = t.translation();
  const Eigen::Matrix3d r = t.linear();
  switch (space.kind()) {
    case SpaceKind::kR2: return Pose::r2(p.x(), p.y());
    case SpaceKind::kSE2: return Pose::se2(p.x(), p.y(), std::atan2(r(1, 0), r(0, 0)));
    case SpaceKind::kR3: return Pose::r3(p.x(), p.y(), p.z());
    case SpaceKind::kSE3: {
      Eigen::Quaterniond quat(r);
      quat.normalize();
      if (quat.w() < 0.0) quat.coeffs() *= -1.0;
      return Pose::se3(p, quat);
    }
  }
  return Pose::identity(space);
}

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

}  // namespace

SerialChain::SerialChain(std::string name, TaskSpace space, Eigen::Isometry3d base,
                         std::vector<Joint> joints, std::vector<CollisionCapsule> capsules)
    : name_(std::move(name)),
      space_(space),
      base_(base),
      joints_(std::move(joints)),
      capsules_(std::move(capsules)) {
  if (joints_.empty()) throw Error(ErrorCode::kInvalidArgument, "chain needs at least one joint");
  for (const Joint& j : joints_) {
    if (!(j.lower < j.upper)) {
      throw Error(ErrorCode::kInvalidArgument, "joint limits must satisfy lower < upper");
    }
    if (j.axis.norm() < 1e-12) throw Error(ErrorCode::kInvalidArgument, "joint axis is zero");
  }
  for (const CollisionCapsule& c : capsules_) {
    if (c.frame_a < 0 || c.frame_b < 0 || c.frame_a > dof() || c.frame_b > dof() ||
        c.radius < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, "capsule refers to a missing frame");
    }
  }
}

Eigen::VectorXd SerialChain::lower_limits() const {
  Eigen::VectorXd v(dof());
  for (int k = 0; k < dof(); ++k) v[k] = joints_[k].lower;
  return v;
}

Eigen::VectorXd SerialChain::upper_limits() const {
  Eigen::VectorXd v(dof());
  for (int k = 0; k < dof(); ++k) v[k] = joints_[k].upper;
  return v;
}

bool SerialChain::within_limits(const Eigen::VectorXd& q, double slack) const {
  check_q(*this, q);
  for (int k = 0; k < dof(); ++k) {
    if (q[k] < joints_[k].lower - slack || q[k] > joints_[k].upper + slack) return false;
  }
  return true;
}

Eigen::VectorXd SerialChain::clamp(Eigen::VectorXd q) const {
  check_q(*this, q);
  for (int k = 0; k < dof(); ++k) q[k] = std::clamp(q[k], joints_[k].lower, joints_[k].upper);
  return q;
}

double SerialChain::reach() const {
  double r = 0.0;
  for (const Joint& j : joints_) r += j.offset.translation().norm();
  return r;
}

std::vector<Eigen::Isometry3d> SerialChain::frames(const Eigen::VectorXd& q) const {
  check_q(*this, q);
  std::vector<Eigen::Isometry3d> out;
  Eigen::Isometry3d t = base_;
  for (int k = 0; k < dof(); ++k) {
    t = t * joint_rotation(joints_[k], q[k]);
    out.push_back(t);
    t = t * joints_[k].offset;
  }
  out.push_back(t);
  return out;
}

Pose fk(const SerialChain& chain, const Eigen::VectorXd& q) {
  return project(chain.space(), chain_state(chain, q).ee);
}

Eigen::MatrixXd fk_jacobian(const SerialChain& chain, const Eigen::VectorXd& q) {
  const ChainState st = chain_state(chain, q);
  const TaskSpace space = chain.space();
  const int n = chain.dof();
  const Eigen::Vector3d pe = st.ee.translation();
  const Eigen::Matrix3d re = st.ee.linear();
  Eigen::MatrixXd jac(space.pose_dim(), n);
  for (int k = 0; k < n; ++k) {
    const Eigen::Vector3d lin = st.axis[k].cross(pe - st.origin[k]);
    switch (space.kind()) {
      case SpaceKind::kR2: jac.col(k) = lin.head<2>(); break;
      case SpaceKind::kR3: jac.col(k) = lin; break;
      case SpaceKind::kSE2: {
        const Eigen::Matrix3d dr = skew(st.axis[k]) * re;
        const double den = re(0, 0) * re(0, 0) + re(1, 0) * re(1, 0);
        jac(0, k) = lin.x();
        jac(1, k) = lin.y();
        jac(2, k) = (re(0, 0) * dr(1, 0) - re(1, 0) * dr(0, 0)) / den;
        break;
      }
      case SpaceKind::kSE3:
        jac.col(k).head<3>() = lin;
        jac.col(k).tail<3>() = st.axis[k];
        break;
    }
  }
  return jac;
}

Eigen::VectorXd pose_error(const Pose& target, const Pose& current) {
  if (!(target.space() == current.space())) {
    throw Error(ErrorCode::kSpaceMismatch, "IK target and chain live in different task spaces");
  }
  switch (target.space().kind()) {
    case SpaceKind::kR2:
    case SpaceKind::kR3: return target.coords() - current.coords();
    case SpaceKind::kSE2: {
      Eigen::VectorXd e = target.coords() - current.coords();
      e[2] = normalize_angle(e[2]);
      return e;
    }
    case SpaceKind::kSE3: {
      Eigen::VectorXd e(6);
      e.head<3>() = target.position() - current.position();
      const Eigen::AngleAxisd aa(target.rotation() * current.rotation().transpose());
      e.tail<3>() = aa.angle() * aa.axis();
      return e;
    }
  }
  return {};
}

std::optional<Eigen::VectorXd> solve_ik(const SerialChain& chain, const Pose& target,
                                        const IkOptions& opts) {
  if (!(target.space() == chain.space())) {
    throw Error(ErrorCode::kSpaceMismatch, "IK target is " + target.space().name() +
                                               " but chain '" + chain.name() + "' is " +
                                               chain.space().name());
  }
  if (!(opts.tol > 0.0) || opts.restarts < 1 || opts.max_iters < 1 || opts.damping < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "invalid IK options");
  }

  // Cheap rejection of targets beyond the summed link lengths.
  Eigen::Vector3d d = target.position() - chain.base().translation();
  const bool planar = target.space().kind() == SpaceKind::kR2 ||
                      target.space().kind() == SpaceKind::kSE2;
  if (planar) d.z() = 0.0;
  if (d.norm() > chain.reach() + opts.tol) return std::nullopt;

  const int n = chain.dof();
  const int m = chain.space().pose_dim();
  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd hi = chain.upper_limits();
  const double lambda2 = opts.damping * opts.damping;
  constexpr int kStallWindow = 25;
  constexpr double kMaxStep = 0.5;

  Rng rng(opts.rng_seed);
  for (int restart = 0; restart < opts.restarts; ++restart) {
    Eigen::VectorXd q(n);
    for (int k = 0; k < n; ++k) q[k] = rng.uniform(lo[k], hi[k]);

    double best = std::numeric_limits<double>::infinity();
    int best_iter = 0;
    for (int it = 0; it < opts.max_iters; ++it) {
      const Eigen::VectorXd e = pose_error(target, fk(chain, q));
      const double en = e.norm();
      if (en <= opts.tol) {
        if (!self_collision(chain, q)) return q;
        break;
      }
      if (en < best * (1.0 - 1e-3)) {
        best = en;
        best_iter = it;
      } else if (it - best_iter > kStallWindow) {
        break;
      }
      const Eigen::MatrixXd jac = fk_jacobian(chain, q);
      const Eigen::MatrixXd jjt =
          jac * jac.transpose() + (lambda2 * en + 1e-12) * Eigen::MatrixXd::Identity(m, m);
      Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(e);
      const double big = dq.cwiseAbs().maxCoeff();
      if (big > kMaxStep) dq *= kMaxStep / big;
      q = (q + dq).cwiseMax(lo).cwiseMin(hi);
    }
  }
  return std::nullopt;
}

double segment_distance(const Eigen::Vector3d& p0, const Eigen::Vector3d& p1,
                        const Eigen::Vector3d& q0, const Eigen::Vector3d& q1) {
  // Closest points of two segments (Ericson, Real-Time Collision Detection 5.1.9).
  const Eigen::Vector3d d1 = p1 - p0, d2 = q1 - q0, r = p0 - q0;
  const double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  constexpr double kEps = 1e-14;
  double s = 0.0, t = 0.0;
  if (a <= kEps && e <= kEps) return r.norm();
  if (a <= kEps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    const double c = d1.dot(r);
    if (e <= kEps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      const double b = d1.dot(d2);
      const double denom = a * e - b * b;
      s = denom > kEps ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p0 + s * d1) - (q0 + t * d2)).norm();
}

bool capsules_intersect(const Eigen::Vector3d& a0, const Eigen::Vector3d& a1, double ra,
                        const Eigen::Vector3d& b0, const Eigen::Vector3d& b1, double rb) {
  return segment_distance(a0, a1, b0, b1) < ra + rb;
}

bool self_collision(const SerialChain& chain, const Eigen::VectorXd& q) {
  const auto& caps = chain.capsules();
  if (caps.size() < 2) return false;
  const std::vector<Eigen::Isometry3d> fr = chain.frames(q);
  for (std::size_t i = 0; i < caps.size(); ++i) {
    for (std::size_t j = i + 1; j < caps.size(); ++j) {
      const CollisionCapsule& a = caps[i];
      const CollisionCapsule& b = caps[j];
      if (a.frame_a == b.frame_a || a.frame_a == b.frame_b || a.frame_b == b.frame_a ||
          a.frame_b == b.frame_b) {
        continue;
      }
      if (capsules_intersect(fr[a.frame_a].translation(), fr[a.frame_b].translation(), a.radius,
                             fr[b.frame_a].translation(), fr[b.frame_b].translation(),
                             b.radius)) {
        return true;
      }
    }
  }
  return false;
}

SerialChain planar_arm_2dof(double l1, double l2) {
  std::vector<Joint> joints = {
      make_joint(Eigen::Vector3d::UnitZ(), 0.0, std::numbers::pi / 2, translation(l1, 0, 0)),
      make_joint(Eigen::Vector3d::UnitZ(), 0.0, std::numbers::pi, translation(l2, 0, 0)),
  };
  return SerialChain("arm2", TaskSpace(SpaceKind::kR2), Eigen::Isometry3d::Identity(),
                     std::move(joints));
}

GridOracle::GridOracle(const SerialChain& chain, int resolution) : resolution_(resolution) {
  const SpaceKind kind = chain.space().kind();
  if (kind != SpaceKind::kR2 && kind != SpaceKind::kR3) {
    throw Error(ErrorCode::kUnsupportedSpace, "grid oracle needs a position task space");
  }
  if (chain.dof() > 3) {
    throw Error(ErrorCode::kInvalidArgument, "grid oracle supports at most 3 joints");
  }
  if (resolution < 2) throw Error(ErrorCode::kInvalidArgument, "grid resolution must be >= 2");
  dim_ = chain.space().pose_dim();
  const int n = chain.dof();
  std::size_t total = 1;
  for (int k = 0; k < n; ++k) total *= static_cast<std::size_t>(resolution);

  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd step = (chain.upper_limits() - lo) / (resolution - 1);
  points_.reserve(total * dim_);
  radius_.reserve(total);
  Eigen::VectorXd q(n);
  std::vector<int> idx(n, 0);
  double max_radius = 0.0;
  for (std::size_t c = 0; c < total; ++c) {
    for (int k = 0; k < n; ++k) q[k] = lo[k] + step[k] * idx[k];
    if (!self_collision(chain, q)) {
      const Eigen::VectorXd p = fk(chain, q).coords();
      const Eigen::MatrixXd jac = fk_jacobian(chain, q);
      double r = 0.0;
      for (int k = 0; k < n; ++k) r += 0.5 * jac.col(k).norm() * step[k];
      for (int i = 0; i < dim_; ++i) points_.push_back(static_cast<float>(p[i]));
      radius_.push_back(static_cast<float>(r));
      max_radius = std::max(max_radius, r);
    }
    for (int k = n - 1; k >= 0; --k) {
      if (++idx[k] < resolution) break;
      idx[k] = 0;
    }
  }
  cell_ = std::max(max_radius, 1e-9);
  index_.reserve(radius_.size());
  for (std::size_t i = 0; i < radius_.size(); ++i) {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    for (int d = 0; d < dim_; ++d) p[d] = points_[i * dim_ + d];
    index_.emplace_back(cell_key(p), static_cast<std::uint32_t>(i));
  }
  std::sort(index_.begin(), index_.end());
}

long long GridOracle::cell_key(const Eigen::Vector3d& p) const {
  constexpr long long kBias = 1 << 20;
  const auto c = [&](double v) {
    return static_cast<long long>(std::floor(v / cell_)) + kBias;
  };
  return (c(p.x()) << 42) | (c(p.y()) << 21) | c(p.z());
}

bool GridOracle::reachable(const Eigen::VectorXd& point) const {
  if (point.size() != dim_) {
    throw Error(ErrorCode::kDimensionMismatch, "oracle point has the wrong dimension");
  }
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  p.head(dim_) = point;
  const int zr = dim_ == 3 ? 1 : 0;
  for (int dx = -1; dx <= 1; ++dx) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dz = -zr; dz <= zr; ++dz) {
        const long long key = cell_key(p + cell_ * Eigen::Vector3d(dx, dy, dz));
        auto it = std::lower_bound(index_.begin(), index_.end(),
                                   std::make_pair(key, std::uint32_t{0}));
        for (; it != index_.end() && it->first == key; ++it) {
          const std::size_t i = it->second;
          double d2 = 0.0;
          for (int d = 0; d < dim_; ++d) {
            const double diff = p[d] - points_[i * dim_ + d];
            d2 += diff * diff;
          }
          const double r = radius_[i];
          if (d2 <= r * r) return true;
        }
      }
    }
  }
  return false;
}

bool oracle_reachable(const SerialChain& chain, const Eigen::VectorXd& point, int grid_resolution) {
  return GridOracle(chain, grid_resolution).reachable(point);
}

BipedModel default_biped() {
  const Eigen::Isometry3d shank = translation(0, 0, -0.6);
  BipedModel b;
  b.left_leg = SerialChain("left_leg", TaskSpace(SpaceKind::kSE2), translation(0, 0.1, 0),
                           {make_joint(Eigen::Vector3d::UnitZ(), -0.35, 0.7),
                            make_joint(Eigen::Vector3d::UnitX(), -0.3, 0.45),
                            make_joint(Eigen::Vector3d::UnitY(), -0.45, 0.45, shank)});
  // Mirror image: yaw and roll limits swap sign.
  b.right_leg = SerialChain("right_leg", TaskSpace(SpaceKind::kSE2), translation(0, -0.1, 0),
                            {make_joint(Eigen::Vector3d::UnitZ(), -0.7, 0.35),
                             make_joint(Eigen::Vector3d::UnitX(), -0.45, 0.3),
                             make_joint(Eigen::Vector3d::UnitY(), -0.45, 0.45, shank)});
  return b;
}

bool feet_collide(const BipedModel& biped, const Pose& left, const Pose& right) {
  const auto segment = [&](const Pose& foot, double along) {
    const double c = std::cos(foot[2]), s = std::sin(foot[2]);
    return Eigen::Vector3d(foot[0] + c * along, foot[1] + s * along, 0.0);
  };
  return capsules_intersect(segment(left, biped.heel), segment(left, biped.toe), biped.foot_radius,
                            segment(right, biped.heel), segment(right, biped.toe),
                            biped.foot_radius);
}

bool leg_pair_feasible_at(const BipedModel& biped, Side swing, const Pose& swing_in_stance,
                          WaistAnchor anchor, const IkOptions& opts) {
  if (swing_in_stance.space().kind() != SpaceKind::kSE2) {
    throw Error(ErrorCode::kSpaceMismatch, "footstep poses are SE2");
  }
  const Pose stance = Pose::identity(TaskSpace(SpaceKind::kSE2));
  const Pose& sw = swing_in_stance;
  const Pose& left = swing == Side::kLeft ? sw : stance;
  const Pose& right = swing == Side::kLeft ? stance : sw;
  if (feet_collide(biped, left, right)) return false;

  Eigen::Vector2d pos = Eigen::Vector2d::Zero();
  switch (anchor) {
    case WaistAnchor::kStance: pos = Eigen::Vector2d::Zero(); break;
    case WaistAnchor::kSwing: pos = Eigen::Vector2d(sw[0], sw[1]); break;
    case WaistAnchor::kMidpoint: pos = 0.5 * Eigen::Vector2d(sw[0], sw[1]); break;
  }
  const Pose waist = Pose::se2(pos.x(), pos.y(), 0.5 * sw[2]);
  const Pose waist_inv = inverse(waist);
  return solve_ik(biped.left_leg, compose(waist_inv, left), opts).has_value() &&
         solve_ik(biped.right_leg, compose(waist_inv, right), opts).has_value();
}

bool leg_pair_feasible(const BipedModel& biped, Side swing, const Pose& swing_in_stance,
                       const IkOptions& opts) {
  for (WaistAnchor a : {WaistAnchor::kMidpoint, WaistAnchor::kStance, WaistAnchor::kSwing}) {
    if (leg_pair_feasible_at(biped, swing, swing_in_stance, a, opts)) return true;
  }
  return false;
}

SerialChain default_hand_arm() {
  std::vector<Joint> joints = {
      make_joint(Eigen::Vector3d::UnitZ(), -1.6, 1.6, translation(0.35, 0, 0)),
      make_joint(Eigen::Vector3d::UnitZ(), 0.0, 2.4, translation(0.3, 0, 0)),
      make_joint(Eigen::Vector3d::UnitZ(), -1.5, 1.5, translation(0.1, 0, 0)),
  };
  return SerialChain("hand_arm", TaskSpace(SpaceKind::kSE2), translation(0, -0.2, 0),
                     std::move(joints));
}

}  // namespace reachmap
