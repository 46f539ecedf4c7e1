#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reachmap/geometry.hpp"
#include "reachmap/kinematics.hpp"

namespace reachmap {

// Closed interval per pose coordinate (pose_dim entries; SE2 is x, y, theta).
using Bounds = std::vector<std::pair<double, double>>;

struct SampleMeta {
  std::string chain;
  std::string method;  // "fk", "ik", "footstep", "grid", ...
  std::uint64_t seed = 0;
  Bounds bounds;
};

struct SampleSet {
  TaskSpace space;
  Eigen::MatrixXd inputs;  // L x input_dim, encoded poses
  Eigen::VectorXd labels;  // +1 / -1
  SampleMeta meta;

  int size() const { return static_cast<int>(labels.size()); }
  int positives() const;
  int negatives() const { return size() - positives(); }
  SampleSet subset(const std::vector<int>& rows) const;
};

// Uniform joint samples within limits; self-colliding draws are replaced.
// Throws kSamplingRejected if fewer than 1% of at least 1000 draws survive.
SampleSet sample_fk(const SerialChain& chain, int count, std::uint64_t seed);

// Axis-aligned box around the FK workspace, each side inflated by 10% about its
// centre. Angle coordinates get (-pi, pi].
Bounds default_ik_bounds(const SerialChain& chain);

// Uniform poses in `bounds`, labeled +1 iff `label(pose, sample_seed)`.
SampleSet sample_labeled(TaskSpace space, const Bounds& bounds, int count, std::uint64_t seed,
                         const std::function<bool(const Pose&, std::uint64_t)>& label,
                         const std::string& method, const std::string& chain_name);

// Uniform poses in bounds labeled by solve_ik. opts.rng_seed is replaced by a
// per-sample seed derived from `seed`.
SampleSet sample_ik(const SerialChain& chain, const Bounds& bounds, int count, std::uint64_t seed,
                    const IkOptions& opts);

// Bounds for left-swing footstep samples relative to the right (stance) foot.
Bounds default_footstep_bounds();

// Left-from-right footstep dataset labeled by leg_pair_feasible.
SampleSet sample_footsteps(const BipedModel& biped, const Bounds& bounds, int count,
                           std::uint64_t seed, const IkOptions& opts);

// n x n grid over the first two bounds of an R2 space labeled by the oracle.
SampleSet oracle_grid_set(const SerialChain& chain, const Bounds& bounds, int per_axis,
                          int oracle_resolution);

// Deterministic shuffled split; the first part holds round(fraction * L) rows.
std::pair<SampleSet, SampleSet> split(const SampleSet& data, double fraction, std::uint64_t seed);

// CSV layout: a first line "space,method,seed,count" with those four values,
// then one row per sample: x_1..x_Mx,label. Numbers use 17 significant digits.
void write_samples_csv(const SampleSet& data, const std::string& path);
SampleSet read_samples_csv(const std::string& path);

}  // namespace reachmap
