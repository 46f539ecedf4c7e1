#include "reachmap/sampling.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "reachmap/error.hpp"
#include "reachmap/rng.hpp"

namespace reachmap {

namespace {

constexpr int kMinAttemptsBeforeAbort = 1000;
constexpr double kMinAcceptance = 0.01;

void check_count(int count) {
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
}

void check_bounds(TaskSpace space, const Bounds& bounds) {
  if (static_cast<int>(bounds.size()) != space.pose_dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                space.name() + " sampling needs " + std::to_string(space.pose_dim()) + " bounds");
  }
  for (const auto& [lo, hi] : bounds) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
      throw Error(ErrorCode::kInvalidArgument, "sampling bounds must be finite with lo <= hi");
    }
  }
  if (space.kind() == SpaceKind::kSE3) {
    throw Error(ErrorCode::kUnsupportedSpace, "pose sampling in bounds is not defined for SE3");
  }
}

Pose draw_pose(TaskSpace space, const Bounds& bounds, Rng& rng) {
  Eigen::VectorXd c(space.pose_dim());
  for (int d = 0; d < space.pose_dim(); ++d) c[d] = rng.uniform(bounds[d].first, bounds[d].second);
  return Pose(space, c);
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& path, int line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw Error(ErrorCode::kSchema,
                path + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
  return v;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

int SampleSet::positives() const {
  return static_cast<int>((labels.array() > 0.0).count());
}

SampleSet SampleSet::subset(const std::vector<int>& rows) const {
  SampleSet out;
  out.space = space;
  out.meta = meta;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
    out.labels[static_cast<Eigen::Index>(i)] = labels[rows[i]];
  }
  return out;
}

SampleSet sample_fk(const SerialChain& chain, int count, std::uint64_t seed) {
  check_count(count);
  const TaskSpace space = chain.space();
  SampleSet out;
  out.space = space;
  out.meta = {chain.name(), "fk", seed, {}};
  out.inputs.resize(count, space.input_dim());
  out.labels = Eigen::VectorXd::Ones(count);

  const Eigen::VectorXd lo = chain.lower_limits();
  const Eigen::VectorXd hi = chain.upper_limits();
  Eigen::VectorXd q(chain.dof());
  int accepted = 0;
  std::uint64_t attempts = 0;
  while (accepted < count) {
    Rng rng = Rng::stream(seed, attempts++);
    for (int k = 0; k < chain.dof(); ++k) q[k] = rng.uniform(lo[k], hi[k]);
    if (!self_collision(chain, q)) out.inputs.row(accepted++) = encode(fk(chain, q));
    if (attempts >= static_cast<std::uint64_t>(kMinAttemptsBeforeAbort) &&
        static_cast<double>(accepted) < kMinAcceptance * static_cast<double>(attempts)) {
      throw Error(ErrorCode::kSamplingRejected,
                  "FK sampling of '" + chain.name() + "' kept " + std::to_string(accepted) +
                      " of " + std::to_string(attempts) +
                      " configurations; self-collision rejects more than 99%");
    }
  }
  return out;
}

Bounds default_ik_bounds(const SerialChain& chain) {
  const TaskSpace space = chain.space();
  const int dim = space.kind() == SpaceKind::kSE2 ? 2 : space.pose_dim();
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dim, INFINITY);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dim, -INFINITY);
  const auto include = [&](const Eigen::VectorXd& q) {
    const Eigen::VectorXd p = fk(chain, q).coords().head(dim);
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  // Random configurations plus every corner of the joint box.
  Rng rng(derive_seed(0x5EEDB0D5ULL, static_cast<std::uint64_t>(chain.dof())));
  const Eigen::VectorXd ql = chain.lower_limits(), qh = chain.upper_limits();
  Eigen::VectorXd q(chain.dof());
  for (int i = 0; i < 20000; ++i) {
    for (int k = 0; k < chain.dof(); ++k) q[k] = rng.uniform(ql[k], qh[k]);
    include(q);
  }
  for (int mask = 0; mask < (1 << chain.dof()); ++mask) {
    for (int k = 0; k < chain.dof(); ++k) q[k] = (mask >> k) & 1 ? qh[k] : ql[k];
    include(q);
  }
  Bounds b;
  for (int d = 0; d < dim; ++d) {
    const double c = 0.5 * (lo[d] + hi[d]);
    const double h = 0.5 * (hi[d] - lo[d]) * 1.1;
    b.emplace_back(c - h, c + h);
  }
  if (space.kind() == SpaceKind::kSE2) b.emplace_back(-std::numbers::pi, std::numbers::pi);
  return b;
}

SampleSet sample_labeled(TaskSpace space, const Bounds& bounds, int count, std::uint64_t seed,
                         const std::function<bool(const Pose&, std::uint64_t)>& label,
                         const std::string& method, const std::string& chain_name) {
  check_count(count);
  check_bounds(space, bounds);
  SampleSet out;
  out.space = space;
  out.meta = {chain_name, method, seed, bounds};
  out.inputs.resize(count, space.input_dim());
  out.labels.resize(count);
  for (int i = 0; i < count; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    const Pose p = draw_pose(space, bounds, rng);
    out.inputs.row(i) = encode(p);
    out.labels[i] = label(p, rng.next()) ? 1.0 : -1.0;
  }
  return out;
}

SampleSet sample_ik(const SerialChain& chain, const Bounds& bounds, int count, std::uint64_t seed,
                    const IkOptions& opts) {
  return sample_labeled(
      chain.space(), bounds, count, seed,
      [&](const Pose& p, std::uint64_t s) {
        IkOptions o = opts;
        o.rng_seed = s;
        return solve_ik(chain, p, o).has_value();
      },
      "ik", chain.name());
}

Bounds default_footstep_bounds() {
  return {{-0.6, 0.6}, {-0.1, 0.7}, {-std::numbers::pi, std::numbers::pi}};
}

SampleSet sample_footsteps(const BipedModel& biped, const Bounds& bounds, int count,
                           std::uint64_t seed, const IkOptions& opts) {
  return sample_labeled(
      TaskSpace(SpaceKind::kSE2), bounds, count, seed,
      [&](const Pose& p, std::uint64_t s) {
        IkOptions o = opts;
        o.rng_seed = s;
        return leg_pair_feasible(biped, Side::kLeft, p, o);
      },
      "footstep", "biped");
}

SampleSet oracle_grid_set(const SerialChain& chain, const Bounds& bounds, int per_axis,
                          int oracle_resolution) {
  if (chain.space().kind() != SpaceKind::kR2) {
    throw Error(ErrorCode::kUnsupportedSpace, "oracle grid test sets are defined for R2 chains");
  }
  check_bounds(chain.space(), bounds);
  if (per_axis < 2) throw Error(ErrorCode::kInvalidArgument, "grid needs >= 2 points per axis");
  const GridOracle oracle(chain, oracle_resolution);
  SampleSet out;
  out.space = chain.space();
  out.meta = {chain.name(), "grid", 0, bounds};
  out.inputs.resize(per_axis * per_axis, 2);
  out.labels.resize(per_axis * per_axis);
  int row = 0;
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      const double x = bounds[0].first + (bounds[0].second - bounds[0].first) * i / (per_axis - 1);
      const double y = bounds[1].first + (bounds[1].second - bounds[1].first) * j / (per_axis - 1);
      out.inputs.row(row) = Eigen::Vector2d(x, y);
      out.labels[row] = oracle.reachable(Eigen::Vector2d(x, y)) ? 1.0 : -1.0;
      ++row;
    }
  }
  return out;
}

std::pair<SampleSet, SampleSet> split(const SampleSet& data, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "split fraction must lie in (0, 1)");
  }
  std::vector<int> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (int i = data.size() - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  }
  const int head = static_cast<int>(std::lround(fraction * data.size()));
  std::vector<int> a(order.begin(), order.begin() + head), b(order.begin() + head, order.end());
  return {data.subset(a), data.subset(b)};
}

void write_samples_csv(const SampleSet& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << data.space.name() << ',' << data.meta.method << ',' << data.meta.seed << ','
      << data.size() << '\n';
  for (int i = 0; i < data.size(); ++i) {
    for (int d = 0; d < data.inputs.cols(); ++d) out << format_double(data.inputs(i, d)) << ',';
    out << (data.labels[i] > 0 ? "1" : "-1") << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

SampleSet read_samples_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kSchema, path + ": empty sample file");
  const std::vector<std::string> head = split_fields(line);
  if (head.size() != 4) {
    throw Error(ErrorCode::kSchema, path + ":1: expected 'space,method,seed,count'");
  }
  SampleSet out;
  try {
    out.space = TaskSpace::from_name(head[0]);
  } catch (const Error&) {
    throw Error(ErrorCode::kSchema, path + ":1: unknown task space '" + head[0] + "'");
  }
  out.meta.method = head[1];
  char* end = nullptr;
  out.meta.seed = std::strtoull(head[2].c_str(), &end, 10);
  const long count = std::strtol(head[3].c_str(), &end, 10);
  if (count < 0 || *end != '\0') throw Error(ErrorCode::kSchema, path + ":1: bad count");
  const int dim = out.space.input_dim();
  out.inputs.resize(count, dim);
  out.labels.resize(count);
  int row = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (static_cast<int>(f.size()) != dim + 1) {
      throw Error(ErrorCode::kSchema, path + ":" + std::to_string(lineno) + ": expected " +
                                          std::to_string(dim + 1) + " fields");
    }
    if (row >= count) throw Error(ErrorCode::kSchema, path + ": more rows than the header count");
    for (int d = 0; d < dim; ++d) out.inputs(row, d) = parse_double(f[d], path, lineno);
    const double y = parse_double(f[dim], path, lineno);
    if (y != 1.0 && y != -1.0) {
      throw Error(ErrorCode::kSchema, path + ":" + std::to_string(lineno) + ": label must be 1 or -1");
    }
    out.labels[row++] = y;
  }
  if (row != count) throw Error(ErrorCode::kSchema, path + ": fewer rows than the header count");
  return out;
}

}  // namespace reachmap
