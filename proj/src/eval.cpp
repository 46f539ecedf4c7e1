#include "reachmap/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "reachmap/error.hpp"

namespace reachmap {
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_test_set(TaskSpace space, const SampleSet& test) {
  if (test.size() == 0) throw Error(ErrorCode::kEmptyInput, "empty test set");
  if (test.space != space) {
    throw Error(ErrorCode::kSpaceMismatch,
                "test set is " + test.space.name() + " but the classifier is " + space.name());
  }
}

// Median of per-call wall times over at least min_timed calls of f(row).
template <typename F>
std::pair<double, int> time_calls(const SampleSet& test, int min_timed, F&& f) {
  const int calls = std::max(min_timed, test.size());
  std::vector<double> times(static_cast<std::size_t>(calls));
  volatile double sink = 0.0;
  for (int i = 0; i < calls; ++i) {
    const Eigen::VectorXd x = test.inputs.row(i % test.size()).transpose();
    const auto t0 = std::chrono::steady_clock::now();
    sink = sink + f(x);
    times[static_cast<std::size_t>(i)] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  auto mid = times.begin() + calls / 2;
  std::nth_element(times.begin(), mid, times.end());
  return {*mid, calls};
}

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Andrew's monotone chain; returns the hull counter-clockwise without
// collinear points.
std::vector<Vec2> hull2(std::vector<Vec2> pts, double tol) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return {};
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], p) <= tol) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross2(h[k - 2], h[k - 1], pts[i]) <= tol) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

struct Face {
  int a, b, c;
  Vec3 n;
  double d;
  bool alive = true;
};

// Incremental 3D hull. Each new point outside the current hull removes the
// faces it sees and is joined to the horizon edges.
std::vector<Face> hull3(const std::vector<Vec3>& pts, double tol) {
  const int n = static_cast<int>(pts.size());
  if (n < 4) return {};
  // Initial tetrahedron from extreme points.
  int i0 = 0;
  for (int i = 1; i < n; ++i) {
    if (pts[i].x() < pts[i0].x()) i0 = i;
  }
  int i1 = i0;
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = (pts[i] - pts[i0]).norm();
    if (d > best) best = d, i1 = i;
  }
  if (best <= tol) return {};
  int i2 = i0;
  best = 0.0;
  const Vec3 u = (pts[i1] - pts[i0]).normalized();
  for (int i = 0; i < n; ++i) {
    const double d = u.cross(pts[i] - pts[i0]).norm();
    if (d > best) best = d, i2 = i;
  }
  if (best <= tol) return {};
  int i3 = i0;
  best = 0.0;
  const Vec3 w = u.cross(pts[i2] - pts[i0]).normalized();
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(w.dot(pts[i] - pts[i0]));
    if (d > best) best = d, i3 = i;
  }
  if (best <= tol) return {};

  std::vector<Face> faces;
  std::unordered_map<long long, int> edge_face;  // directed edge -> face
  const auto key = [n](int a, int b) { return static_cast<long long>(a) * n + b; };
  const Vec3 inside = (pts[i0] + pts[i1] + pts[i2] + pts[i3]) / 4.0;
  const auto add_face = [&](int a, int b, int c) {
    Face f{a, b, c, (pts[b] - pts[a]).cross(pts[c] - pts[a]), 0.0};
    f.n.normalize();
    f.d = f.n.dot(pts[a]);
    faces.push_back(f);
    const int id = static_cast<int>(faces.size()) - 1;
    edge_face[key(a, b)] = id;
    edge_face[key(b, c)] = id;
    edge_face[key(c, a)] = id;
  };
  const auto oriented = [&](int a, int b, int c) {
    const Vec3 nn = (pts[b] - pts[a]).cross(pts[c] - pts[a]);
    if (nn.dot(inside - pts[a]) > 0.0) {
      add_face(a, c, b);
    } else {
      add_face(a, b, c);
    }
  };
  oriented(i0, i1, i2);
  oriented(i0, i1, i3);
  oriented(i0, i2, i3);
  oriented(i1, i2, i3);

  std::vector<char> visible;
  for (int p = 0; p < n; ++p) {
    if (p == i0 || p == i1 || p == i2 || p == i3) continue;
    visible.assign(faces.size(), 0);
    bool any = false;
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && faces[f].n.dot(pts[p]) - faces[f].d > tol) {
        visible[f] = 1;
        any = true;
      }
    }
    if (!any) continue;
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t f = 0; f < visible.size(); ++f) {
      if (!visible[f]) continue;
      const Face& face = faces[f];
      for (const auto& [a, b] : {std::pair{face.a, face.b}, std::pair{face.b, face.c}, std::pair{face.c, face.a}}) {
        const auto it = edge_face.find(key(b, a));
        if (it != edge_face.end() && !visible[static_cast<std::size_t>(it->second)]) horizon.emplace_back(a, b);
      }
    }
    for (std::size_t f = 0; f < visible.size(); ++f) {
      if (!visible[f]) continue;
      Face& face = faces[f];
      face.alive = false;
      for (const auto& [a, b] : {std::pair{face.a, face.b}, std::pair{face.b, face.c}, std::pair{face.c, face.a}}) {
        const auto it = edge_face.find(key(a, b));
        if (it != edge_face.end() && it->second == static_cast<int>(f)) edge_face.erase(it);
      }
    }
    for (const auto& [a, b] : horizon) add_face(a, b, p);
  }
  std::vector<Face> alive;
  for (const Face& f : faces) {
    if (f.alive) alive.push_back(f);
  }
  return alive;
}

}  // namespace

EvalReport confusion(const std::vector<int>& predicted, const Eigen::VectorXd& actual) {
  if (static_cast<Eigen::Index>(predicted.size()) != actual.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "predicted and actual label counts differ");
  }
  EvalReport r;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool p = predicted[i] > 0, a = actual[static_cast<Eigen::Index>(i)] > 0;
    if (p && a) ++r.tp;
    else if (p) ++r.fp;
    else if (a) ++r.fn;
    else ++r.tn;
  }
  const int uni = r.tp + r.fp + r.fn;
  r.iou = uni == 0 ? 1.0 : static_cast<double>(r.tp) / uni;
  return r;
}

KnnClassifier::KnnClassifier(SampleSet train, int k) : train_(std::move(train)), k_(k) {
  if (k < 1 || k % 2 == 0) throw Error(ErrorCode::kInvalidArgument, "k must be a positive odd number");
  if (train_.size() < k) throw Error(ErrorCode::kEmptyInput, "fewer training samples than k");
}

int KnnClassifier::classify(const Eigen::VectorXd& x) const {
  if (x.size() != train_.inputs.cols()) throw Error(ErrorCode::kDimensionMismatch, "input has the wrong dimension");
  const Eigen::VectorXd d2 = (train_.inputs.rowwise() - x.transpose()).rowwise().squaredNorm();
  std::vector<int> idx(static_cast<std::size_t>(train_.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::partial_sort(idx.begin(), idx.begin() + k_, idx.end(),
                    [&](int a, int b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); });
  int vote = 0;
  for (int i = 0; i < k_; ++i) vote += train_.labels[idx[static_cast<std::size_t>(i)]] > 0 ? 1 : -1;
  return vote > 0 ? 1 : -1;
}

ConvexHullClassifier::ConvexHullClassifier(const SampleSet& train) : space_(train.space) {
  const SpaceKind kind = space_.kind();
  if (kind != SpaceKind::kR2 && kind != SpaceKind::kR3) {
    throw Error(ErrorCode::kUnsupportedSpace, "convex hull baseline needs an R2 or R3 task space");
  }
  const int dim = kind == SpaceKind::kR2 ? 2 : 3;
  std::vector<int> pos;
  for (int i = 0; i < train.size(); ++i) {
    if (train.labels[i] > 0) pos.push_back(i);
  }
  if (static_cast<int>(pos.size()) < dim + 1) {
    throw Error(ErrorCode::kDegenerateHull, "need at least " + std::to_string(dim + 1) + " positive samples");
  }
  double extent = 0.0;
  for (int i : pos) extent = std::max(extent, train.inputs.row(i).cwiseAbs().maxCoeff());
  tol_ = 1e-10 * std::max(1.0, extent);

  if (dim == 2) {
    std::vector<Vec2> pts;
    for (int i : pos) pts.emplace_back(train.inputs(i, 0), train.inputs(i, 1));
    const std::vector<Vec2> h = hull2(pts, tol_ * extent);
    if (h.size() < 3) throw Error(ErrorCode::kDegenerateHull, "positive samples are collinear");
    normals_.resize(static_cast<Eigen::Index>(h.size()), 2);
    offsets_.resize(static_cast<Eigen::Index>(h.size()));
    for (std::size_t e = 0; e < h.size(); ++e) {
      const Vec2 edge = h[(e + 1) % h.size()] - h[e];
      const Vec2 n = Vec2(edge.y(), -edge.x()).normalized();  // outward for a CCW hull
      normals_.row(static_cast<Eigen::Index>(e)) = n.transpose();
      offsets_[static_cast<Eigen::Index>(e)] = n.dot(h[e]);
    }
  } else {
    std::vector<Vec3> pts;
    for (int i : pos) pts.emplace_back(train.inputs(i, 0), train.inputs(i, 1), train.inputs(i, 2));
    const std::vector<Face> faces = hull3(pts, tol_);
    if (faces.empty()) throw Error(ErrorCode::kDegenerateHull, "positive samples are coplanar");
    normals_.resize(static_cast<Eigen::Index>(faces.size()), 3);
    offsets_.resize(static_cast<Eigen::Index>(faces.size()));
    for (std::size_t f = 0; f < faces.size(); ++f) {
      normals_.row(static_cast<Eigen::Index>(f)) = faces[f].n.transpose();
      offsets_[static_cast<Eigen::Index>(f)] = faces[f].d;
    }
  }
}

int ConvexHullClassifier::classify(const Eigen::VectorXd& x) const {
  if (x.size() != normals_.cols()) throw Error(ErrorCode::kDimensionMismatch, "input has the wrong dimension");
  return ((normals_ * x - offsets_).array() <= tol_).all() ? 1 : -1;
}

int knn_classify(const SampleSet& train, int k, const Eigen::VectorXd& x) {
  return KnnClassifier(train, k).classify(x);
}

int convexhull_classify(const SampleSet& train, const Eigen::VectorXd& x) {
  return ConvexHullClassifier(train).classify(x);
}

std::string describe_model(const ReachabilityMap& model) {
  if (const auto* svm = dynamic_cast<const SvmModel*>(&model)) return model_kind_name(svm->kind());
  if (dynamic_cast<const MlpModel*>(&model)) return model_kind_name(ModelKind::kMlp);
  if (const auto* o = dynamic_cast<const OffsetMap*>(&model)) return describe_model(*o->inner());
  if (const auto* m = dynamic_cast<const MirroredMap*>(&model)) return describe_model(*m->inner());
  return "map";
}

EvalReport compute_iou(const ReachabilityMap& model, const SampleSet& test, std::optional<double> offset_override,
                       const EvalOptions& opts) {
  check_test_set(model.space(), test);
  const double offset = offset_override.value_or(model.offset());
  std::vector<int> predicted(static_cast<std::size_t>(test.size()));
  for (int i = 0; i < test.size(); ++i) {
    predicted[static_cast<std::size_t>(i)] = model.raw_value(test.inputs.row(i).transpose()) + offset >= 0.0 ? 1 : -1;
  }
  EvalReport r = confusion(predicted, test.labels);
  if (opts.timing) {
    std::tie(r.seconds_per_sample, r.timed_evaluations) =
        time_calls(test, opts.min_timed, [&](const Eigen::VectorXd& x) { return model.value(x); });
  }
  r.model = describe_model(model);
  r.test_set = opts.test_set;
  r.offset = offset;
  r.offset_overridden = offset_override.has_value();
  return r;
}

EvalReport compute_iou(const Classifier& classifier, const SampleSet& test, const EvalOptions& opts) {
  check_test_set(classifier.space(), test);
  std::vector<int> predicted(static_cast<std::size_t>(test.size()));
  for (int i = 0; i < test.size(); ++i) predicted[static_cast<std::size_t>(i)] = classifier.classify(test.inputs.row(i).transpose());
  EvalReport r = confusion(predicted, test.labels);
  if (opts.timing) {
    std::tie(r.seconds_per_sample, r.timed_evaluations) = time_calls(
        test, opts.min_timed, [&](const Eigen::VectorXd& x) { return static_cast<double>(classifier.classify(x)); });
  }
  r.model = classifier.name();
  r.test_set = opts.test_set;
  return r;
}

std::vector<std::pair<double, double>> offset_sweep(const ReachabilityMap& model, const SampleSet& test,
                                                    const std::vector<double>& offsets) {
  if (offsets.size() < 2) throw Error(ErrorCode::kInvalidArgument, "an offset sweep needs at least two offsets");
  check_test_set(model.space(), test);
  // Raw values once, then threshold per offset.
  Eigen::VectorXd raw(test.size());
  for (int i = 0; i < test.size(); ++i) raw[i] = model.raw_value(test.inputs.row(i).transpose());
  std::vector<std::pair<double, double>> out;
  std::vector<int> predicted(static_cast<std::size_t>(test.size()));
  for (double rho : offsets) {
    for (int i = 0; i < test.size(); ++i) predicted[static_cast<std::size_t>(i)] = raw[i] + rho >= 0.0 ? 1 : -1;
    out.emplace_back(rho, confusion(predicted, test.labels).iou);
  }
  return out;
}

std::string eval_csv_header(bool with_timing) {
  return with_timing ? "model,test_set,offset,iou,tp,fp,fn,tn,seconds_per_sample\n"
                     : "model,test_set,offset,iou,tp,fp,fn,tn\n";
}

std::string eval_csv_row(const EvalReport& r, bool with_timing) {
  std::string row = r.model + ',' + r.test_set + ',' + fmt(r.offset) + ',' + fmt(r.iou) + ',' +
                    std::to_string(r.tp) + ',' + std::to_string(r.fp) + ',' + std::to_string(r.fn) + ',' +
                    std::to_string(r.tn);
  if (with_timing) row += ',' + fmt(r.seconds_per_sample);
  return row + '\n';
}

std::string eval_text(const EvalReport& r) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof(buf), "model     %s\n", r.model.c_str());
  out += buf;
  if (!r.test_set.empty()) {
    std::snprintf(buf, sizeof(buf), "test set  %s (%d samples)\n", r.test_set.c_str(), r.total());
  } else {
    std::snprintf(buf, sizeof(buf), "test set  %d samples\n", r.total());
  }
  out += buf;
  std::snprintf(buf, sizeof(buf), "offset    %g%s\n", r.offset, r.offset_overridden ? " (override)" : "");
  out += buf;
  std::snprintf(buf, sizeof(buf), "iou       %.4f\n", r.iou);
  out += buf;
  std::snprintf(buf, sizeof(buf), "tp %d  fp %d  fn %d  tn %d\n", r.tp, r.fp, r.fn, r.tn);
  out += buf;
  if (r.timed_evaluations > 0) {
    std::snprintf(buf, sizeof(buf), "median    %.3g us per sample over %d calls\n", 1e6 * r.seconds_per_sample,
                  r.timed_evaluations);
    out += buf;
  }
  return out;
}

}  // namespace reachmap
