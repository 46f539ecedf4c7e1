#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "reachmap/models.hpp"
#include "reachmap/sampling.hpp"

namespace reachmap {

struct EvalReport {
  double iou = 0.0;  // tp / (tp + fp + fn); 1 when both sets are empty
  int tp = 0;
  int fp = 0;
  int fn = 0;
  int tn = 0;
  // Median wall time of one single-sample evaluation; 0 when not timed.
  double seconds_per_sample = 0.0;
  int timed_evaluations = 0;
  std::string model;
  std::string test_set;
  double offset = 0.0;
  bool offset_overridden = false;

  int total() const { return tp + fp + fn + tn; }
};

struct EvalOptions {
  std::string test_set;
  bool timing = true;
  int min_timed = 10000;  // the test set is cycled until this many timed calls
};

// Confusion counts and IoU of predicted against actual labels (both +-1).
EvalReport confusion(const std::vector<int>& predicted, const Eigen::VectorXd& actual);

// Label-only classifiers used as baselines. They deliberately do not
// implement ReachabilityMap: no values, no gradients, no planning.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual TaskSpace space() const = 0;
  virtual int classify(const Eigen::VectorXd& x) const = 0;
  virtual std::string name() const = 0;
};

// Majority label of the k nearest training inputs (Euclidean distance on the
// encoding). Ties in distance are broken by training row order.
class KnnClassifier final : public Classifier {
 public:
  KnnClassifier(SampleSet train, int k);
  TaskSpace space() const override { return train_.space; }
  int classify(const Eigen::VectorXd& x) const override;
  std::string name() const override { return "knn" + std::to_string(k_); }

 private:
  SampleSet train_;
  int k_;
};

// +1 inside or on the convex hull of the positive training samples. R2 and R3
// only; throws kDegenerateHull if the positives span less than the full space.
class ConvexHullClassifier final : public Classifier {
 public:
  explicit ConvexHullClassifier(const SampleSet& train);
  TaskSpace space() const override { return space_; }
  int classify(const Eigen::VectorXd& x) const override;
  std::string name() const override { return "convex"; }

  // Outward facets n . x <= d (edges in R2, triangles in R3).
  int facet_count() const { return static_cast<int>(offsets_.size()); }
  const Eigen::MatrixXd& normals() const { return normals_; }
  const Eigen::VectorXd& offsets() const { return offsets_; }

 private:
  TaskSpace space_;
  Eigen::MatrixXd normals_;  // facets x dim
  Eigen::VectorXd offsets_;
  double tol_ = 0.0;
};

int knn_classify(const SampleSet& train, int k, const Eigen::VectorXd& x);
int convexhull_classify(const SampleSet& train, const Eigen::VectorXd& x);

// Predicted positive iff value >= 0, with the model's stored offset replaced
// by offset_override when given. Throws kEmptyInput on an empty test set and
// kSpaceMismatch if the test set is from another task space.
EvalReport compute_iou(const ReachabilityMap& model, const SampleSet& test,
                       std::optional<double> offset_override = std::nullopt, const EvalOptions& opts = {});
EvalReport compute_iou(const Classifier& classifier, const SampleSet& test, const EvalOptions& opts = {});

// (offset, iou) per offset; needs at least two offsets. Untimed.
std::vector<std::pair<double, double>> offset_sweep(const ReachabilityMap& model, const SampleSet& test,
                                                    const std::vector<double>& offsets);

// Kind of a map for reports: "svm", "ocsvm", "mlp", or the inner kind for
// offset and mirrored wrappers.
std::string describe_model(const ReachabilityMap& model);

std::string eval_csv_header(bool with_timing);
std::string eval_csv_row(const EvalReport& r, bool with_timing);
std::string eval_text(const EvalReport& r);

}  // namespace reachmap
