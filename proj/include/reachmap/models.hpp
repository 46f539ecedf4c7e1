#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "reachmap/geometry.hpp"
#include "reachmap/sampling.hpp"

namespace reachmap {

enum class ModelKind { kMlp, kSvm, kOcSvm };

std::string model_kind_name(ModelKind kind);

// A differentiable reachability map over encoded task-space inputs. A point
// is predicted reachable iff value(x) >= 0, and value = raw_value + offset.
class ReachabilityMap {
 public:
  virtual ~ReachabilityMap() = default;

  virtual TaskSpace space() const = 0;
  virtual double raw_value(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
  virtual double offset() const = 0;

  int input_dim() const { return space().input_dim(); }
  double value(const Eigen::VectorXd& x) const { return raw_value(x) + offset(); }
  bool reachable(const Eigen::VectorXd& x) const { return value(x) >= 0.0; }

 protected:
  void check_input(const Eigen::VectorXd& x) const;
};

using MapPtr = std::shared_ptr<const ReachabilityMap>;

class MlpModel : public ReachabilityMap {
 public:
  MlpModel() = default;
  // weights[l] is out x in; the last layer must have a single output.
  MlpModel(TaskSpace space, std::vector<Eigen::MatrixXd> weights, std::vector<Eigen::VectorXd> biases,
           Eigen::VectorXd input_mean, Eigen::VectorXd input_scale, double offset);

  TaskSpace space() const override { return space_; }
  double raw_value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
  double offset() const override { return offset_; }

  // Raw values for every row of X.
  Eigen::VectorXd raw_values(const Eigen::MatrixXd& X) const;
  // Smallest |pre-activation| over hidden units; gradients are exact only
  // away from zero.
  double min_abs_preactivation(const Eigen::VectorXd& x) const;

  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  const Eigen::VectorXd& input_mean() const { return input_mean_; }
  const Eigen::VectorXd& input_scale() const { return input_scale_; }
  std::vector<int> layer_sizes() const;
  MlpModel with_offset(double offset) const;

 private:
  TaskSpace space_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd input_mean_;
  Eigen::VectorXd input_scale_;
  double offset_ = 0.0;
};

// RBF decision function sum_i coeff_i exp(-gamma |x - x_i|^2) + bias.
class SvmModel : public ReachabilityMap {
 public:
  SvmModel() = default;
  SvmModel(ModelKind kind, TaskSpace space, double gamma, Eigen::VectorXd coeffs,
           Eigen::MatrixXd support, double bias, double offset);

  TaskSpace space() const override { return space_; }
  double raw_value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
  double offset() const override { return offset_; }

  ModelKind kind() const { return kind_; }
  double gamma() const { return gamma_; }
  const Eigen::VectorXd& coeffs() const { return coeffs_; }
  const Eigen::MatrixXd& support() const { return support_; }
  double bias() const { return bias_; }
  int support_count() const { return static_cast<int>(coeffs_.size()); }
  SvmModel with_offset(double offset) const;

 private:
  ModelKind kind_ = ModelKind::kSvm;
  TaskSpace space_;
  double gamma_ = 1.0;
  Eigen::VectorXd coeffs_;
  Eigen::MatrixXd support_;
  double bias_ = 0.0;
  double offset_ = 0.0;
};

// Evaluates another map with a different offset.
class OffsetMap : public ReachabilityMap {
 public:
  OffsetMap(MapPtr inner, double offset) : inner_(std::move(inner)), offset_(offset) {}
  TaskSpace space() const override { return inner_->space(); }
  double raw_value(const Eigen::VectorXd& x) const override { return inner_->raw_value(x); }
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return inner_->gradient(x); }
  double offset() const override { return offset_; }
  const MapPtr& inner() const { return inner_; }

 private:
  MapPtr inner_;
  double offset_;
};

// SE2 map reflected across the x axis: value(x, y, c, s) is the inner value at
// (x, -y, c, -s). Turns a left-from-right footstep map into right-from-left.
class MirroredMap : public ReachabilityMap {
 public:
  explicit MirroredMap(MapPtr inner);
  TaskSpace space() const override { return inner_->space(); }
  double raw_value(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
  double offset() const override { return inner_->offset(); }
  const MapPtr& inner() const { return inner_; }

  static Eigen::VectorXd reflect(const Eigen::VectorXd& x);

 private:
  MapPtr inner_;
};

struct MlpConfig {
  std::vector<int> hidden = {64, 32};
  int epochs = 200;
  int batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double offset = 0.0;
};

struct MlpTraining {
  MlpModel model;
  // Mean training loss before the first epoch, then after every epoch.
  std::vector<double> loss_curve;
};

// Mean softplus(-y f(x)) minimized by minibatch Adam. Inputs are standardized
// with the training mean and spread, which the model stores.
MlpTraining train_mlp(const SampleSet& data, const MlpConfig& cfg);

struct SvmConfig {
  double C = 10.0;
  double nu = 0.05;
  double gamma = 30.0;
  double offset = 0.1;
  double kkt_tol = 1e-3;
  int max_passes = 200;  // iteration cap = max_passes * L
  double cache_mb = 512.0;
};

struct SvmTraining {
  SvmModel model;
  int iterations = 0;
  bool converged = false;
  double dual_objective = 0.0;  // in the form that training minimizes
  Eigen::VectorXd alpha;        // full dual vector over the training rows
};

// C-SVC by SMO. Throws kSingleClass if only one label is present.
SvmTraining train_svm(const SampleSet& data, const SvmConfig& cfg);

// One-class nu-SVM by SMO on positives only. Throws kMixedLabels otherwise.
SvmTraining train_ocsvm(const SampleSet& data, const SvmConfig& cfg);

// JSON model files.
std::string model_to_json(const ReachabilityMap& model);
std::shared_ptr<ReachabilityMap> model_from_json(const std::string& text);
void save_model(const ReachabilityMap& model, const std::string& path);
std::shared_ptr<ReachabilityMap> load_model(const std::string& path);

}  // namespace reachmap
