#include "reachmap/models.hpp"

#include <cmath>
#include <limits>

#include "reachmap/error.hpp"

namespace reachmap {

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kSvm: return "svm";
    case ModelKind::kOcSvm: return "ocsvm";
  }
  return "?";
}

void ReachabilityMap::check_input(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "model expects " + std::to_string(input_dim()) +
                                                   " inputs, got " + std::to_string(x.size()));
  }
}

MlpModel::MlpModel(TaskSpace space, std::vector<Eigen::MatrixXd> weights,
                   std::vector<Eigen::VectorXd> biases, Eigen::VectorXd input_mean,
                   Eigen::VectorXd input_scale, double offset)
    : space_(space),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      input_mean_(std::move(input_mean)),
      input_scale_(std::move(input_scale)),
      offset_(offset) {
  if (weights_.empty() || weights_.size() != biases_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "MLP needs matching weight and bias lists");
  }
  Eigen::Index in = space_.input_dim();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].cols() != in || biases_[l].size() != weights_[l].rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "MLP layer " + std::to_string(l) +
                                                     " has inconsistent shapes");
    }
    in = weights_[l].rows();
  }
  if (in != 1) throw Error(ErrorCode::kInvalidArgument, "MLP must end in a single output");
  if (input_mean_.size() != space_.input_dim() || input_scale_.size() != space_.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "MLP input normalization has the wrong size");
  }
}

std::vector<int> MlpModel::layer_sizes() const {
  std::vector<int> out;
  for (const auto& w : weights_) out.push_back(static_cast<int>(w.rows()));
  return out;
}

MlpModel MlpModel::with_offset(double offset) const {
  MlpModel m = *this;
  m.offset_ = offset;
  return m;
}

double MlpModel::raw_value(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd h = (x - input_mean_).cwiseQuotient(input_scale_);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = weights_[l] * h + biases_[l];
    if (l + 1 < weights_.size()) h = h.cwiseMax(0.0);
  }
  return h[0];
}

Eigen::VectorXd MlpModel::raw_values(const Eigen::MatrixXd& X) const {
  if (X.cols() != input_dim()) throw Error(ErrorCode::kDimensionMismatch, "batch has wrong width");
  Eigen::MatrixXd h = ((X.rowwise() - input_mean_.transpose()).array().rowwise() /
                       input_scale_.transpose().array())
                          .matrix()
                          .transpose();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = (weights_[l] * h).colwise() + biases_[l];
    if (l + 1 < weights_.size()) h = h.cwiseMax(0.0);
  }
  return h.row(0).transpose();
}

Eigen::VectorXd MlpModel::gradient(const Eigen::VectorXd& x) const {
  check_input(x);
  std::vector<Eigen::VectorXd> pre;
  Eigen::VectorXd h = (x - input_mean_).cwiseQuotient(input_scale_);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = weights_[l] * h + biases_[l];
    if (l + 1 < weights_.size()) {
      pre.push_back(h);
      h = h.cwiseMax(0.0);
    }
  }
  Eigen::RowVectorXd g = weights_.back();
  for (int l = static_cast<int>(weights_.size()) - 2; l >= 0; --l) {
    for (Eigen::Index k = 0; k < g.size(); ++k) {
      if (pre[l][k] <= 0.0) g[k] = 0.0;
    }
    g = g * weights_[l];
  }
  return g.transpose().cwiseQuotient(input_scale_);
}

double MlpModel::min_abs_preactivation(const Eigen::VectorXd& x) const {
  check_input(x);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd h = (x - input_mean_).cwiseQuotient(input_scale_);
  for (std::size_t l = 0; l + 1 < weights_.size(); ++l) {
    h = weights_[l] * h + biases_[l];
    best = std::min(best, h.cwiseAbs().minCoeff());
    h = h.cwiseMax(0.0);
  }
  return best;
}

SvmModel::SvmModel(ModelKind kind, TaskSpace space, double gamma, Eigen::VectorXd coeffs,
                   Eigen::MatrixXd support, double bias, double offset)
    : kind_(kind),
      space_(space),
      gamma_(gamma),
      coeffs_(std::move(coeffs)),
      support_(std::move(support)),
      bias_(bias),
      offset_(offset) {
  if (kind_ == ModelKind::kMlp) throw Error(ErrorCode::kInvalidArgument, "SVM kind expected");
  if (!(gamma_ > 0.0)) throw Error(ErrorCode::kInvalidArgument, "gamma must be positive");
  if (coeffs_.size() < 1 || support_.rows() != coeffs_.size() ||
      support_.cols() != space_.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "SVM support set has inconsistent shape");
  }
}

SvmModel SvmModel::with_offset(double offset) const {
  SvmModel m = *this;
  m.offset_ = offset;
  return m;
}

double SvmModel::raw_value(const Eigen::VectorXd& x) const {
  check_input(x);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < coeffs_.size(); ++i) {
    sum += coeffs_[i] * std::exp(-gamma_ * (support_.row(i).transpose() - x).squaredNorm());
  }
  return sum + bias_;
}

Eigen::VectorXd SvmModel::gradient(const Eigen::VectorXd& x) const {
  check_input(x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < coeffs_.size(); ++i) {
    const Eigen::VectorXd d = x - support_.row(i).transpose();
    g += coeffs_[i] * std::exp(-gamma_ * d.squaredNorm()) * d;
  }
  return -2.0 * gamma_ * g;
}

MirroredMap::MirroredMap(MapPtr inner) : inner_(std::move(inner)) {
  if (!inner_ || inner_->space().kind() != SpaceKind::kSE2) {
    throw Error(ErrorCode::kUnsupportedSpace, "mirrored maps are defined for SE2 maps");
  }
}

Eigen::VectorXd MirroredMap::reflect(const Eigen::VectorXd& x) {
  Eigen::VectorXd r = x;
  r[1] = -r[1];
  r[3] = -r[3];
  return r;
}

double MirroredMap::raw_value(const Eigen::VectorXd& x) const {
  check_input(x);
  return inner_->raw_value(reflect(x));
}

Eigen::VectorXd MirroredMap::gradient(const Eigen::VectorXd& x) const {
  check_input(x);
  return reflect(inner_->gradient(reflect(x)));
}

}  // namespace reachmap
