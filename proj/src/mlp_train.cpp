#include <cmath>
#include <numeric>

#include "reachmap/error.hpp"
#include "reachmap/models.hpp"
#include "reachmap/rng.hpp"

namespace reachmap {

namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Adam {
  Eigen::MatrixXd m, v;
  void init(Eigen::Index rows, Eigen::Index cols) {
    m = Eigen::MatrixXd::Zero(rows, cols);
    v = Eigen::MatrixXd::Zero(rows, cols);
  }
  template <typename P>
  void step(P& param, const Eigen::MatrixXd& grad, double lr, int t) {
    constexpr double kB1 = 0.9, kB2 = 0.999, kEps = 1e-8;
    m = kB1 * m + (1.0 - kB1) * grad;
    v = kB2 * v + (1.0 - kB2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(kB1, t), c2 = 1.0 - std::pow(kB2, t);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  }
};

double mean_loss(const MlpModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::VectorXd f = model.raw_values(X);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) sum += softplus(-y[i] * f[i]);
  return sum / static_cast<double>(f.size());
}

}  // namespace

MlpTraining train_mlp(const SampleSet& data, const MlpConfig& cfg) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyInput, "no training samples");
  if (data.positives() == 0 || data.negatives() == 0) {
    throw Error(ErrorCode::kSingleClass,
                "training data has a single class; use the one-class SVM for positive-only data");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "MLP epochs, batch size and learning rate must be positive");
  }
  for (int h : cfg.hidden) {
    if (h < 1) throw Error(ErrorCode::kInvalidArgument, "hidden layer sizes must be positive");
  }

  const int n = data.size();
  const int dim = data.space.input_dim();
  const Eigen::MatrixXd& X = data.inputs;
  const Eigen::VectorXd& y = data.labels;

  const Eigen::VectorXd mean = X.colwise().mean().transpose();
  Eigen::VectorXd scale =
      ((X.rowwise() - mean.transpose()).array().square().colwise().sum() / n).sqrt().transpose();
  for (int d = 0; d < dim; ++d) {
    if (scale[d] < 1e-12) scale[d] = 1.0;
  }

  Rng rng(cfg.seed);
  std::vector<int> sizes = cfg.hidden;
  sizes.push_back(1);
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;
  int fan_in = dim;
  for (int out : sizes) {
    const double limit = std::sqrt(6.0 / fan_in);
    Eigen::MatrixXd w(out, fan_in);
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-limit, limit);
    W.push_back(w);
    b.push_back(Eigen::VectorXd::Zero(out));
    fan_in = out;
  }
  const std::size_t L = W.size();
  std::vector<Adam> adam_w(L), adam_b(L);
  for (std::size_t l = 0; l < L; ++l) {
    adam_w[l].init(W[l].rows(), W[l].cols());
    adam_b[l].init(b[l].rows(), 1);
  }

  const Eigen::MatrixXd Xn =
      ((X.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array()).matrix();
  const auto snapshot = [&] { return MlpModel(data.space, W, b, mean, scale, cfg.offset); };

  MlpTraining out;
  out.loss_curve.push_back(mean_loss(snapshot(), X, y));

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  int t = 0;
  std::vector<Eigen::MatrixXd> act(L), pre(L);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int bs = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd h(dim, bs);
      Eigen::RowVectorXd yb(bs);
      for (int k = 0; k < bs; ++k) {
        h.col(k) = Xn.row(order[start + k]).transpose();
        yb[k] = y[order[start + k]];
      }
      // Forward, keeping inputs and pre-activations of every layer.
      for (std::size_t l = 0; l < L; ++l) {
        act[l] = h;
        pre[l] = (W[l] * h).colwise() + b[l];
        h = l + 1 < L ? pre[l].cwiseMax(0.0) : pre[l];
      }
      // d/df softplus(-y f) = -y sigmoid(-y f), averaged over the batch.
      Eigen::MatrixXd delta(1, bs);
      for (int k = 0; k < bs; ++k) delta(0, k) = -yb[k] * sigmoid(-yb[k] * h(0, k)) / bs;
      ++t;
      for (int l = static_cast<int>(L) - 1; l >= 0; --l) {
        const Eigen::MatrixXd gw = delta * act[l].transpose();
        const Eigen::VectorXd gb = delta.rowwise().sum();
        if (l > 0) {
          delta = W[l].transpose() * delta;
          delta = delta.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
        }
        adam_w[l].step(W[l], gw, cfg.learning_rate, t);
        adam_b[l].step(b[l], gb, cfg.learning_rate, t);
      }
    }
    out.loss_curve.push_back(mean_loss(snapshot(), X, y));
  }
  out.model = snapshot();
  return out;
}

}  // namespace reachmap
