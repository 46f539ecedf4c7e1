#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "reachmap/error.hpp"
#include "reachmap/models.hpp"

namespace reachmap {

namespace {

constexpr double kTau = 1e-12;

// Rows of the signed kernel matrix Q_ij = y_i y_j exp(-gamma |x_i - x_j|^2),
// computed on demand and kept in an LRU cache bounded by a byte budget.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma, double cache_mb)
      : X_(X.transpose()), y_(y), gamma_(gamma) {
    const double row_bytes = static_cast<double>(X.rows()) * sizeof(double);
    capacity_ = std::max<std::size_t>(2, static_cast<std::size_t>(cache_mb * 1048576.0 / row_bytes));
  }

  const Eigen::VectorXd& row(int i) {
    auto it = index_.find(i);
    if (it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    if (order_.size() >= capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    const Eigen::Index n = X_.cols();
    Eigen::VectorXd r(n);
    const Eigen::VectorXd xi = X_.col(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      r[j] = y_[i] * y_[j] * std::exp(-gamma_ * (X_.col(j) - xi).squaredNorm());
    }
    order_.emplace_front(i, std::move(r));
    index_[i] = order_.begin();
    return order_.front().second;
  }

 private:
  Eigen::MatrixXd X_;  // column per sample
  Eigen::VectorXd y_;
  double gamma_;
  std::size_t capacity_;
  std::list<std::pair<int, Eigen::VectorXd>> order_;
  std::unordered_map<int, std::list<std::pair<int, Eigen::VectorXd>>::iterator> index_;
};

struct SmoResult {
  Eigen::VectorXd alpha;
  double rho = 0.0;  // decision = sum alpha_i y_i K(x, x_i) - rho
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
};

// min 0.5 a'Qa + p'a  s.t. y'a = const, 0 <= a_i <= C, starting from a feasible
// alpha. Working pair: the maximal violator i, then j by the second-order gain
// (Fan, Chen and Lin 2005). Stops when the violation gap is below eps.
SmoResult smo(KernelRows& Q, const Eigen::VectorXd& y, const Eigen::VectorXd& p, double C,
              Eigen::VectorXd alpha, double eps, long long max_iter) {
  const int n = static_cast<int>(y.size());
  Eigen::VectorXd G = p;
  for (int i = 0; i < n; ++i) {
    if (alpha[i] != 0.0) G += alpha[i] * Q.row(i);
  }
  const auto is_upper = [&](int t) { return alpha[t] >= C; };
  const auto is_lower = [&](int t) { return alpha[t] <= 0.0; };
  const auto in_up = [&](int t) { return y[t] > 0 ? !is_upper(t) : !is_lower(t); };
  const auto in_low = [&](int t) { return y[t] > 0 ? !is_lower(t) : !is_upper(t); };

  SmoResult res;
  long long iter = 0;
  while (true) {
    double gmax = -std::numeric_limits<double>::infinity();
    int i = -1;
    for (int t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * G[t] >= gmax) {
        gmax = -y[t] * G[t];
        i = t;
      }
    }
    double gmax2 = -std::numeric_limits<double>::infinity();
    int j = -1;
    double best_gain = std::numeric_limits<double>::infinity();
    // RBF kernels have a unit diagonal, so Q_tt = 1.
    const Eigen::VectorXd Qi = i >= 0 ? Q.row(i) : Eigen::VectorXd();
    for (int t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      gmax2 = std::max(gmax2, y[t] * G[t]);
      const double b = gmax + y[t] * G[t];
      if (i >= 0 && b > 0.0) {
        const double a = std::max(Qi[i] + 1.0 - 2.0 * y[i] * y[t] * Qi[t], kTau);
        const double gain = -(b * b) / a;
        if (gain <= best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < eps || i < 0 || j < 0) {
      res.converged = true;
      break;
    }
    if (iter >= max_iter) break;
    ++iter;

    const Eigen::VectorXd& Qi_row = Qi;
    const Eigen::VectorXd Qj_row = Q.row(j);
    const double old_ai = alpha[i], old_aj = alpha[j];
    if (y[i] != y[j]) {
      const double quad = std::max(Qi_row[i] + Qj_row[j] + 2.0 * Qi_row[j], kTau);
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0 && alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = diff;
      } else if (diff <= 0 && alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0 && alpha[i] > C) {
        alpha[i] = C;
        alpha[j] = C - diff;
      } else if (diff <= 0 && alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      const double quad = std::max(Qi_row[i] + Qj_row[j] - 2.0 * Qi_row[j], kTau);
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C && alpha[i] > C) {
        alpha[i] = C;
        alpha[j] = sum - C;
      } else if (sum <= C && alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > C && alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = sum - C;
      } else if (sum <= C && alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    G += (alpha[i] - old_ai) * Qi_row + (alpha[j] - old_aj) * Qj_row;
  }

  // Threshold from free variables, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (int t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (is_upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (is_lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      sum_free += yg;
      ++n_free;
    }
  }
  res.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  res.objective = 0.5 * alpha.dot(G + p);
  res.iterations = static_cast<int>(iter);
  res.alpha = std::move(alpha);
  return res;
}

SvmModel pack(ModelKind kind, const SampleSet& data, const Eigen::VectorXd& alpha,
              const Eigen::VectorXd& y, double rho, const SvmConfig& cfg) {
  std::vector<int> keep;
  for (int i = 0; i < alpha.size(); ++i) {
    if (alpha[i] > 0.0) keep.push_back(i);
  }
  if (keep.empty()) throw Error(ErrorCode::kInvalidArgument, "SVM training found no support vectors");
  Eigen::VectorXd coeffs(static_cast<Eigen::Index>(keep.size()));
  Eigen::MatrixXd support(static_cast<Eigen::Index>(keep.size()), data.inputs.cols());
  for (std::size_t k = 0; k < keep.size(); ++k) {
    coeffs[static_cast<Eigen::Index>(k)] = alpha[keep[k]] * y[keep[k]];
    support.row(static_cast<Eigen::Index>(k)) = data.inputs.row(keep[k]);
  }
  return SvmModel(kind, data.space, cfg.gamma, coeffs, support, -rho, cfg.offset);
}

void check_config(const SvmConfig& cfg) {
  if (!(cfg.gamma > 0.0) || !(cfg.C > 0.0) || !(cfg.kkt_tol > 0.0) || cfg.max_passes < 1 ||
      !(cfg.cache_mb > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "SVM hyperparameters must be positive");
  }
  if (!(cfg.nu > 0.0 && cfg.nu <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "nu must lie in (0, 1]");
}

}  // namespace

SvmTraining train_svm(const SampleSet& data, const SvmConfig& cfg) {
  check_config(cfg);
  if (data.size() == 0) throw Error(ErrorCode::kEmptyInput, "no training samples");
  if (data.positives() == 0 || data.negatives() == 0) {
    throw Error(ErrorCode::kSingleClass,
                "training data has a single class; use the one-class SVM for positive-only data");
  }
  const int n = data.size();
  const Eigen::VectorXd& y = data.labels;
  KernelRows Q(data.inputs, y, cfg.gamma, cfg.cache_mb);
  const SmoResult r = smo(Q, y, -Eigen::VectorXd::Ones(n), cfg.C, Eigen::VectorXd::Zero(n),
                          cfg.kkt_tol, static_cast<long long>(cfg.max_passes) * n);
  SvmTraining out;
  out.model = pack(ModelKind::kSvm, data, r.alpha, y, r.rho, cfg);
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.dual_objective = r.objective;
  out.alpha = r.alpha;
  return out;
}

SvmTraining train_ocsvm(const SampleSet& data, const SvmConfig& cfg) {
  check_config(cfg);
  if (data.size() == 0) throw Error(ErrorCode::kEmptyInput, "no training samples");
  if (data.negatives() > 0) {
    throw Error(ErrorCode::kMixedLabels, "one-class SVM training data must be all positive");
  }
  const int n = data.size();
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(n);
  // Dual in the scaling 0 <= a_i <= 1, sum a_i = nu L.
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  const double total = cfg.nu * n;
  const int full = static_cast<int>(total);
  for (int i = 0; i < full && i < n; ++i) alpha[i] = 1.0;
  if (full < n) alpha[full] = total - full;
  KernelRows Q(data.inputs, y, cfg.gamma, cfg.cache_mb);
  const SmoResult r = smo(Q, y, Eigen::VectorXd::Zero(n), 1.0, alpha, cfg.kkt_tol,
                          static_cast<long long>(cfg.max_passes) * n);
  SvmTraining out;
  out.model = pack(ModelKind::kOcSvm, data, r.alpha, y, r.rho, cfg);
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.dual_objective = r.objective;
  out.alpha = r.alpha;
  return out;
}

}  // namespace reachmap
