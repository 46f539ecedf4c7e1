#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Core>

namespace reachmap::testing {

// Brute-force maximum of the C-SVC dual
//   D(a) = sum a_i - 0.5 sum_ij a_i a_j y_i y_j K_ij,  0 <= a_i <= C,  y'a = 0
// over a uniform grid on the first n-1 coordinates; the last coordinate is
// fixed by the equality constraint and kept only if it lands in [0, C].
inline double dual_grid_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double gamma,
                            double C, int steps) {
  const int n = static_cast<int>(y.size());
  Eigen::MatrixXd Q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      Q(i, j) = y[i] * y[j] * std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd a(n);
  std::vector<int> idx(n - 1, 0);
  while (true) {
    double s = 0.0;
    for (int k = 0; k < n - 1; ++k) {
      a[k] = C * idx[k] / steps;
      s += y[k] * a[k];
    }
    a[n - 1] = -s * y[n - 1];
    if (a[n - 1] >= -1e-12 && a[n - 1] <= C + 1e-12) {
      best = std::max(best, a.sum() - 0.5 * a.dot(Q * a));
    }
    int k = 0;
    while (k < n - 1 && ++idx[k] > steps) idx[k++] = 0;
    if (k == n - 1) break;
  }
  return best;
}

}  // namespace reachmap::testing
