#pragma once

// Reference solutions computed without the library's solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

struct GridResult {
  Eigen::VectorXd w;
  double objective = std::numeric_limits<double>::infinity();  // squared, v-weighted
};

inline double weighted_sq(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const Eigen::VectorXd& v,
                          const Eigen::VectorXd& w) {
  const Eigen::VectorXd r = x1 - x0 * w;
  return (v.array() * r.array().square()).sum();
}

/// Visit every simplex point whose first J-1 coordinates are lo[i] + step*n_i
/// with n_i in [0, span_i]; the last coordinate absorbs the remainder.
inline void visit_grid(Eigen::Index J, const std::vector<long>& lo, const std::vector<long>& span, double step,
                       long total, const std::function<void(const Eigen::VectorXd&)>& f) {
  Eigen::VectorXd w(J);
  std::vector<long> n(static_cast<std::size_t>(J - 1), 0);
  std::function<void(Eigen::Index, long)> rec = [&](Eigen::Index i, long used) {
    if (i == J - 1) {
      const long last = total - used;
      if (last < 0) return;
      w(J - 1) = step * static_cast<double>(last);
      f(w);
      return;
    }
    const auto ui = static_cast<std::size_t>(i);
    for (long k = std::max(0L, lo[ui]); k <= lo[ui] + span[ui] && used + k <= total; ++k) {
      w(i) = step * static_cast<double>(k);
      rec(i + 1, used + k);
    }
  };
  rec(0, 0);
}

/// Exhaustive search over the simplex: step 1e-2 everywhere, then step 1e-3
/// in a +-0.02 box around the incumbent, re-centred until the incumbent is
/// interior to the box.
inline GridResult simplex_grid(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0, const Eigen::VectorXd& v) {
  const Eigen::Index J = x0.cols();
  GridResult best;
  auto consider = [&](const Eigen::VectorXd& w) {
    const double f = weighted_sq(x1, x0, v, w);
    if (f < best.objective) {
      best.objective = f;
      best.w = w;
    }
  };
  const auto m = static_cast<std::size_t>(J - 1);
  if (J == 1) {
    best.w = Eigen::VectorXd::Ones(1);
    best.objective = weighted_sq(x1, x0, v, best.w);
    return best;
  }
  visit_grid(J, std::vector<long>(m, 0), std::vector<long>(m, 100), 1e-2, 100, consider);

  for (int round = 0; round < 20; ++round) {
    std::vector<long> lo(m), span(m, 40);
    for (std::size_t i = 0; i < m; ++i) lo[i] = std::lround(best.w(static_cast<Eigen::Index>(i)) * 1000.0) - 20;
    const Eigen::VectorXd before = best.w;
    visit_grid(J, lo, span, 1e-3, 1000, consider);
    if ((best.w - before).cwiseAbs().maxCoeff() < 5e-4) break;
  }
  return best;
}

/// OLS with intercept by the normal equations: returns (alpha, beta).
inline Eigen::VectorXd normal_equations(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  const Eigen::MatrixXd G = D.transpose() * D;
  return G.ldlt().solve(D.transpose() * y);
}

}  // namespace oracle
