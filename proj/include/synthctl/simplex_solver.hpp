#pragma once

#include "synthctl/core.hpp"
#include "synthctl/panel.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace synthctl {

/// How a solution is picked when the minimizer is not unique (the treated
/// predictors lie inside the donors' convex hull, or the optimal face is
/// degenerate).
enum class TieBreak {
  /// The optimal point closest to uniform weights 1/J.
  nearest_uniform,
  /// Whatever vertex-sparse point the active set reaches (at most k + 1
  /// nonzero weights).
  sparse_vertex,
};

struct SolverConfig {
  Index max_iterations = 100000;
  /// Relative bound on the Frank-Wolfe gap, which bounds the distance of the
  /// squared objective from its minimum: stop when gap <= tolerance * (1 + f).
  double tolerance = 1e-10;
  /// Weights below this are snapped to zero and the rest renormalized.
  double zero_clip = 1e-9;
  /// Relative gap accepted when the active set stops making progress at
  /// machine precision before reaching `tolerance`.
  double certificate = 1e-7;
  TieBreak tie_break = TieBreak::nearest_uniform;

  void validate() const {
    if (!(tolerance > 0.0)) throw InvalidSpecification("solver tolerance must be positive");
    if (!(zero_clip >= 0.0)) throw InvalidSpecification("solver zero_clip must be nonnegative");
    if (max_iterations < 1) throw InvalidSpecification("solver max_iterations must be >= 1");
    if (!(certificate >= tolerance)) {
      throw InvalidSpecification("solver certificate must be >= tolerance");
    }
  }
};

/// Least squares over the probability simplex,
///
///   minimize ||b - A w||^2  subject to  w >= 0, sum(w) = 1,
///
/// by a primal active-set method. Each outer step adds the coordinate with
/// the most negative reduced gradient; the inner loop solves the
/// equality-constrained problem on the support and walks back toward the
/// previous iterate whenever a support weight would turn nonpositive. Iterates
/// stay on low-dimensional faces, so the result is sparse.
///
/// The search starts from the single donor closest to b (lowest index on
/// ties). The fitted vector A w* is unique even when w* is not; with
/// TieBreak::nearest_uniform a second stage then returns the point of the
/// optimal face {w in simplex : A w = A w*} nearest to uniform weights, found
/// by semismooth Newton on the (k+1)-dimensional dual
///
///   min_y  1/2 ||(B' y)_+||^2 - c' y,   B = [A_F; 1'],  c = [A w*; 1],
///
/// started at the y that maps to uniform weights, with primal w = (B' y)_+.
/// The second stage is skipped when the support is the whole optimal face and
/// its columns are affinely independent (unique minimizer).
template <typename Scalar>
class SimplexLeastSquares {
 public:
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  explicit SimplexLeastSquares(SolverConfig config = {}) : config_(config) { config_.validate(); }

  template <typename DerivedA, typename DerivedB>
  SimplexLeastSquares& compute(const Eigen::MatrixBase<DerivedA>& design,
                               const Eigen::MatrixBase<DerivedB>& target) {
    A_ = design;
    b_ = target;
    iterations_ = 0;
    info_ = Eigen::Success;
    if (A_.cols() == 0 || A_.rows() != b_.size() || !all_finite(A_) || !all_finite(b_)) {
      info_ = Eigen::InvalidInput;
      w_.resize(0);
      return *this;
    }
    run();
    return *this;
  }

  const VectorType& weights() const noexcept { return w_; }
  /// Squared residual norm at weights().
  Scalar objective() const noexcept { return f_; }
  /// Frank-Wolfe gap at weights(): grad.w - min_j grad_j.
  Scalar gap() const noexcept { return gap_; }
  Index iterations() const noexcept { return iterations_; }
  Eigen::ComputationInfo info() const noexcept { return info_; }

  /// Frank-Wolfe gap of an arbitrary simplex point for ||b - A w||^2.
  template <typename DerivedA, typename DerivedB, typename DerivedW>
  static Scalar duality_gap(const Eigen::MatrixBase<DerivedA>& A, const Eigen::MatrixBase<DerivedB>& b,
                            const Eigen::MatrixBase<DerivedW>& w) {
    const VectorType grad = Scalar(-2) * A.transpose() * (b - A * w);
    return grad.dot(w) - grad.minCoeff();
  }

 private:
  void refresh() {
    residual_ = b_ - A_ * w_;
    f_ = residual_.squaredNorm();
    grad_ = Scalar(-2) * A_.transpose() * residual_;
  }

  // Minimizer of ||b - A_S z|| subject to sum(z) = 1 on the current support,
  // through the substitution z_0 = 1 - sum(y), which leaves an unconstrained
  // least-squares problem in y. Rank-deficient systems get the minimum-norm y.
  VectorType solve_on_support() const {
    const Index m = static_cast<Index>(support_.size());
    VectorType z(m);
    if (m == 1) {
      z(0) = Scalar(1);
      return z;
    }
    const auto ref = A_.col(support_[0]);
    MatrixType D(A_.rows(), m - 1);
    for (Index i = 1; i < m; ++i) D.col(i - 1) = A_.col(support_[static_cast<std::size_t>(i)]) - ref;
    const VectorType c = b_ - ref;
    const VectorType y = Eigen::CompleteOrthogonalDecomposition<MatrixType>(D).solve(c);
    z(0) = Scalar(1) - y.sum();
    z.tail(m - 1) = y;
    return z;
  }

  void run() {
    const Index J = A_.cols();
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();

    Index start = 0;
    (A_.colwise() - b_).colwise().squaredNorm().minCoeff(&start);
    w_.setZero(J);
    w_(start) = Scalar(1);
    support_.assign(1, start);
    in_support_.assign(static_cast<std::size_t>(J), false);
    in_support_[static_cast<std::size_t>(start)] = true;
    refresh();

    bool converged = false;
    while (true) {
      const Scalar mu = grad_.dot(w_);
      gap_ = mu - grad_.minCoeff();
      if (gap_ <= Scalar(config_.tolerance) * (Scalar(1) + f_) ||
          static_cast<Index>(support_.size()) == J) {
        converged = gap_ <= Scalar(config_.certificate) * (Scalar(1) + f_) ||
                    static_cast<Index>(support_.size()) == J;
        break;
      }
      Index entering = -1;
      for (Index j = 0; j < J; ++j) {
        if (in_support_[static_cast<std::size_t>(j)]) continue;
        if (entering < 0 || grad_(j) < grad_(entering)) entering = j;
      }
      if (entering < 0 || grad_(entering) >= mu) {
        // Only support coordinates have a negative reduced gradient, which
        // means the support solve is inexact; nothing left to add.
        converged = gap_ <= Scalar(config_.certificate) * (Scalar(1) + f_);
        break;
      }

      const Scalar f_before = f_;
      const VectorType w_before = w_;
      support_.push_back(entering);
      in_support_[static_cast<std::size_t>(entering)] = true;

      bool out_of_budget = false;
      while (true) {
        if (++iterations_ > config_.max_iterations) {
          out_of_budget = true;
          break;
        }
        const VectorType z = solve_on_support();
        if ((z.array() > Scalar(0)).all()) {
          for (std::size_t i = 0; i < support_.size(); ++i) w_(support_[i]) = z(static_cast<Index>(i));
          break;
        }
        Scalar step = Scalar(1);
        std::size_t blocking = support_.size();
        for (std::size_t i = 0; i < support_.size(); ++i) {
          const Scalar zi = z(static_cast<Index>(i));
          if (zi > Scalar(0)) continue;
          const Scalar wi = w_(support_[i]);
          const Scalar ratio = wi > Scalar(0) ? wi / (wi - zi) : Scalar(0);
          if (blocking == support_.size() || ratio < step) {
            step = ratio;
            blocking = i;
          }
        }
        for (std::size_t i = 0; i < support_.size(); ++i) {
          const Index j = support_[i];
          w_(j) += step * (z(static_cast<Index>(i)) - w_(j));
        }
        w_(support_[blocking]) = Scalar(0);
        std::vector<Index> kept;
        for (Index j : support_) {
          if (w_(j) > Scalar(0)) {
            kept.push_back(j);
          } else {
            w_(j) = Scalar(0);
            in_support_[static_cast<std::size_t>(j)] = false;
          }
        }
        support_ = std::move(kept);
        w_ /= w_.sum();
      }

      refresh();
      if (out_of_budget) break;
      if (!(f_ < f_before - Scalar(64) * eps * (Scalar(1) + f_before))) {
        // No progress at machine precision; keep the better of the two points.
        if (f_ > f_before) {
          w_ = w_before;
          rebuild_support();
          refresh();
        }
        const Scalar mu_now = grad_.dot(w_);
        gap_ = mu_now - grad_.minCoeff();
        converged = gap_ <= Scalar(config_.certificate) * (Scalar(1) + f_);
        break;
      }
    }

    if (converged && config_.tie_break == TieBreak::nearest_uniform) select_nearest_uniform();

    if (config_.zero_clip > 0.0) {
      bool clipped = false;
      for (Index j = 0; j < J; ++j) {
        if (w_(j) != Scalar(0) && w_(j) < Scalar(config_.zero_clip)) {
          w_(j) = Scalar(0);
          clipped = true;
        }
      }
      if (clipped) w_ /= w_.sum();
    }
    rebuild_support();
    refresh();
    gap_ = grad_.dot(w_) - grad_.minCoeff();
    info_ = converged ? Eigen::Success : Eigen::NoConvergence;
  }

  bool affinely_independent(const std::vector<Index>& cols) const {
    if (cols.size() <= 1) return true;
    MatrixType D(A_.rows(), static_cast<Index>(cols.size()) - 1);
    for (std::size_t i = 1; i < cols.size(); ++i) D.col(static_cast<Index>(i) - 1) = A_.col(cols[i]) - A_.col(cols[0]);
    return Eigen::CompleteOrthogonalDecomposition<MatrixType>(D).rank() == D.cols();
  }

  void select_nearest_uniform() {
    const Index J = A_.cols();
    const Scalar eps = std::numeric_limits<Scalar>::epsilon();
    const Scalar g_min = grad_.minCoeff();
    const Scalar face_tol = std::sqrt(eps) * std::max(Scalar(1), grad_.cwiseAbs().maxCoeff());
    std::vector<Index> face;
    for (Index j = 0; j < J; ++j) {
      if (grad_(j) <= g_min + face_tol || w_(j) > Scalar(0)) face.push_back(j);
    }
    if (face.size() == support_.size() && affinely_independent(support_)) return;

    const Index k = A_.rows();
    const Index m = static_cast<Index>(face.size());
    MatrixType B(k + 1, m);
    for (Index i = 0; i < m; ++i) {
      B.col(i).head(k) = A_.col(face[static_cast<std::size_t>(i)]);
      B(k, i) = Scalar(1);
    }
    VectorType c(k + 1);
    c.head(k) = A_ * w_;
    c(k) = Scalar(1);

    const Scalar stop = Scalar(1e3) * eps * (Scalar(1) + c.cwiseAbs().maxCoeff());
    VectorType y = VectorType::Zero(k + 1);
    y(k) = Scalar(1) / Scalar(m);
    auto dual = [&](const VectorType& yy) {
      return Scalar(0.5) * (B.transpose() * yy).cwiseMax(Scalar(0)).squaredNorm() - c.dot(yy);
    };
    bool solved = false;
    for (int it = 0; it < 200; ++it) {
      const VectorType s = B.transpose() * y;
      const VectorType w = s.cwiseMax(Scalar(0));
      const VectorType g = B * w - c;
      if (g.template lpNorm<Eigen::Infinity>() <= stop) {
        solved = true;
        break;
      }
      MatrixType H = MatrixType::Zero(k + 1, k + 1);
      for (Index i = 0; i < m; ++i) {
        if (s(i) > Scalar(0)) H.noalias() += B.col(i) * B.col(i).transpose();
      }
      VectorType d = Eigen::CompleteOrthogonalDecomposition<MatrixType>(H).solve(-g);
      if (!(g.dot(d) < Scalar(0))) d = -g;
      const Scalar phi = dual(y);
      Scalar t = Scalar(1);
      int halvings = 0;
      while (dual(y + t * d) > phi + Scalar(1e-4) * t * g.dot(d) && halvings < 60) {
        t *= Scalar(0.5);
        ++halvings;
      }
      if (halvings == 60) break;
      y += t * d;
    }
    if (!solved) return;

    VectorType candidate = VectorType::Zero(J);
    const VectorType w_face = (B.transpose() * y).cwiseMax(Scalar(0));
    for (Index i = 0; i < m; ++i) candidate(face[static_cast<std::size_t>(i)]) = w_face(i);
    const Scalar total = candidate.sum();
    if (!(total > Scalar(0))) return;
    candidate /= total;
    const Scalar f_candidate = (b_ - A_ * candidate).squaredNorm();
    if (f_candidate <= f_ + Scalar(config_.tolerance) * (Scalar(1) + f_)) {
      w_ = candidate;
      rebuild_support();
      refresh();
    }
  }

  void rebuild_support() {
    support_.clear();
    std::fill(in_support_.begin(), in_support_.end(), false);
    for (Index j = 0; j < w_.size(); ++j) {
      if (w_(j) > Scalar(0)) {
        support_.push_back(j);
        in_support_[static_cast<std::size_t>(j)] = true;
      }
    }
  }

  SolverConfig config_;
  MatrixType A_;
  VectorType b_;
  VectorType w_;
  VectorType residual_;
  VectorType grad_;
  Scalar f_{};
  Scalar gap_{};
  Index iterations_ = 0;
  Eigen::ComputationInfo info_ = Eigen::Success;
  std::vector<Index> support_;
  std::vector<bool> in_support_;
};

namespace detail {

template <typename Scalar>
Vector<Scalar> sqrt_weights(const PredictorSet<Scalar>& p) {
  return p.v.array().sqrt().matrix();
}

}  // namespace detail

/// Simplex-constrained weights minimizing the v-weighted distance between
/// X_1 and X_0 W.
template <typename Scalar>
WeightVector<Scalar> solve_simplex_ls(const PredictorSet<Scalar>& predictors,
                                      const SolverConfig& config = {}) {
  predictors.validate();
  if (!all_finite(predictors.x0) || !all_finite(predictors.x1) || !all_finite(predictors.v)) {
    throw NumericInputError("predictor set contains non-finite values");
  }
  const Vector<Scalar> s = detail::sqrt_weights(predictors);
  SimplexLeastSquares<Scalar> solver(config);
  solver.compute(s.asDiagonal() * predictors.x0, s.asDiagonal() * predictors.x1);
  if (solver.info() == Eigen::InvalidInput) {
    throw NumericInputError("simplex solver rejected its input");
  }
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("simplex solver did not converge (gap " +
                               std::to_string(static_cast<double>(solver.gap())) + ")",
                           solver.weights().template cast<double>(),
                           static_cast<double>(solver.gap()));
  }
  return WeightVector<Scalar>{solver.weights(), std::nullopt, true};
}

/// sqrt(sum_h v_h (X_1h - (X_0 w)_h)^2).
template <typename Scalar>
Scalar objective_value(const PredictorSet<Scalar>& predictors, const WeightVector<Scalar>& weights) {
  if (weights.w.size() != predictors.x0.cols() || predictors.x1.size() != predictors.x0.rows() ||
      predictors.v.size() != predictors.x1.size()) {
    throw InvalidSpecification("objective_value: dimension mismatch");
  }
  const Vector<Scalar> r = predictors.x1 - predictors.x0 * weights.w;
  return std::sqrt((predictors.v.array() * r.array().square()).sum());
}

/// max_j grad f(w) . (w - e_j) for f(w) = sum_h v_h (X_1h - (X_0 w)_h)^2.
template <typename Scalar>
Scalar frank_wolfe_gap(const PredictorSet<Scalar>& predictors, const WeightVector<Scalar>& weights) {
  const Vector<Scalar> s = detail::sqrt_weights(predictors);
  const Matrix<Scalar> A = s.asDiagonal() * predictors.x0;
  const Vector<Scalar> b = s.asDiagonal() * predictors.x1;
  return SimplexLeastSquares<Scalar>::duality_gap(A, b, weights.w);
}

}  // namespace synthctl
