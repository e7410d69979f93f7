#pragma once

#include "synthctl/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synthctl {

/// Balanced outcome panel. Row 0 is the treated unit, rows 1..J are donors,
/// columns are periods 1..T. The first t0 columns are pre-treatment.
///
/// unit_ids() maps each row back to the unit's position in the originating
/// panel (0-based), so donor identity survives trimming and reordering.
template <typename Scalar>
class Panel {
 public:
  using MatrixType = Matrix<Scalar>;

  Panel(MatrixType outcomes, Index t0, std::vector<std::string> unit_labels = {},
        std::vector<Index> unit_ids = {}, std::vector<long> period_labels = {})
      : outcomes_(std::move(outcomes)),
        t0_(t0),
        labels_(std::move(unit_labels)),
        ids_(std::move(unit_ids)),
        period_labels_(std::move(period_labels)) {
    if (outcomes_.rows() < 2) {
      throw InvalidSpecification("panel needs a treated unit and at least one donor");
    }
    if (t0_ < 1 || t0_ >= outcomes_.cols()) {
      throw InvalidSpecification("panel t0 must satisfy 1 <= t0 < T (t0=" + std::to_string(t0_) +
                                 ", T=" + std::to_string(outcomes_.cols()) + ")");
    }
    if (!all_finite(outcomes_)) {
      throw NumericInputError("panel outcomes contain non-finite values");
    }
    if (labels_.empty()) {
      for (Index i = 0; i < outcomes_.rows(); ++i) labels_.push_back(std::to_string(i + 1));
    }
    if (ids_.empty()) {
      for (Index i = 0; i < outcomes_.rows(); ++i) ids_.push_back(i);
    }
    if (period_labels_.empty()) {
      for (Index t = 0; t < outcomes_.cols(); ++t) period_labels_.push_back(static_cast<long>(t + 1));
    }
    if (static_cast<Index>(labels_.size()) != outcomes_.rows() ||
        static_cast<Index>(ids_.size()) != outcomes_.rows()) {
      throw InvalidSpecification("unit label/id count does not match panel rows");
    }
    if (static_cast<Index>(period_labels_.size()) != outcomes_.cols()) {
      throw InvalidSpecification("period label count does not match panel columns");
    }
  }

  const MatrixType& outcomes() const noexcept { return outcomes_; }
  Index t0() const noexcept { return t0_; }
  Index periods() const noexcept { return outcomes_.cols(); }
  Index units() const noexcept { return outcomes_.rows(); }
  Index donors() const noexcept { return outcomes_.rows() - 1; }

  auto treated() const { return outcomes_.row(0); }
  auto donor_outcomes() const { return outcomes_.bottomRows(donors()); }

  const std::vector<std::string>& unit_labels() const noexcept { return labels_; }
  const std::vector<Index>& unit_ids() const noexcept { return ids_; }
  const std::vector<long>& period_labels() const noexcept { return period_labels_; }

  Panel with_t0(Index t0) const { return Panel(outcomes_, t0, labels_, ids_, period_labels_); }

  Panel with_outcomes(MatrixType outcomes) const {
    return Panel(std::move(outcomes), t0_, labels_, ids_, period_labels_);
  }

  /// Treated unit plus the donors at the given 0-based donor positions, in
  /// the given order.
  Panel select_donors(std::span<const Index> donor_positions) const {
    MatrixType out(static_cast<Index>(donor_positions.size()) + 1, periods());
    std::vector<std::string> labels{labels_[0]};
    std::vector<Index> ids{ids_[0]};
    out.row(0) = outcomes_.row(0);
    for (std::size_t i = 0; i < donor_positions.size(); ++i) {
      const Index row = donor_positions[i] + 1;
      if (row < 1 || row > donors()) throw InvalidSpecification("donor position out of range");
      out.row(static_cast<Index>(i) + 1) = outcomes_.row(row);
      labels.push_back(labels_[static_cast<std::size_t>(row)]);
      ids.push_back(ids_[static_cast<std::size_t>(row)]);
    }
    return Panel(std::move(out), t0_, std::move(labels), std::move(ids), period_labels_);
  }

 private:
  MatrixType outcomes_;
  Index t0_;
  std::vector<std::string> labels_;
  std::vector<Index> ids_;
  std::vector<long> period_labels_;
};

enum class PredictorWeighting { inverse_variance, unit };

/// Which pre-treatment periods and covariate columns enter the predictor
/// vectors X_j.
struct PredictorSpec {
  std::vector<Index> periods;            // 1-based; empty selects 1..t0
  std::vector<Index> covariate_columns;  // 0-based columns of the covariate matrix
  PredictorWeighting weighting = PredictorWeighting::inverse_variance;
};

template <typename Scalar>
struct PredictorSet {
  Vector<Scalar> x1;  // k
  Matrix<Scalar> x0;  // k x J
  Vector<Scalar> v;   // k, nonnegative
  std::vector<std::string> labels;
  std::vector<Index> periods;  // resolved 1-based outcome periods, in row order
  Index covariate_rows = 0;    // trailing rows that come from covariates
  PredictorSpec spec;

  Index size() const noexcept { return x1.size(); }
  Index donors() const noexcept { return x0.cols(); }
  bool outcome_only() const noexcept { return covariate_rows == 0; }

  void validate() const {
    if (x0.rows() != x1.size() || v.size() != x1.size()) {
      throw InvalidSpecification("predictor dimensions disagree");
    }
    if (x1.size() == 0) throw InvalidSpecification("predictor set is empty");
    if ((v.array() < Scalar(0)).any() || !(v.array() > Scalar(0)).any()) {
      throw InvalidSpecification("predictor weights must be nonnegative with one positive entry");
    }
  }

  /// Keep only the given donor columns.
  PredictorSet select_donors(std::span<const Index> donor_positions) const {
    PredictorSet out = *this;
    out.x0.resize(x0.rows(), static_cast<Index>(donor_positions.size()));
    for (std::size_t i = 0; i < donor_positions.size(); ++i) {
      out.x0.col(static_cast<Index>(i)) = x0.col(donor_positions[i]);
    }
    return out;
  }
};

template <typename Scalar>
struct WeightVector {
  Vector<Scalar> w;
  std::optional<Scalar> intercept;
  bool constrained = true;

  static constexpr double kFeasibilityTolerance = 1e-8;

  bool feasible() const {
    if (!constrained) return true;
    if (w.size() == 0) return false;
    const double total = static_cast<double>(w.sum());
    return (w.array() >= Scalar(-kFeasibilityTolerance)).all() &&
           std::abs(total - 1.0) <= kFeasibilityTolerance;
  }
};

template <typename Scalar>
struct EstimationResult {
  WeightVector<Scalar> weights;
  Vector<Scalar> counterfactual;  // T
  Vector<Scalar> effect;          // T, observed treated minus counterfactual
  Scalar pre_rmse{};
  Scalar post_rmse{};
  std::vector<Index> donor_ids;  // weight position -> original unit index (0-based)
};

/// Root mean square of effect[begin..end).
template <typename Scalar>
Scalar window_rmse(const Vector<Scalar>& effect, Index begin, Index end) {
  if (begin < 0 || end > effect.size() || end <= begin) {
    throw InvalidSpecification("empty or out-of-range RMSE window");
  }
  return std::sqrt(effect.segment(begin, end - begin).squaredNorm() / Scalar(end - begin));
}

namespace detail {

template <typename Scalar>
Scalar donor_sample_variance(const Eigen::Ref<const Vector<Scalar>>& row) {
  const Index n = row.size();
  if (n < 2) return Scalar(0);
  const Scalar mean = row.mean();
  return (row.array() - mean).square().sum() / Scalar(n - 1);
}

}  // namespace detail

/// Stack the selected pre-treatment outcomes, then the selected covariates,
/// into X_1 (treated) and X_0 (donors). Predictor weights follow
/// spec.weighting: inverse sample variance across donors (1 for rows with
/// zero variance) or all ones.
template <typename Scalar>
PredictorSet<Scalar> build_predictors(const Panel<Scalar>& panel, const Matrix<Scalar>* covariates,
                                      const PredictorSpec& spec) {
  std::vector<Index> periods = spec.periods;
  if (periods.empty()) {
    for (Index t = 1; t <= panel.t0(); ++t) periods.push_back(t);
  }
  for (Index t : periods) {
    if (t < 1 || t > panel.t0()) {
      throw InvalidSpecification("predictor period " + std::to_string(t) +
                                 " is outside the pre-treatment window 1.." +
                                 std::to_string(panel.t0()));
    }
  }
  if (!spec.covariate_columns.empty()) {
    if (covariates == nullptr) {
      throw InvalidSpecification("predictor spec selects covariates but none were supplied");
    }
    if (covariates->rows() != panel.units()) {
      throw InvalidSpecification("covariate row count does not match panel units");
    }
    if (!all_finite(*covariates)) throw NumericInputError("covariates contain non-finite values");
    for (Index c : spec.covariate_columns) {
      if (c < 0 || c >= covariates->cols()) {
        throw InvalidSpecification("covariate column " + std::to_string(c + 1) + " does not exist");
      }
    }
  }

  const Index n_periods = static_cast<Index>(periods.size());
  const Index n_cov = static_cast<Index>(spec.covariate_columns.size());
  const Index k = n_periods + n_cov;
  const Index J = panel.donors();

  PredictorSet<Scalar> out;
  out.x1.resize(k);
  out.x0.resize(k, J);
  out.v.setOnes(k);
  out.periods = periods;
  out.covariate_rows = n_cov;
  out.spec = spec;

  for (Index h = 0; h < n_periods; ++h) {
    const Index col = periods[static_cast<std::size_t>(h)] - 1;
    out.x1(h) = panel.outcomes()(0, col);
    out.x0.row(h) = panel.donor_outcomes().col(col).transpose();
    out.labels.push_back("Y_pre_t" + std::to_string(periods[static_cast<std::size_t>(h)]));
  }
  for (Index c = 0; c < n_cov; ++c) {
    const Index col = spec.covariate_columns[static_cast<std::size_t>(c)];
    out.x1(n_periods + c) = (*covariates)(0, col);
    out.x0.row(n_periods + c) = covariates->col(col).tail(J).transpose();
    out.labels.push_back("Z_" + std::to_string(col + 1));
  }

  if (spec.weighting == PredictorWeighting::inverse_variance) {
    for (Index h = 0; h < k; ++h) {
      const Vector<Scalar> row = out.x0.row(h).transpose();
      const Scalar var = detail::donor_sample_variance<Scalar>(row);
      out.v(h) = var > Scalar(0) ? Scalar(1) / var : Scalar(1);
    }
  }
  return out;
}

template <typename Scalar>
PredictorSet<Scalar> build_predictors(const Panel<Scalar>& panel, const PredictorSpec& spec = {}) {
  return build_predictors<Scalar>(panel, nullptr, spec);
}

template <typename Scalar>
PredictorSet<Scalar> build_predictors(const Panel<Scalar>& panel, const Matrix<Scalar>& covariates,
                                      const PredictorSpec& spec) {
  return build_predictors<Scalar>(panel, &covariates, spec);
}

}  // namespace synthctl
