#pragma once

#include "synthctl/core.hpp"
#include "synthctl/panel.hpp"
#include "synthctl/simplex_solver.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace synthctl {

enum class EstimatorKind { standard, constant_shift, unrestricted };

/// Donor-pool trimming by Euclidean distance to the treated unit in predictor
/// space. Set exactly one of keep_count / keep_fraction.
struct TrimSpec {
  std::optional<Index> keep_count;
  std::optional<double> keep_fraction;

  Index resolve(Index donors) const {
    Index keep = 0;
    if (keep_count && !keep_fraction) {
      keep = *keep_count;
    } else if (keep_fraction && !keep_count) {
      if (!(*keep_fraction > 0.0 && *keep_fraction <= 1.0)) {
        throw InvalidSpecification("trim keep_fraction must be in (0, 1]");
      }
      keep = std::max<Index>(1, static_cast<Index>(std::lround(*keep_fraction * static_cast<double>(donors))));
    } else {
      throw InvalidSpecification("trim spec needs exactly one of keep_count or keep_fraction");
    }
    if (keep < 1 || keep > donors) {
      throw InvalidSpecification("trim keep_count " + std::to_string(keep) + " outside 1.." +
                                 std::to_string(donors));
    }
    return keep;
  }
};

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::standard;
  std::optional<TrimSpec> trim;
  PredictorSpec predictor_spec;
  SolverConfig solver;
};

namespace detail {

template <typename Scalar>
EstimationResult<Scalar> finish_result(const Panel<Scalar>& panel, WeightVector<Scalar> weights) {
  EstimationResult<Scalar> out;
  out.counterfactual = panel.donor_outcomes().transpose() * weights.w;
  if (weights.intercept) out.counterfactual.array() += *weights.intercept;
  out.effect = panel.treated().transpose() - out.counterfactual;
  out.pre_rmse = window_rmse<Scalar>(out.effect, 0, panel.t0());
  out.post_rmse = window_rmse<Scalar>(out.effect, panel.t0(), panel.periods());
  out.donor_ids.assign(panel.unit_ids().begin() + 1, panel.unit_ids().end());
  out.weights = std::move(weights);
  return out;
}

template <typename Scalar>
void check_consistent(const Panel<Scalar>& panel, const PredictorSet<Scalar>& predictors) {
  if (predictors.donors() != panel.donors()) {
    throw InvalidSpecification("predictor set has " + std::to_string(predictors.donors()) +
                               " donors, panel has " + std::to_string(panel.donors()));
  }
}

template <typename Scalar>
void require_outcome_only(const PredictorSet<Scalar>& predictors, const char* who) {
  if (!predictors.outcome_only()) {
    throw InvalidSpecification(std::string(who) + " is defined on pre-treatment outcomes only");
  }
}

}  // namespace detail

/// Per-unit mean of outcomes over t = 1..t0.
template <typename Scalar>
Vector<Scalar> pre_treatment_means(const Panel<Scalar>& panel) {
  return panel.outcomes().leftCols(panel.t0()).rowwise().mean();
}

/// Each unit's series minus its own pre-treatment mean.
template <typename Scalar>
Panel<Scalar> demean_panel(const Panel<Scalar>& panel) {
  const Vector<Scalar> means = pre_treatment_means(panel);
  return panel.with_outcomes(panel.outcomes().colwise() - means);
}

template <typename Scalar>
EstimationResult<Scalar> estimate_standard(const Panel<Scalar>& panel, const PredictorSet<Scalar>& predictors,
                                           const SolverConfig& solver = {}) {
  detail::check_consistent(panel, predictors);
  return detail::finish_result(panel, solve_simplex_ls(predictors, solver));
}

/// Synthetic control with an additive intercept. Weights come from the
/// standard problem on pre-treatment-demeaned outcomes (same predictor rows
/// and predictor weights); the intercept is the treated pre-mean minus the
/// weighted donor pre-means.
template <typename Scalar>
EstimationResult<Scalar> estimate_constant_shift(const Panel<Scalar>& panel,
                                                 const PredictorSet<Scalar>& predictors,
                                                 const SolverConfig& solver = {}) {
  detail::check_consistent(panel, predictors);
  detail::require_outcome_only(predictors, "the constant-shift estimator");
  const Vector<Scalar> means = pre_treatment_means(panel);
  const Panel<Scalar> demeaned = demean_panel(panel);
  PredictorSpec spec = predictors.spec;
  spec.periods = predictors.periods;
  PredictorSet<Scalar> centered = build_predictors(demeaned, spec);
  centered.v = predictors.v;

  WeightVector<Scalar> weights = solve_simplex_ls(centered, solver);
  weights.intercept = means(0) - means.tail(panel.donors()).dot(weights.w);
  return detail::finish_result(panel, std::move(weights));
}

/// Least squares of the treated predictor rows on donor rows plus an
/// intercept, without sign or adding-up restrictions. Underdetermined systems
/// (J + 1 > k) return the minimum-norm (intercept, weights) solution, which
/// reproduces the pre-treatment path exactly.
template <typename Scalar>
EstimationResult<Scalar> estimate_unrestricted(const Panel<Scalar>& panel, const PredictorSet<Scalar>& predictors) {
  detail::check_consistent(panel, predictors);
  detail::require_outcome_only(predictors, "unrestricted regression");
  predictors.validate();
  if (!all_finite(predictors.x0) || !all_finite(predictors.x1)) {
    throw NumericInputError("predictor set contains non-finite values");
  }
  const Index k = predictors.size();
  const Index J = predictors.donors();
  const Vector<Scalar> s = detail::sqrt_weights(predictors);
  Matrix<Scalar> design(k, J + 1);
  design.col(0) = s;
  design.rightCols(J) = s.asDiagonal() * predictors.x0;
  const Vector<Scalar> target = s.asDiagonal() * predictors.x1;
  const Vector<Scalar> coef = Eigen::CompleteOrthogonalDecomposition<Matrix<Scalar>>(design).solve(target);

  WeightVector<Scalar> weights{coef.tail(J), coef(0), false};
  return detail::finish_result(panel, std::move(weights));
}

template <typename Scalar>
struct TrimmedPool {
  Panel<Scalar> panel;
  PredictorSet<Scalar> predictors;
};

/// Euclidean distance from X_1 to every donor column of X_0.
template <typename Scalar>
Vector<Scalar> predictor_distances(const PredictorSet<Scalar>& predictors) {
  return (predictors.x0.colwise() - predictors.x1).colwise().norm().transpose();
}

/// Keep the donors nearest to the treated unit in predictor space. Ties are
/// broken by donor position; survivors keep their original relative order.
template <typename Scalar>
TrimmedPool<Scalar> trim_donor_pool(const Panel<Scalar>& panel, const PredictorSet<Scalar>& predictors,
                                    const TrimSpec& trim) {
  detail::check_consistent(panel, predictors);
  const Index J = panel.donors();
  const Index keep = trim.resolve(J);
  const Vector<Scalar> dist = predictor_distances(predictors);

  std::vector<Index> order(static_cast<std::size_t>(J));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist(a) < dist(b); });
  order.resize(static_cast<std::size_t>(keep));
  std::sort(order.begin(), order.end());

  return {panel.select_donors(order), predictors.select_donors(order)};
}

/// Run the estimator named by spec.kind on prepared predictors.
template <typename Scalar>
EstimationResult<Scalar> estimate(const Panel<Scalar>& panel, const PredictorSet<Scalar>& predictors,
                                  const EstimatorSpec& spec) {
  switch (spec.kind) {
    case EstimatorKind::standard:
      return estimate_standard(panel, predictors, spec.solver);
    case EstimatorKind::constant_shift:
      return estimate_constant_shift(panel, predictors, spec.solver);
    case EstimatorKind::unrestricted:
      return estimate_unrestricted(panel, predictors);
  }
  throw InvalidSpecification("unknown estimator kind");
}

/// Full estimator pipeline: predictors, optional trimming, then the chosen
/// estimator.
template <typename Scalar>
EstimationResult<Scalar> estimate(const Panel<Scalar>& panel, const Matrix<Scalar>* covariates,
                                  const EstimatorSpec& spec) {
  PredictorSet<Scalar> predictors = build_predictors(panel, covariates, spec.predictor_spec);
  if (spec.trim) {
    TrimmedPool<Scalar> pool = trim_donor_pool(panel, predictors, *spec.trim);
    return estimate(pool.panel, pool.predictors, spec);
  }
  return estimate(panel, predictors, spec);
}

template <typename Scalar>
EstimationResult<Scalar> estimate(const Panel<Scalar>& panel, const EstimatorSpec& spec) {
  return estimate<Scalar>(panel, static_cast<const Matrix<Scalar>*>(nullptr), spec);
}

}  // namespace synthctl
