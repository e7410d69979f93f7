#pragma once

#include "synthctl/core.hpp"
#include "synthctl/estimators.hpp"
#include "synthctl/panel.hpp"

#include <vector>

namespace synthctl {

template <typename Scalar>
Scalar pre_rmse(const Panel<Scalar>& panel, const EstimationResult<Scalar>& result) {
  return window_rmse<Scalar>(result.effect, 0, panel.t0());
}

template <typename Scalar>
Scalar post_rmse(const Panel<Scalar>& panel, const EstimationResult<Scalar>& result) {
  return window_rmse<Scalar>(result.effect, panel.t0(), panel.periods());
}

/// Out-of-sample check with an artificially early treatment date. Weights are
/// fitted on t <= t0_backdated only; t0_backdated+1..t0 is the hold-out
/// window, t0+1..T the real post-treatment window.
template <typename Scalar>
struct BackdateReport {
  Index t0_backdated = 0;
  Index t0 = 0;
  WeightVector<Scalar> weights_backdated;
  std::vector<Index> donor_ids;
  Scalar fit_rmse{};      // t = 1..t0_backdated
  Scalar holdout_rmse{};  // t = t0_backdated+1..t0
  Scalar pre_rmse{};      // t = 1..t0
  Scalar post_rmse{};     // t = t0+1..T
  Vector<Scalar> counterfactual;
  Vector<Scalar> effect_path;
};

template <typename Scalar>
BackdateReport<Scalar> backdate(const Panel<Scalar>& panel, const Matrix<Scalar>* covariates,
                                const EstimatorSpec& spec, Index t0_backdated) {
  if (t0_backdated < 1 || t0_backdated >= panel.t0()) {
    throw InvalidSpecification("backdated t0 must satisfy 1 <= t0b < t0 (t0b=" + std::to_string(t0_backdated) +
                               ", t0=" + std::to_string(panel.t0()) + ")");
  }
  const Panel<Scalar> early = panel.with_t0(t0_backdated);
  EstimationResult<Scalar> fit = estimate(early, covariates, spec);

  BackdateReport<Scalar> out;
  out.t0_backdated = t0_backdated;
  out.t0 = panel.t0();
  out.fit_rmse = window_rmse<Scalar>(fit.effect, 0, t0_backdated);
  out.holdout_rmse = window_rmse<Scalar>(fit.effect, t0_backdated, panel.t0());
  out.pre_rmse = window_rmse<Scalar>(fit.effect, 0, panel.t0());
  out.post_rmse = window_rmse<Scalar>(fit.effect, panel.t0(), panel.periods());
  out.weights_backdated = std::move(fit.weights);
  out.donor_ids = std::move(fit.donor_ids);
  out.counterfactual = std::move(fit.counterfactual);
  out.effect_path = std::move(fit.effect);
  return out;
}

template <typename Scalar>
BackdateReport<Scalar> backdate(const Panel<Scalar>& panel, const EstimatorSpec& spec, Index t0_backdated) {
  return backdate<Scalar>(panel, static_cast<const Matrix<Scalar>*>(nullptr), spec, t0_backdated);
}

}  // namespace synthctl
