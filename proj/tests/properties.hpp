#pragma once

// Randomized property checks shared by the unit tests and the acceptance
// runner. Each returns ok plus a one-line summary of what was checked.

#include "oracles.hpp"

#include "synthctl/estimators.hpp"
#include "synthctl/evaluation.hpp"
#include "synthctl/montecarlo.hpp"
#include "synthctl/rng.hpp"

#include <sstream>
#include <string>

namespace props {

using namespace synthctl;

struct Outcome {
  bool ok = true;
  std::string detail;
};

inline Eigen::MatrixXd gaussian(RandomStream& rng, Index rows, Index cols, double sd = 1.0) {
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) m(i, j) = sd * rng.normal();
  }
  return m;
}

inline PredictorSet<double> make_predictors(Eigen::VectorXd x1, Eigen::MatrixXd x0, Eigen::VectorXd v = {}) {
  PredictorSet<double> p;
  p.x1 = std::move(x1);
  p.x0 = std::move(x0);
  p.v = v.size() ? std::move(v) : Eigen::VectorXd::Ones(p.x1.size());
  for (Index h = 0; h < p.x1.size(); ++h) p.labels.push_back("x" + std::to_string(h + 1));
  return p;
}

inline Index nonzeros(const Eigen::VectorXd& w, double clip) { return (w.array() > clip).count(); }

/// Duality-gap certificate on random instances of assorted shapes.
inline Outcome certificate(int instances = 1000, std::uint64_t seed = 11) {
  Outcome out;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    RandomStream rng(seed, fnv1a64("certificate"), static_cast<std::uint64_t>(i));
    const Index k = 1 + static_cast<Index>(rng.next_u32() % 30);
    const Index J = 1 + static_cast<Index>(rng.next_u32() % 60);
    const double spread = (i % 3 == 0) ? 3.0 : 1.0;
    PredictorSet<double> p = make_predictors(gaussian(rng, k, 1, spread).col(0), gaussian(rng, k, J));
    if (i % 2 == 1) p.v = gaussian(rng, k, 1).cwiseAbs().col(0).array() + 0.1;
    const WeightVector<double> w = solve_simplex_ls(p);
    const double f = std::pow(objective_value(p, w), 2);
    const double rel = frank_wolfe_gap(p, w) / (1.0 + f);
    worst = std::max(worst, rel);
    if (!(rel <= 1e-6) || !w.feasible()) out.ok = false;
  }
  std::ostringstream s;
  s << instances << " instances, worst gap/(1+f) = " << worst;
  out.detail = s.str();
  return out;
}

/// Small instance (k <= 3, J <= 4) with X1 outside the donor hull, where the
/// minimizer is unique.
struct SmallInstance {
  PredictorSet<double> p;
  oracle::GridResult grid;
};

inline SmallInstance small_outside_instance(std::uint64_t seed, std::uint64_t index) {
  for (std::uint64_t attempt = 0;; ++attempt) {
    RandomStream rng(seed, fnv1a64("small-outside"), index * 1000 + attempt);
    const Index k = 1 + static_cast<Index>(rng.next_u32() % 3);
    const Index J = 2 + static_cast<Index>(rng.next_u32() % 3);
    Eigen::VectorXd x1 = gaussian(rng, k, 1, 2.0).col(0);
    Eigen::MatrixXd x0 = gaussian(rng, k, J);
    PredictorSet<double> p = make_predictors(x1, x0);
    oracle::GridResult g = oracle::simplex_grid(p.x1, p.x0, p.v);
    // Clearly outside the hull, and the optimal point is not nearly flat.
    if (g.objective > 0.05) return {std::move(p), std::move(g)};
  }
}

/// Solver against the exhaustive grid on small instances.
inline Outcome grid_agreement(int instances = 100, std::uint64_t seed = 12) {
  Outcome out;
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const SmallInstance inst = small_outside_instance(seed, static_cast<std::uint64_t>(i));
    const WeightVector<double> w = solve_simplex_ls(inst.p);
    const double d = (w.w - inst.grid.w).cwiseAbs().maxCoeff();
    worst = std::max(worst, d);
    if (d > 2e-3) out.ok = false;
    if (std::pow(objective_value(inst.p, w), 2) > inst.grid.objective + 1e-9) out.ok = false;
  }
  std::ostringstream s;
  s << instances << " instances, worst per-coordinate gap to grid = " << worst;
  out.detail = s.str();
  return out;
}

/// At most k positive weights whenever X1 lies outside the hull.
inline Outcome sparsity(int instances = 100, std::uint64_t seed = 13) {
  Outcome out;
  Index worst_excess = -1000;
  for (int i = 0; i < instances; ++i) {
    const SmallInstance inst = small_outside_instance(seed, static_cast<std::uint64_t>(i));
    const SolverConfig cfg;
    const WeightVector<double> w = solve_simplex_ls(inst.p, cfg);
    const Index excess = nonzeros(w.w, cfg.zero_clip) - inst.p.size();
    worst_excess = std::max(worst_excess, excess);
    if (excess > 0) out.ok = false;
  }
  // Larger instances, outside the hull by construction: X1 beyond every donor
  // along the first coordinate.
  for (int i = 0; i < instances; ++i) {
    RandomStream rng(seed, fnv1a64("sparsity-large"), static_cast<std::uint64_t>(i));
    const Index k = 2 + static_cast<Index>(rng.next_u32() % 6);
    const Index J = 10 + static_cast<Index>(rng.next_u32() % 40);
    Eigen::MatrixXd x0 = gaussian(rng, k, J);
    Eigen::VectorXd x1 = gaussian(rng, k, 1).col(0);
    x1(0) = x0.row(0).maxCoeff() + 1.0;
    const SolverConfig cfg;
    const WeightVector<double> w = solve_simplex_ls(make_predictors(x1, x0), cfg);
    const Index excess = nonzeros(w.w, cfg.zero_clip) - k;
    worst_excess = std::max(worst_excess, excess);
    if (excess > 0) out.ok = false;
  }
  std::ostringstream s;
  s << 2 * instances << " outside-hull instances, max(nonzeros - k) = " << worst_excess;
  out.detail = s.str();
  return out;
}

inline Panel<double> random_panel(RandomStream& rng, Index J, Index T, Index t0) {
  GroupedFactorConfig c;
  c.n_groups = std::max<Index>(1, (J + 1) / 2);
  c.units_per_group = 2;
  c.t_total = T;
  c.t0 = t0;
  c.sigma = 0.5;
  c.rho = 0.8;
  Panel<double> gen = gen_grouped_factor(c, {}, rng.next_u64(), 0);
  std::vector<Index> keep;
  for (Index j = 0; j < std::min(J, gen.donors()); ++j) keep.push_back(j);
  return gen.select_donors(keep);
}

/// constant-shift weights == standard weights on the demeaned panel, bitwise.
inline Outcome shift_equivalence(int instances = 200, std::uint64_t seed = 14) {
  Outcome out;
  int mismatches = 0;
  for (int i = 0; i < instances; ++i) {
    RandomStream rng(seed, fnv1a64("shift"), static_cast<std::uint64_t>(i));
    const Index J = 2 + static_cast<Index>(rng.next_u32() % 30);
    const Index t0 = 2 + static_cast<Index>(rng.next_u32() % 20);
    const Panel<double> panel = random_panel(rng, J, t0 + 5, t0);
    for (PredictorWeighting weighting : {PredictorWeighting::unit, PredictorWeighting::inverse_variance}) {
      PredictorSpec spec;
      spec.weighting = weighting;
      const auto shift = estimate_constant_shift(panel, build_predictors(panel, spec));
      const Panel<double> demeaned = demean_panel(panel);
      PredictorSet<double> centered = build_predictors(demeaned, spec);
      centered.v = build_predictors(panel, spec).v;
      const auto standard = estimate_standard(demeaned, centered);
      if (shift.weights.w != standard.weights.w) ++mismatches;
    }
  }
  out.ok = mismatches == 0;
  out.detail = std::to_string(2 * instances) + " panels, " + std::to_string(mismatches) + " weight mismatches";
  return out;
}

/// pre_rmse(unrestricted) <= pre_rmse(shift) <= pre_rmse(standard).
inline Outcome monotone_fit(int instances = 1000, std::uint64_t seed = 15) {
  Outcome out;
  int violations = 0;
  double worst = -1.0;
  constexpr double slack = 1e-7;
  for (int i = 0; i < instances; ++i) {
    RandomStream rng(seed, fnv1a64("nesting"), static_cast<std::uint64_t>(i));
    const Index J = 1 + static_cast<Index>(rng.next_u32() % 30);
    const Index t0 = 2 + static_cast<Index>(rng.next_u32() % 25);
    const Panel<double> panel = random_panel(rng, J, t0 + 5, t0);
    PredictorSpec spec;
    spec.weighting = PredictorWeighting::unit;
    const PredictorSet<double> p = build_predictors(panel, spec);
    const double standard = estimate_standard(panel, p).pre_rmse;
    const double shift = estimate_constant_shift(panel, p).pre_rmse;
    const double unres = estimate_unrestricted(panel, p).pre_rmse;
    worst = std::max({worst, unres - shift, shift - standard});
    if (unres > shift + slack * (1.0 + shift) || shift > standard + slack * (1.0 + standard)) ++violations;
  }
  out.ok = violations == 0;
  std::ostringstream s;
  s << instances << " panels, " << violations << " violations, max increase along the nesting = " << worst;
  out.detail = s.str();
  return out;
}

/// Summaries bit-identical across worker counts.
inline Outcome determinism(Index replications = 400) {
  CellSpec cell;
  cell.name = "determinism";
  GroupedFactorConfig g;
  g.sigma = 1.0;
  cell.dgp = g;
  cell.estimator.predictor_spec.weighting = PredictorWeighting::unit;
  cell.replications = replications;
  cell.seed = 99;
  const SimulationSummary a = run_cell(cell, 1);
  bool same = true;
  for (unsigned jobs : {4u, 8u}) {
    const SimulationSummary b = run_cell(cell, jobs);
    same = same && a.mean_post_rmse == b.mean_post_rmse && a.mean_pre_rmse == b.mean_pre_rmse &&
           a.se_post_rmse == b.se_post_rmse && a.mean_w2 == b.mean_w2 && a.band_lo == b.band_lo &&
           a.band_hi == b.band_hi && a.mean_effect == b.mean_effect;
  }
  return {same, std::to_string(replications) + " replications at jobs 1, 4, 8"};
}

/// Mutating any outcome after the backdated date leaves the weights unchanged.
inline Outcome no_leakage(int instances = 100, std::uint64_t seed = 16) {
  Outcome out;
  int changed = 0;
  for (int i = 0; i < instances; ++i) {
    RandomStream rng(seed, fnv1a64("leakage"), static_cast<std::uint64_t>(i));
    const Index J = 2 + static_cast<Index>(rng.next_u32() % 20);
    const Index t0 = 4 + static_cast<Index>(rng.next_u32() % 16);
    const Index t0b = 1 + static_cast<Index>(rng.next_u32() % static_cast<std::uint32_t>(t0 - 1));
    const Panel<double> panel = random_panel(rng, J, t0 + 6, t0);
    Eigen::MatrixXd y = panel.outcomes();
    y.rightCols(y.cols() - t0b) += gaussian(rng, y.rows(), y.cols() - t0b, 10.0);
    const Panel<double> mutated = panel.with_outcomes(y);
    for (EstimatorKind kind : {EstimatorKind::standard, EstimatorKind::constant_shift, EstimatorKind::unrestricted}) {
      EstimatorSpec spec;
      spec.kind = kind;
      const auto a = backdate(panel, spec, t0b);
      const auto b = backdate(mutated, spec, t0b);
      if (a.weights_backdated.w != b.weights_backdated.w ||
          a.weights_backdated.intercept != b.weights_backdated.intercept) {
        ++changed;
      }
    }
  }
  out.ok = changed == 0;
  out.detail = std::to_string(3 * instances) + " backdated fits, " + std::to_string(changed) + " changed by mutation";
  return out;
}

}  // namespace props
