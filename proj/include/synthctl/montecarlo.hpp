#pragma once

#include "synthctl/dgp.hpp"
#include "synthctl/estimators.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synthctl {

/// Reference (post-RMSE, pre-RMSE, W2) triple a cell is compared against.
struct ReferenceRow {
  std::optional<double> post_rmse;
  std::optional<double> pre_rmse;
  std::optional<double> w2;
};

struct CellSpec {
  std::string name;
  DgpConfig dgp = GroupedFactorConfig{};
  EstimatorSpec estimator;
  EffectSpec effect;
  Index replications = 10000;
  std::uint64_t seed = 0;
  std::optional<Index> backdate;
  std::optional<ReferenceRow> reference;

  void validate() const;
};

/// Outcome of one replication. error_path is the counterfactual minus the
/// treated unit's untreated outcome; effect_path is observed minus
/// counterfactual. pre_rmse always covers 1..t0, including for backdated
/// cells whose weights were fitted on 1..t0_backdated only.
struct ReplicationResult {
  double pre_rmse = 0.0;
  double post_rmse = 0.0;
  std::optional<double> w2;
  Eigen::VectorXd error_path;
  Eigen::VectorXd effect_path;
  EstimationResult<double> estimate;
};

/// Generate replication r of a cell and run its estimator.
ReplicationResult run_replication(const CellSpec& cell, std::uint64_t replication);

struct SimulationSummary {
  std::string name;
  DgpDescriptor descriptor{};
  double mean_pre_rmse = 0.0;
  double se_pre_rmse = 0.0;
  double mean_post_rmse = 0.0;
  double se_post_rmse = 0.0;
  std::optional<double> mean_w2;
  std::optional<double> se_w2;
  Eigen::VectorXd band_lo;  // 2.5% quantile of error_path per period
  Eigen::VectorXd band_hi;  // 97.5% quantile
  Eigen::VectorXd mean_effect;
  Eigen::VectorXd se_effect;
  /// Per-replication average of the estimated effect over t > t0.
  double mean_post_effect = 0.0;
  double se_post_effect = 0.0;
  Index replications_completed = 0;
  Index failures = 0;
  std::optional<ReferenceRow> reference;
};

/// Largest tolerated share of replications whose solver failed to converge.
inline constexpr double kMaxFailureRate = 1e-3;

/// Run every replication of a cell on `jobs` worker threads. Results are
/// reduced in replication order, so the summary is bit-identical for any
/// worker count.
SimulationSummary run_cell(const CellSpec& cell, unsigned jobs = 1);

std::vector<SimulationSummary> run_suite(std::span<const CellSpec> suite, unsigned jobs = 1);

/// Linear-interpolation sample quantile (type 7) of a sorted range.
double sorted_quantile(std::span<const double> sorted, double p);

}  // namespace synthctl
