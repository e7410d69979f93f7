#pragma once

#include "synthctl/core.hpp"
#include "synthctl/panel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>

namespace synthctl {

enum class TrendKind { none, stochastic_trend };

/// Units load on exactly one of F group factors; unit 1 (treated) and unit 2
/// share a group, the remaining units come in groups of units_per_group.
///
///   Y_it = delta + lambda_{f(i),t} + eps_it,
///   lambda_ft = rho * lambda_{f,t-1} + N(0, 1),  lambda_f1 ~ N(0, 1),
///   eps_it ~ N(0, sigma^2).
///
/// stochastic_trend adds a group drift b_f * t with b_f ~ N(0, drift_sd^2).
struct GroupedFactorConfig {
  Index n_groups = 10;
  Index units_per_group = 2;
  Index t_total = 30;
  Index t0 = 20;
  double rho = 0.5;
  double sigma = 1.0;
  TrendKind trend = TrendKind::none;
  double drift_sd = 0.2;
  double delta = 0.0;

  Index units() const { return n_groups * units_per_group; }
  void validate() const;
};

/// Y_jt = delta + theta_t . Z_j + lambda_t . mu_j + eps_jt with covariates
/// uniform on [covariate_low, covariate_high], coefficient paths as
/// independent Gaussian random walks and eps_jt ~ N(0, sigma^2). All
/// n_observed + n_unobserved covariates are drawn identically whatever the
/// split, so varying n_observed changes only what the analyst sees.
struct CovariateFactorConfig {
  Index n_observed = 0;
  Index n_unobserved = 5;
  Index donors = 1000;
  Index t_total = 30;
  Index t0 = 4;
  double delta = 100.0;
  double covariate_low = 0.0;
  double covariate_high = 20.0;
  double sigma = 5.0;

  Index units() const { return donors + 1; }
  Index total_covariates() const { return n_observed + n_unobserved; }
  void validate() const;
};

/// Y_jt = alpha_{g(j),t} Y_{j,t-1} + eps_jt, Y_j1 ~ N(y_init_mean, y_init_sd^2),
/// alpha_gt ~ N(alpha_mean, alpha_sd^2) shared within each group, groups of
/// n_units / n_groups consecutive units.
struct ArConfig {
  Index n_units = 50;
  Index n_groups = 5;
  Index t_total = 30;
  Index t0 = 20;
  double y_init_mean = 100.0;
  double y_init_sd = 20.0;
  double alpha_mean = 1.0;
  double alpha_sd = 0.1;
  double eps_sd = 1.0;

  void validate() const;
};

using DgpConfig = std::variant<GroupedFactorConfig, CovariateFactorConfig, ArConfig>;

enum class EffectShape { none, constant, linear_ramp };

/// Treatment effect added to the treated unit after t0. linear_ramp grows
/// from magnitude / (T - t0) at t0 + 1 to magnitude at T.
struct EffectSpec {
  EffectShape shape = EffectShape::none;
  double magnitude = 0.0;

  /// Effect at 1-based period t.
  double at(Index t, Index t0, Index t_total) const;
};

/// Adds the effect to row 0 for t > t0.
Panel<double> apply_effect(const Panel<double>& panel, const EffectSpec& effect);

/// Canonical text of the parameters that determine the draws, hashed into
/// the random stream key. CovariateFactorConfig hashes only the total
/// covariate count, not the observed/unobserved split. GroupedFactorConfig
/// leaves out the trend settings: the drifts come from their own stream and
/// everything else matches the design without drift.
std::string canonical_string(const GroupedFactorConfig& config);
std::string canonical_string(const CovariateFactorConfig& config);
std::string canonical_string(const ArConfig& config);
std::uint64_t config_hash(const DgpConfig& config);

Panel<double> gen_grouped_factor(const GroupedFactorConfig& config, const EffectSpec& effect, std::uint64_t seed,
                                 std::uint64_t replication = 0);

struct CovariatePanel {
  Panel<double> panel;
  Eigen::MatrixXd covariates;  // units x n_observed
};

CovariatePanel gen_covariate_factor(const CovariateFactorConfig& config, std::uint64_t seed,
                                    std::uint64_t replication = 0);

Panel<double> gen_ar(const ArConfig& config, std::uint64_t seed, std::uint64_t replication = 0);

/// One replication of any DGP, before any treatment effect is applied.
struct Draw {
  Panel<double> panel;
  std::optional<Eigen::MatrixXd> covariates;
};

Draw draw(const DgpConfig& config, std::uint64_t seed, std::uint64_t replication);

/// (J, t0, sigma, rho) descriptors used in summary tables. rho is NaN for the
/// auto-regressive design.
struct DgpDescriptor {
  Index donors;
  Index t0;
  Index t_total;
  double sigma;
  double rho;
};

DgpDescriptor describe(const DgpConfig& config);

}  // namespace synthctl
