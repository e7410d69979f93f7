#include "synthctl/dgp.hpp"

#include "synthctl/rng.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace synthctl {

namespace {

std::string fmt_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

void GroupedFactorConfig::validate() const {
  if (n_groups < 1) throw InvalidSpecification("grouped factor: n_groups must be >= 1");
  if (units_per_group < 2) throw InvalidSpecification("grouped factor: units_per_group must be >= 2");
  if (t0 < 1 || t_total <= t0) throw InvalidSpecification("grouped factor: need 1 <= t0 < t_total");
  if (!(sigma >= 0.0)) throw InvalidSpecification("grouped factor: sigma must be >= 0");
  if (!(std::abs(rho) <= 1.0)) throw InvalidSpecification("grouped factor: |rho| must be <= 1");
  if (!(drift_sd >= 0.0)) throw InvalidSpecification("grouped factor: drift_sd must be >= 0");
  if (!std::isfinite(delta)) throw InvalidSpecification("grouped factor: delta must be finite");
}

void CovariateFactorConfig::validate() const {
  if (n_observed < 0 || n_unobserved < 0) {
    throw InvalidSpecification("covariate factor: covariate counts must be >= 0");
  }
  if (donors < 1) throw InvalidSpecification("covariate factor: donors must be >= 1");
  if (t0 < 1 || t_total <= t0) throw InvalidSpecification("covariate factor: need 1 <= t0 < t_total");
  if (!(covariate_high > covariate_low)) {
    throw InvalidSpecification("covariate factor: covariate_high must exceed covariate_low");
  }
  if (!(sigma >= 0.0)) throw InvalidSpecification("covariate factor: sigma must be >= 0");
}

void ArConfig::validate() const {
  if (n_groups < 1 || n_units < 2) throw InvalidSpecification("ar: need n_groups >= 1 and n_units >= 2");
  if (n_units % n_groups != 0) throw InvalidSpecification("ar: n_units must be divisible by n_groups");
  if (t0 < 1 || t_total <= t0) throw InvalidSpecification("ar: need 1 <= t0 < t_total");
  if (!(y_init_sd >= 0.0 && alpha_sd >= 0.0 && eps_sd >= 0.0)) {
    throw InvalidSpecification("ar: standard deviations must be >= 0");
  }
}

double EffectSpec::at(Index t, Index t0, Index t_total) const {
  if (t <= t0) return 0.0;
  switch (shape) {
    case EffectShape::none:
      return 0.0;
    case EffectShape::constant:
      return magnitude;
    case EffectShape::linear_ramp:
      return magnitude * static_cast<double>(t - t0) / static_cast<double>(t_total - t0);
  }
  return 0.0;
}

Panel<double> apply_effect(const Panel<double>& panel, const EffectSpec& effect) {
  if (effect.shape == EffectShape::none) return panel;
  Eigen::MatrixXd y = panel.outcomes();
  for (Index t = panel.t0() + 1; t <= panel.periods(); ++t) {
    y(0, t - 1) += effect.at(t, panel.t0(), panel.periods());
  }
  return panel.with_outcomes(std::move(y));
}

std::string canonical_string(const GroupedFactorConfig& c) {
  std::ostringstream s;
  s << "grouped_factor/v1;F=" << c.n_groups << ";upg=" << c.units_per_group << ";T=" << c.t_total
    << ";t0=" << c.t0 << ";rho=" << fmt_double(c.rho) << ";sigma=" << fmt_double(c.sigma)
    << ";delta=" << fmt_double(c.delta);
  return s.str();
}

std::string canonical_string(const CovariateFactorConfig& c) {
  std::ostringstream s;
  s << "covariate_factor/v1;K=" << c.total_covariates() << ";J=" << c.donors << ";T=" << c.t_total
    << ";t0=" << c.t0 << ";delta=" << fmt_double(c.delta) << ";low=" << fmt_double(c.covariate_low)
    << ";high=" << fmt_double(c.covariate_high) << ";sigma=" << fmt_double(c.sigma);
  return s.str();
}

std::string canonical_string(const ArConfig& c) {
  std::ostringstream s;
  s << "ar/v1;N=" << c.n_units << ";G=" << c.n_groups << ";T=" << c.t_total << ";t0=" << c.t0
    << ";y0=" << fmt_double(c.y_init_mean) << ";y0sd=" << fmt_double(c.y_init_sd)
    << ";a=" << fmt_double(c.alpha_mean) << ";asd=" << fmt_double(c.alpha_sd)
    << ";eps=" << fmt_double(c.eps_sd);
  return s.str();
}

std::uint64_t config_hash(const DgpConfig& config) {
  return std::visit([](const auto& c) { return fnv1a64(canonical_string(c)); }, config);
}

Panel<double> gen_grouped_factor(const GroupedFactorConfig& config, const EffectSpec& effect, std::uint64_t seed,
                                 std::uint64_t replication) {
  config.validate();
  RandomStream rng(seed, config_hash(DgpConfig{config}), replication);
  const Index F = config.n_groups;
  const Index T = config.t_total;
  const Index N = config.units();

  Eigen::MatrixXd factors(F, T);
  for (Index f = 0; f < F; ++f) {
    factors(f, 0) = rng.normal();
    for (Index t = 1; t < T; ++t) factors(f, t) = config.rho * factors(f, t - 1) + rng.normal();
  }
  if (config.trend == TrendKind::stochastic_trend) {
    // Separate stream, so the trend variant shares every other draw with the
    // same design without drift.
    RandomStream drift_rng(seed, config_hash(DgpConfig{config}) ^ fnv1a64("drift"), replication);
    for (Index f = 0; f < F; ++f) {
      const double drift = drift_rng.normal(0.0, config.drift_sd);
      for (Index t = 0; t < T; ++t) factors(f, t) += drift * static_cast<double>(t + 1);
    }
  }

  Eigen::MatrixXd y(N, T);
  for (Index i = 0; i < N; ++i) {
    const Index group = i / config.units_per_group;
    for (Index t = 0; t < T; ++t) {
      y(i, t) = config.delta + factors(group, t) + config.sigma * rng.normal();
    }
  }
  return apply_effect(Panel<double>(std::move(y), config.t0), effect);
}

CovariatePanel gen_covariate_factor(const CovariateFactorConfig& config, std::uint64_t seed,
                                    std::uint64_t replication) {
  config.validate();
  RandomStream rng(seed, config_hash(DgpConfig{config}), replication);
  const Index K = config.total_covariates();
  const Index N = config.units();
  const Index T = config.t_total;

  Eigen::MatrixXd cov(N, K);
  for (Index i = 0; i < N; ++i) {
    for (Index c = 0; c < K; ++c) cov(i, c) = rng.uniform(config.covariate_low, config.covariate_high);
  }
  // Coefficient paths theta_t (observed) and lambda_t (unobserved) share one
  // T x K matrix; which columns count as observed is decided afterwards.
  Eigen::MatrixXd coef(T, K);
  for (Index c = 0; c < K; ++c) {
    coef(0, c) = rng.normal();
    for (Index t = 1; t < T; ++t) coef(t, c) = coef(t - 1, c) + rng.normal();
  }
  Eigen::MatrixXd y = (cov * coef.transpose()).array() + config.delta;
  for (Index i = 0; i < N; ++i) {
    for (Index t = 0; t < T; ++t) y(i, t) += config.sigma * rng.normal();
  }
  return {Panel<double>(std::move(y), config.t0), cov.leftCols(config.n_observed)};
}

Panel<double> gen_ar(const ArConfig& config, std::uint64_t seed, std::uint64_t replication) {
  config.validate();
  RandomStream rng(seed, config_hash(DgpConfig{config}), replication);
  const Index N = config.n_units;
  const Index T = config.t_total;
  const Index per_group = N / config.n_groups;

  Eigen::MatrixXd alpha(config.n_groups, T);
  alpha.col(0).setZero();
  for (Index g = 0; g < config.n_groups; ++g) {
    for (Index t = 1; t < T; ++t) alpha(g, t) = rng.normal(config.alpha_mean, config.alpha_sd);
  }
  Eigen::MatrixXd y(N, T);
  for (Index i = 0; i < N; ++i) y(i, 0) = rng.normal(config.y_init_mean, config.y_init_sd);
  for (Index i = 0; i < N; ++i) {
    const Index g = i / per_group;
    for (Index t = 1; t < T; ++t) y(i, t) = alpha(g, t) * y(i, t - 1) + config.eps_sd * rng.normal();
  }
  return Panel<double>(std::move(y), config.t0);
}

Draw draw(const DgpConfig& config, std::uint64_t seed, std::uint64_t replication) {
  struct Visitor {
    std::uint64_t seed, rep;
    Draw operator()(const GroupedFactorConfig& c) const { return {gen_grouped_factor(c, {}, seed, rep), std::nullopt}; }
    Draw operator()(const CovariateFactorConfig& c) const {
      CovariatePanel cp = gen_covariate_factor(c, seed, rep);
      return {std::move(cp.panel), std::move(cp.covariates)};
    }
    Draw operator()(const ArConfig& c) const { return {gen_ar(c, seed, rep), std::nullopt}; }
  };
  return std::visit(Visitor{seed, replication}, config);
}

DgpDescriptor describe(const DgpConfig& config) {
  struct Visitor {
    DgpDescriptor operator()(const GroupedFactorConfig& c) const {
      return {c.units() - 1, c.t0, c.t_total, c.sigma, c.rho};
    }
    DgpDescriptor operator()(const CovariateFactorConfig& c) const {
      return {c.donors, c.t0, c.t_total, c.sigma, 1.0};
    }
    DgpDescriptor operator()(const ArConfig& c) const {
      return {c.n_units - 1, c.t0, c.t_total, c.eps_sd, std::numeric_limits<double>::quiet_NaN()};
    }
  };
  return std::visit(Visitor{}, config);
}

}  // namespace synthctl
