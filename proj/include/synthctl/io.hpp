#pragma once

#include "synthctl/config.hpp"
#include "synthctl/evaluation.hpp"
#include "synthctl/montecarlo.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synthctl {

/// Shortest round-trip decimal text for x ("nan"/"inf" for non-finite).
std::string format_number(double x);

/// Wide panel CSV: header `unit,t1,...,tT`, one row per unit. The treated
/// unit is the first data row unless `treated` names another unit, in which
/// case it is moved to row 0. unit_ids() keep the 0-based data-row order of
/// the file. Malformed input raises ParseError with 1-based line/column.
Panel<double> read_panel_csv(std::istream& in, Index t0, const std::optional<std::string>& treated = std::nullopt);
Panel<double> read_panel_csv(const std::string& path, Index t0,
                             const std::optional<std::string>& treated = std::nullopt);

/// Covariate CSV: header `unit,<name>...`, one row per panel unit in any
/// order. Returns a matrix aligned with the panel's rows.
struct CovariateTable {
  Eigen::MatrixXd values;
  std::vector<std::string> names;
};
CovariateTable read_covariates_csv(std::istream& in, const Panel<double>& panel);
CovariateTable read_covariates_csv(const std::string& path, const Panel<double>& panel);

/// Reproducibility stamp embedded in every JSON document.
struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> inputs;
};

std::string hex64(std::uint64_t x);

/// Unit labels indexed by unit_ids(), i.e. in file order.
std::vector<std::string> labels_by_id(const Panel<double>& panel);

std::string estimate_json(const EstimationResult<double>& result, const Panel<double>& panel,
                          const Provenance& provenance);
std::string weights_csv(const WeightVector<double>& weights, const std::vector<Index>& donor_ids,
                        const std::vector<std::string>& labels);
std::string path_csv(const Panel<double>& panel, const Eigen::VectorXd& counterfactual, const Eigen::VectorXd& effect);

std::string backdate_json(const BackdateReport<double>& report, const Panel<double>& panel,
                          const Provenance& provenance);
/// Path file with a `window` column: fit, holdout or post.
std::string backdate_path_csv(const BackdateReport<double>& report, const Panel<double>& panel);

/// One row per cell: J, T0, sigma, rho, the three means with standard
/// errors, the reference values and replication counts.
std::string summary_csv(const std::vector<SimulationSummary>& summaries);
std::string summary_json(const std::vector<SimulationSummary>& summaries, const Provenance& provenance);
/// Long-format per-period bands: cell,t,band_lo,band_hi,mean_effect,se_effect.
std::string bands_csv(const std::vector<SimulationSummary>& summaries);
/// Single replication of a cell: untreated, observed, counterfactual and
/// effect paths in long format, and the donor weights.
std::string draw_path_csv(const CellSpec& cell, const ReplicationResult& result);

}  // namespace synthctl
