// synthctl: synthetic-control estimation on CSV panels and Monte Carlo runs.

#include "synthctl/config.hpp"
#include "synthctl/evaluation.hpp"
#include "synthctl/io.hpp"
#include "synthctl/rng.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace synthctl;

namespace {

enum ExitCode { kOk = 0, kInputError = 2, kNumericError = 3 };

struct PanelOptions {
  std::string panel_path;
  std::string covariates_path;
  std::optional<std::string> treated;
  Index t0 = 0;
  std::string estimator = "standard";
  std::optional<Index> trim_keep;
  std::string weighting = "inverse_variance";
};

struct OutputOptions {
  std::string out_dir;
  std::optional<std::string> format;
};

struct SimOptions {
  std::string config_path;
  std::optional<Index> reps;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> jobs;
  std::vector<std::string> cells;
};

void add_panel_options(CLI::App* cmd, PanelOptions& o) {
  cmd->add_option("panel", o.panel_path, "Wide panel CSV (unit,t1..tT)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--t0", o.t0, "Number of pre-treatment periods")->required()->check(CLI::PositiveNumber);
  cmd->add_option("--treated", o.treated, "Label of the treated unit (default: first data row)");
  cmd->add_option("--estimator", o.estimator, "standard, shift or unrestricted")
      ->check(CLI::IsMember({"standard", "shift", "unrestricted"}));
  cmd->add_option("--trim-keep", o.trim_keep, "Keep only the N donors nearest the treated unit")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--covariates", o.covariates_path, "Covariate CSV (unit,<name>...)")->check(CLI::ExistingFile);
  cmd->add_option("--weighting", o.weighting, "Predictor weights: inverse_variance or unit")
      ->check(CLI::IsMember({"inverse_variance", "unit"}));
}

void add_output_options(CLI::App* cmd, OutputOptions& o) {
  cmd->add_option("--out", o.out_dir, "Write result files to this directory");
  cmd->add_option("--format", o.format, "csv or json (default: both with --out)")
      ->check(CLI::IsMember({"csv", "json"}));
}

void add_sim_options(CLI::App* cmd, SimOptions& o) {
  cmd->add_option("--reps", o.reps, "Replications per cell")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "Base seed");
  cmd->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--cell", o.cells, "Run only the named cell (repeatable)");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidSpecification("cannot write '" + path.string() + "'");
  out << text;
}

bool wants(const OutputOptions& o, std::string_view format) { return !o.format || *o.format == format; }

EstimatorSpec estimator_spec(const PanelOptions& o, Index covariate_count) {
  EstimatorSpec spec;
  spec.kind = estimator_kind_from_string(o.estimator);
  spec.predictor_spec.weighting =
      o.weighting == "unit" ? PredictorWeighting::unit : PredictorWeighting::inverse_variance;
  for (Index c = 0; c < covariate_count; ++c) spec.predictor_spec.covariate_columns.push_back(c);
  if (o.trim_keep) spec.trim = TrimSpec{*o.trim_keep, std::nullopt};
  return spec;
}

/// Hash of everything that determines an estimate: flags plus input bytes.
Provenance panel_provenance(const std::string& command, const PanelOptions& o, std::optional<Index> backdate) {
  std::ostringstream key;
  key << command << ";t0=" << o.t0 << ";treated=" << o.treated.value_or("") << ";estimator=" << o.estimator
      << ";trim=" << (o.trim_keep ? std::to_string(*o.trim_keep) : "") << ";weighting=" << o.weighting
      << ";backdate=" << (backdate ? std::to_string(*backdate) : "");
  key << ";panel=" << hex64(fnv1a64(read_file(o.panel_path)));
  Provenance p{command, 0, std::nullopt, {o.panel_path}};
  if (!o.covariates_path.empty()) {
    key << ";covariates=" << hex64(fnv1a64(read_file(o.covariates_path)));
    p.inputs.push_back(o.covariates_path);
  }
  p.config_hash = fnv1a64(key.str());
  return p;
}

struct LoadedPanel {
  Panel<double> panel;
  std::optional<CovariateTable> covariates;
};

LoadedPanel load(const PanelOptions& o) {
  LoadedPanel lp{read_panel_csv(o.panel_path, o.t0, o.treated), std::nullopt};
  if (!o.covariates_path.empty()) lp.covariates = read_covariates_csv(o.covariates_path, lp.panel);
  return lp;
}

int cmd_estimate(const PanelOptions& po, const OutputOptions& oo) {
  const LoadedPanel lp = load(po);
  const Index m = lp.covariates ? lp.covariates->values.cols() : 0;
  const EstimatorSpec spec = estimator_spec(po, m);
  const EstimationResult<double> result =
      estimate(lp.panel, lp.covariates ? &lp.covariates->values : nullptr, spec);
  const Provenance prov = panel_provenance("estimate", po, std::nullopt);
  const std::vector<std::string> labels = labels_by_id(lp.panel);
  if (oo.out_dir.empty()) {
    if (oo.format && *oo.format == "csv") {
      std::cout << weights_csv(result.weights, result.donor_ids, labels);
    } else {
      std::cout << estimate_json(result, lp.panel, prov);
    }
    return kOk;
  }
  const fs::path dir(oo.out_dir);
  if (wants(oo, "json")) write_file(dir / "estimate.json", estimate_json(result, lp.panel, prov));
  if (wants(oo, "csv")) {
    write_file(dir / "weights.csv", weights_csv(result.weights, result.donor_ids, labels));
    write_file(dir / "path.csv", path_csv(lp.panel, result.counterfactual, result.effect));
  }
  return kOk;
}

int cmd_validate(const PanelOptions& po, Index t0b, const OutputOptions& oo) {
  const LoadedPanel lp = load(po);
  const Index m = lp.covariates ? lp.covariates->values.cols() : 0;
  const EstimatorSpec spec = estimator_spec(po, m);
  const BackdateReport<double> report =
      backdate(lp.panel, lp.covariates ? &lp.covariates->values : nullptr, spec, t0b);
  const Provenance prov = panel_provenance("validate", po, t0b);
  const std::vector<std::string> labels = labels_by_id(lp.panel);
  if (oo.out_dir.empty()) {
    if (oo.format && *oo.format == "csv") {
      std::cout << backdate_path_csv(report, lp.panel);
    } else {
      std::cout << backdate_json(report, lp.panel, prov);
    }
    return kOk;
  }
  const fs::path dir(oo.out_dir);
  if (wants(oo, "json")) write_file(dir / "validate.json", backdate_json(report, lp.panel, prov));
  if (wants(oo, "csv")) {
    write_file(dir / "weights.csv", weights_csv(report.weights_backdated, report.donor_ids, labels));
    write_file(dir / "path.csv", backdate_path_csv(report, lp.panel));
  }
  return kOk;
}

void select_cells(RunConfig& config, const std::vector<std::string>& names) {
  if (names.empty()) return;
  std::vector<CellSpec> kept;
  for (const std::string& n : names) {
    const auto it = std::find_if(config.cells.begin(), config.cells.end(), [&](const CellSpec& c) { return c.name == n; });
    if (it == config.cells.end()) throw InvalidSpecification("no cell named '" + n + "'");
    kept.push_back(*it);
  }
  config.cells = std::move(kept);
}

Provenance run_provenance(const std::string& command, const RunConfig& config, const SimOptions& so) {
  std::ostringstream key;
  key << hex64(config.source_hash) << ";reps=" << (so.reps ? std::to_string(*so.reps) : "")
      << ";seed=" << (so.seed ? std::to_string(*so.seed) : "");
  for (const std::string& c : so.cells) key << ";cell=" << c;
  Provenance p{command, fnv1a64(key.str()), config.seed, {}};
  if (!so.config_path.empty()) p.inputs.push_back(so.config_path);
  return p;
}

void print_comparison(const std::vector<SimulationSummary>& summaries) {
  std::printf("%-20s %6s %4s %6s %5s  %16s %8s  %16s %8s  %16s %8s\n", "cell", "J", "T0", "sigma", "rho", "post-RMSE",
              "ref", "pre-RMSE", "ref", "W2", "ref");
  for (const SimulationSummary& s : summaries) {
    const ReferenceRow ref = s.reference.value_or(ReferenceRow{});
    auto ref_text = [](const std::optional<double>& x) { return x ? format_number(*x) : std::string("-"); };
    char w2[32] = "-";
    if (s.mean_w2) std::snprintf(w2, sizeof w2, "%.3f (%.3f)", *s.mean_w2, *s.se_w2);
    char rho[16] = "-";
    if (!std::isnan(s.descriptor.rho)) std::snprintf(rho, sizeof rho, "%g", s.descriptor.rho);
    std::printf("%-20s %6ld %4ld %6g %5s  %8.3f (%.3f) %8s  %8.3f (%.3f) %8s  %16s %8s\n", s.name.c_str(),
                static_cast<long>(s.descriptor.donors), static_cast<long>(s.descriptor.t0), s.descriptor.sigma, rho,
                s.mean_post_rmse, s.se_post_rmse, ref_text(ref.post_rmse).c_str(), s.mean_pre_rmse, s.se_pre_rmse,
                ref_text(ref.pre_rmse).c_str(), w2, ref_text(ref.w2).c_str());
  }
}

bool single_draw(const RunConfig& config) {
  for (const CellSpec& c : config.cells) {
    if (c.replications != 1) return false;
  }
  return true;
}

int run_config(const std::string& command, RunConfig config, const SimOptions& so, const OutputOptions& oo,
               bool human_table) {
  select_cells(config, so.cells);
  apply_overrides(config, so.reps, so.seed, so.jobs);
  const Provenance prov = run_provenance(command, config, so);
  const std::string out_dir = oo.out_dir.empty() ? config.out_dir : oo.out_dir;
  const auto wanted = [&](std::string_view f) {
    if (oo.format) return *oo.format == f;
    return std::find(config.formats.begin(), config.formats.end(), f) != config.formats.end();
  };

  if (single_draw(config)) {
    for (const CellSpec& cell : config.cells) {
      const ReplicationResult r = run_replication(cell, 0);
      if (out_dir.empty()) {
        std::cout << "# " << cell.name << "\n" << draw_path_csv(cell, r);
      } else {
        write_file(fs::path(out_dir) / "paths" / (cell.name + ".csv"), draw_path_csv(cell, r));
        write_file(fs::path(out_dir) / "paths" / (cell.name + "_weights.csv"),
                   weights_csv(r.estimate.weights, r.estimate.donor_ids, {}));
      }
    }
  }

  std::vector<SimulationSummary> summaries;
  for (const CellSpec& cell : config.cells) {
    summaries.push_back(run_cell(cell, config.jobs));
    if (human_table) std::fprintf(stderr, "  %s done\n", cell.name.c_str());
  }

  if (out_dir.empty()) {
    if (human_table) {
      print_comparison(summaries);
    } else if (!single_draw(config)) {
      if (oo.format && *oo.format == "json") {
        std::cout << summary_json(summaries, prov);
      } else {
        std::cout << summary_csv(summaries);
      }
    }
    return kOk;
  }
  const fs::path dir(out_dir);
  if (wanted("csv")) {
    write_file(dir / "summary.csv", summary_csv(summaries));
    write_file(dir / "bands.csv", bands_csv(summaries));
  }
  if (wanted("json")) write_file(dir / "summary.json", summary_json(summaries, prov));
  if (human_table) print_comparison(summaries);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic-control estimation and simulation"};
  app.set_version_flag("--version", SYNTHCTL_VERSION);
  app.require_subcommand(1);

  PanelOptions est_panel, val_panel;
  OutputOptions est_out, val_out, sim_out, suite_out;
  SimOptions sim_opts, suite_opts;
  Index t0b = 0;

  CLI::App* estimate_cmd = app.add_subcommand("estimate", "Fit a synthetic control to a CSV panel");
  add_panel_options(estimate_cmd, est_panel);
  add_output_options(estimate_cmd, est_out);

  CLI::App* validate_cmd = app.add_subcommand("validate", "Backdating validation on a CSV panel");
  add_panel_options(validate_cmd, val_panel);
  validate_cmd->add_option("--backdate", t0b, "Backdated last pre-treatment period")
      ->required()
      ->check(CLI::PositiveNumber);
  add_output_options(validate_cmd, val_out);

  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Run the cells of a TOML run config");
  simulate_cmd->add_option("config", sim_opts.config_path, "Run config (TOML)")->required()->check(CLI::ExistingFile);
  add_sim_options(simulate_cmd, sim_opts);
  add_output_options(simulate_cmd, sim_out);

  CLI::App* suite_cmd = app.add_subcommand("suite", "Run the built-in reference table and compare");
  suite_cmd->add_option("--config", suite_opts.config_path, "Use this run config instead of the built-in one")
      ->check(CLI::ExistingFile);
  add_sim_options(suite_cmd, suite_opts);
  add_output_options(suite_cmd, suite_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*estimate_cmd) return cmd_estimate(est_panel, est_out);
    if (*validate_cmd) return cmd_validate(val_panel, t0b, val_out);
    if (*simulate_cmd) return run_config("simulate", load_run_config(sim_opts.config_path), sim_opts, sim_out, false);
    if (*suite_cmd) {
      RunConfig config = suite_opts.config_path.empty() ? builtin_suite() : load_run_config(suite_opts.config_path);
      return run_config("suite", std::move(config), suite_opts, suite_out, true);
    }
  } catch (const ParseError& e) {
    std::cerr << "synthctl: input error at line " << e.line() << ", column " << e.column() << ": " << e.what()
              << "\n";
    return kInputError;
  } catch (const InvalidSpecification& e) {
    std::cerr << "synthctl: invalid input: " << e.what() << "\n";
    return kInputError;
  } catch (const NumericInputError& e) {
    std::cerr << "synthctl: numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const ConvergenceError& e) {
    std::cerr << "synthctl: solver did not converge: " << e.what() << " (gap " << e.gap() << ")\n";
    return kNumericError;
  } catch (const HarnessError& e) {
    std::cerr << "synthctl: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "synthctl: " << e.what() << "\n";
    return kNumericError;
  }
  return kOk;
}
