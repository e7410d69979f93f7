#include "synthctl/config.hpp"

#include "synthctl/rng.hpp"
#include "table_a1_text.hpp"

#include <toml.hpp>

#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>

namespace synthctl {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::standard:
      return "standard";
    case EstimatorKind::constant_shift:
      return "shift";
    case EstimatorKind::unrestricted:
      return "unrestricted";
  }
  return "standard";
}

EstimatorKind estimator_kind_from_string(std::string_view name) {
  if (name == "standard") return EstimatorKind::standard;
  if (name == "shift" || name == "constant_shift") return EstimatorKind::constant_shift;
  if (name == "unrestricted") return EstimatorKind::unrestricted;
  throw InvalidSpecification("unknown estimator '" + std::string(name) +
                             "' (expected standard, shift or unrestricted)");
}

namespace {

[[noreturn]] void fail(const toml::node& node, const std::string& what) {
  const toml::source_position& at = node.source().begin;
  throw ParseError(what, static_cast<long>(at.line), static_cast<long>(at.column));
}

/// Typed access to one TOML table that remembers its dotted path for error
/// messages and rejects keys nobody asked about.
class Section {
 public:
  Section(const toml::table& table, std::string path) : table_(table), path_(std::move(path)) {}

  void allow_only(std::initializer_list<std::string_view> keys) const {
    for (const auto& [key, node] : table_) {
      bool known = false;
      for (std::string_view k : keys) known = known || key.str() == k;
      if (!known) fail(node, "unknown key '" + qualified(key.str()) + "'");
    }
  }

  const toml::node* find(std::string_view key) const { return table_.get(key); }
  bool has(std::string_view key) const { return find(key) != nullptr; }

  std::optional<std::int64_t> integer(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (const auto* v = n->as_integer()) return v->get();
    fail(*n, "'" + qualified(key) + "' must be an integer");
  }

  std::optional<Index> count(std::string_view key, std::int64_t min_value = 0) const {
    const auto v = integer(key);
    if (!v) return std::nullopt;
    if (*v < min_value) fail(*find(key), "'" + qualified(key) + "' must be >= " + std::to_string(min_value));
    return static_cast<Index>(*v);
  }

  std::optional<double> real(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (const auto* v = n->as_floating_point()) return v->get();
    if (const auto* v = n->as_integer()) return static_cast<double>(v->get());
    fail(*n, "'" + qualified(key) + "' must be a number");
  }

  std::optional<std::string> string(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (const auto* v = n->as_string()) return v->get();
    fail(*n, "'" + qualified(key) + "' must be a string");
  }

  std::optional<Section> table(std::string_view key) const {
    const toml::node* n = find(key);
    if (!n) return std::nullopt;
    if (const auto* t = n->as_table()) return Section(*t, qualified(key));
    fail(*n, "'" + qualified(key) + "' must be a table");
  }

  std::string qualified(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const toml::table& raw() const { return table_; }
  const std::string& path() const { return path_; }

 private:
  const toml::table& table_;
  std::string path_;
};

template <typename T>
void set_if(T& target, const std::optional<T>& value) {
  if (value) target = *value;
}

GroupedFactorConfig parse_grouped(const Section& s) {
  s.allow_only({"groups", "units_per_group", "periods", "t0", "rho", "sigma", "trend", "drift_sd", "delta"});
  GroupedFactorConfig c;
  set_if(c.n_groups, s.count("groups", 1));
  set_if(c.units_per_group, s.count("units_per_group", 1));
  set_if(c.t_total, s.count("periods", 2));
  set_if(c.t0, s.count("t0", 1));
  set_if(c.rho, s.real("rho"));
  set_if(c.sigma, s.real("sigma"));
  set_if(c.drift_sd, s.real("drift_sd"));
  set_if(c.delta, s.real("delta"));
  if (const auto trend = s.string("trend")) {
    if (*trend == "none") {
      c.trend = TrendKind::none;
    } else if (*trend == "stochastic") {
      c.trend = TrendKind::stochastic_trend;
    } else {
      fail(*s.find("trend"), "'" + s.qualified("trend") + "' must be \"none\" or \"stochastic\"");
    }
  }
  return c;
}

CovariateFactorConfig parse_covariate(const Section& s) {
  s.allow_only({"observed", "unobserved", "donors", "periods", "t0", "delta", "covariate_low", "covariate_high",
                "sigma"});
  CovariateFactorConfig c;
  set_if(c.n_observed, s.count("observed"));
  set_if(c.n_unobserved, s.count("unobserved"));
  set_if(c.donors, s.count("donors", 1));
  set_if(c.t_total, s.count("periods", 2));
  set_if(c.t0, s.count("t0", 1));
  set_if(c.delta, s.real("delta"));
  set_if(c.covariate_low, s.real("covariate_low"));
  set_if(c.covariate_high, s.real("covariate_high"));
  set_if(c.sigma, s.real("sigma"));
  return c;
}

ArConfig parse_ar(const Section& s) {
  s.allow_only({"units", "groups", "periods", "t0", "y_init_mean", "y_init_sd", "alpha_mean", "alpha_sd", "eps_sd"});
  ArConfig c;
  set_if(c.n_units, s.count("units", 2));
  set_if(c.n_groups, s.count("groups", 1));
  set_if(c.t_total, s.count("periods", 2));
  set_if(c.t0, s.count("t0", 1));
  set_if(c.y_init_mean, s.real("y_init_mean"));
  set_if(c.y_init_sd, s.real("y_init_sd"));
  set_if(c.alpha_mean, s.real("alpha_mean"));
  set_if(c.alpha_sd, s.real("alpha_sd"));
  set_if(c.eps_sd, s.real("eps_sd"));
  return c;
}

SolverConfig parse_solver(const Section& s) {
  s.allow_only({"max_iterations", "tolerance", "zero_clip", "certificate", "tie_break"});
  SolverConfig c;
  set_if(c.max_iterations, s.count("max_iterations", 1));
  set_if(c.tolerance, s.real("tolerance"));
  set_if(c.zero_clip, s.real("zero_clip"));
  set_if(c.certificate, s.real("certificate"));
  if (const auto tb = s.string("tie_break")) {
    if (*tb == "nearest_uniform") {
      c.tie_break = TieBreak::nearest_uniform;
    } else if (*tb == "sparse_vertex") {
      c.tie_break = TieBreak::sparse_vertex;
    } else {
      fail(*s.find("tie_break"), "'" + s.qualified("tie_break") + "' must be \"nearest_uniform\" or \"sparse_vertex\"");
    }
  }
  return c;
}

EffectSpec parse_effect(const Section& s) {
  s.allow_only({"shape", "magnitude"});
  EffectSpec e;
  const auto shape = s.string("shape").value_or("none");
  if (shape == "none") {
    e.shape = EffectShape::none;
  } else if (shape == "constant") {
    e.shape = EffectShape::constant;
  } else if (shape == "linear_ramp") {
    e.shape = EffectShape::linear_ramp;
  } else {
    fail(*s.find("shape"), "'" + s.qualified("shape") + "' must be none, constant or linear_ramp");
  }
  set_if(e.magnitude, s.real("magnitude"));
  return e;
}

ReferenceRow parse_reference(const Section& s) {
  s.allow_only({"post_rmse", "pre_rmse", "w2"});
  return {s.real("post_rmse"), s.real("pre_rmse"), s.real("w2")};
}

CellSpec parse_cell(const Section& s, const RunConfig& run) {
  s.allow_only({"name", "dgp", "estimator", "weighting", "trim_keep", "trim_fraction", "backdate", "replications",
                "seed", "params", "effect", "solver", "reference"});
  CellSpec cell;
  const auto name = s.string("name");
  if (!name || name->empty()) fail(s.raw(), "'" + s.qualified("name") + "' is required");
  cell.name = *name;

  const auto dgp = s.string("dgp");
  if (!dgp) fail(s.raw(), "'" + s.qualified("dgp") + "' is required");
  const toml::table empty;
  const Section params = s.table("params").value_or(Section(empty, s.qualified("params")));
  PredictorWeighting default_weighting = PredictorWeighting::unit;
  if (*dgp == "grouped_factor") {
    cell.dgp = parse_grouped(params);
  } else if (*dgp == "covariate_factor") {
    cell.dgp = parse_covariate(params);
    default_weighting = PredictorWeighting::inverse_variance;
  } else if (*dgp == "ar") {
    cell.dgp = parse_ar(params);
  } else {
    fail(*s.find("dgp"), "'" + s.qualified("dgp") + "' must be grouped_factor, covariate_factor or ar");
  }

  if (const auto est = s.string("estimator")) {
    try {
      cell.estimator.kind = estimator_kind_from_string(*est);
    } catch (const InvalidSpecification& e) {
      fail(*s.find("estimator"), e.what());
    }
  }
  cell.estimator.predictor_spec.weighting = default_weighting;
  if (const auto w = s.string("weighting")) {
    if (*w == "unit") {
      cell.estimator.predictor_spec.weighting = PredictorWeighting::unit;
    } else if (*w == "inverse_variance") {
      cell.estimator.predictor_spec.weighting = PredictorWeighting::inverse_variance;
    } else {
      fail(*s.find("weighting"), "'" + s.qualified("weighting") + "' must be \"unit\" or \"inverse_variance\"");
    }
  }
  const auto keep = s.count("trim_keep", 1);
  const auto fraction = s.real("trim_fraction");
  if (keep && fraction) fail(*s.find("trim_fraction"), "set only one of trim_keep and trim_fraction");
  if (keep || fraction) cell.estimator.trim = TrimSpec{keep, fraction};
  if (const auto solver = s.table("solver")) cell.estimator.solver = parse_solver(*solver);

  cell.backdate = s.count("backdate", 1);
  cell.replications = s.count("replications", 1).value_or(run.replications);
  cell.seed = static_cast<std::uint64_t>(s.count("seed").value_or(static_cast<Index>(run.seed)));
  if (const auto effect = s.table("effect")) cell.effect = parse_effect(*effect);
  if (const auto ref = s.table("reference")) cell.reference = parse_reference(*ref);

  try {
    cell.validate();
  } catch (const InvalidSpecification& e) {
    fail(s.raw(), e.what());
  }
  return cell;
}

}  // namespace

RunConfig parse_run_config(std::string_view text, std::string_view source_name) {
  toml::table doc;
  try {
    doc = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    throw ParseError(std::string(e.description()), static_cast<long>(e.source().begin.line),
                     static_cast<long>(e.source().begin.column));
  }

  RunConfig config;
  config.source_hash = fnv1a64(text);
  const Section root(doc, "");
  root.allow_only({"schema_version", "run", "cell"});
  const auto version = root.integer("schema_version");
  if (!version) throw ParseError("'schema_version' is required", 1, 1);
  if (*version != kRunConfigSchemaVersion) {
    fail(*root.find("schema_version"), "unsupported schema_version " + std::to_string(*version) + " (expected " +
                                           std::to_string(kRunConfigSchemaVersion) + ")");
  }
  config.schema_version = *version;

  if (const auto run = root.table("run")) {
    run->allow_only({"seed", "replications", "jobs", "out", "formats"});
    if (const auto seed = run->count("seed")) config.seed = static_cast<std::uint64_t>(*seed);
    set_if(config.replications, run->count("replications", 1));
    if (const auto jobs = run->count("jobs", 1)) config.jobs = static_cast<unsigned>(*jobs);
    set_if(config.out_dir, run->string("out"));
    if (const toml::node* f = run->find("formats")) {
      const auto* arr = f->as_array();
      if (!arr) fail(*f, "'run.formats' must be an array of strings");
      config.formats.clear();
      for (const toml::node& item : *arr) {
        const auto* str = item.as_string();
        if (!str || (str->get() != "csv" && str->get() != "json")) {
          fail(item, "'run.formats' entries must be \"csv\" or \"json\"");
        }
        config.formats.push_back(str->get());
      }
    }
  }

  const toml::node* cells = root.find("cell");
  if (!cells) throw ParseError("config defines no [[cell]] entries", 1, 1);
  const auto* arr = cells->as_array();
  if (!arr) fail(*cells, "'cell' must be an array of tables ([[cell]])");
  for (std::size_t i = 0; i < arr->size(); ++i) {
    const toml::node& item = *arr->get(i);
    const auto* t = item.as_table();
    if (!t) fail(item, "'cell' entries must be tables");
    CellSpec cell = parse_cell(Section(*t, "cell[" + std::to_string(i) + "]"), config);
    for (const CellSpec& other : config.cells) {
      if (other.name == cell.name) fail(item, "duplicate cell name '" + cell.name + "'");
    }
    config.cells.push_back(std::move(cell));
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidSpecification("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), path);
}

void apply_overrides(RunConfig& config, std::optional<Index> replications, std::optional<std::uint64_t> seed,
                     std::optional<unsigned> jobs) {
  if (replications) {
    if (*replications < 1) throw InvalidSpecification("--reps must be >= 1");
    config.replications = *replications;
    for (CellSpec& c : config.cells) c.replications = *replications;
  }
  if (seed) {
    config.seed = *seed;
    for (CellSpec& c : config.cells) c.seed = *seed;
  }
  if (jobs) {
    if (*jobs < 1) throw InvalidSpecification("--jobs must be >= 1");
    config.jobs = *jobs;
  }
}

std::string_view builtin_suite_text() { return detail::kTableA1Text; }

RunConfig builtin_suite() { return parse_run_config(builtin_suite_text(), "table_a1.toml"); }

}  // namespace synthctl
