#pragma once

#include "synthctl/montecarlo.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace synthctl {

inline constexpr std::int64_t kRunConfigSchemaVersion = 1;

/// Declarative simulation run: global defaults plus one entry per cell.
struct RunConfig {
  std::int64_t schema_version = kRunConfigSchemaVersion;
  std::uint64_t seed = 1;
  Index replications = 10000;
  unsigned jobs = 1;
  std::string out_dir;
  std::vector<std::string> formats{"csv", "json"};
  std::vector<CellSpec> cells;
  /// FNV-1a of the source text; identifies the config in output provenance.
  std::uint64_t source_hash = 0;
};

/// Parse and validate a TOML run config. Syntax errors, unknown keys, wrong
/// types and invalid values all raise ParseError carrying the line/column of
/// the offending node.
RunConfig parse_run_config(std::string_view text, std::string_view source_name = "<config>");
RunConfig load_run_config(const std::string& path);

/// Command-line overrides win over every cell-level setting.
void apply_overrides(RunConfig& config, std::optional<Index> replications, std::optional<std::uint64_t> seed,
                     std::optional<unsigned> jobs);

/// Text of configs/table_a1.toml, compiled in.
std::string_view builtin_suite_text();

/// The reference simulation table, one cell per row, each carrying its
/// reference values. Parsed from builtin_suite_text().
RunConfig builtin_suite();

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(std::string_view name);

}  // namespace synthctl
