// SPDX-License-Identifier: Apache-2.0
//
// Reproducible experiment runs behind the command-line tool. Each command
// resolves a flat JSON config (defaults < config file < --override), runs,
// and returns CSV tables, a plain-text report and a pass/fail verdict.
#pragma once

#include "infograd/graph.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace infograd {

using Json = nlohmann::json;

/// Column-named numeric table.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
  std::vector<double> column(const std::string& name) const;
  /// RFC-4180 style, '.' decimal separator, 17 significant digits.
  std::string to_csv() const;
};

struct ExperimentOutput {
  std::map<std::string, Table> tables;  // file name -> table
  std::string report;
  bool passed = true;
};

struct RunOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;  // key=value, value parsed as JSON when possible
};

std::vector<std::string> command_names();
Json default_config(const std::string& command);
/// Merges defaults, the config file and overrides; rejects unknown keys.
Json resolve_config(const std::string& command, const RunOptions& options);

/// Built-in DAGs: "multipath", "cascade", "tanh", "scalar", "mac".
DagConfig builtin_dag(const std::string& name);
/// A "dag" config value: a built-in name or a path to a JSON file.
DagConfig dag_from_config(const Json& config, const std::string& fallback);

ExperimentOutput run_sweep_multipath(const Json& config, std::uint64_t seed);
ExperimentOutput run_pga_multipath(const Json& config, std::uint64_t seed);
ExperimentOutput run_tanh_sweep(const Json& config, std::uint64_t seed);
ExperimentOutput run_mac_region(const Json& config, std::uint64_t seed);
ExperimentOutput run_cascade_check(const Json& config, std::uint64_t seed);
ExperimentOutput run_fisher_mi(const Json& config, std::uint64_t seed);
ExperimentOutput run_calibrate_demo(const Json& config, std::uint64_t seed);

ExperimentOutput run_experiment(const std::string& command, const Json& config, std::uint64_t seed);

/// Resolves, runs, writes tables, report.txt and manifest.json into
/// options.out_dir, prints the report. Returns 0 on pass, 2 on failure.
int run_command(const std::string& command, const RunOptions& options, std::ostream& out);

std::string version_string();

}  // namespace infograd
