// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 The hfldd-sim Authors.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hfldd/fltrain.hpp"

namespace hfldd::cli {

namespace fs = std::filesystem;

/// Exit codes of every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

struct DataConfig {
  std::string source = "synthetic";  // or "idx"
  std::size_t classes = 10;
  std::size_t dim = 20;
  std::size_t per_class = 600;
  double separation = 0.25;
  double sigma = 0.0625;
  double test_fraction = 0.2;
  std::size_t probe_size = 200;
  /// Synthetic probe classes are drawn around means moved by this many σ.
  double probe_shift = 1.0;
  fs::path idx_images;
  fs::path idx_labels;
};

/// Everything one run needs. Defaults reproduce the desk-scale C=1 benchmark.
struct ExperimentConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  fs::path output = "runs/run";
  DataConfig data;
  PartitionSpec partition{20, 1, 10, 200, 0};
  RunConfig run;
  KipConfig kip;
  std::size_t k = 10;
  std::size_t fedseq_groups = 4;
  std::size_t fedseq_group_size = 5;

  ExperimentConfig();

  /// Throws ConfigError for inconsistent settings (for example C > N_c).
  void validate() const;

  /// Resolved configuration as section → key → value strings.
  using Table = std::map<std::string, std::map<std::string, std::string>>;
  Table to_table() const;
  /// Overrides defaults with `t`; unknown sections or keys throw ConfigError.
  static ExperimentConfig from_table(const Table& t, const fs::path& base_dir = {});

  /// INI text with [experiment], [data], [partition], [train], [kip], [cluster], [fedseq].
  static ExperimentConfig parse_ini(std::istream& in, const fs::path& base_dir = {});
  static ExperimentConfig load(const fs::path& path);
  std::string to_ini() const;
};

struct ExperimentData {
  std::vector<ClientState> clients;
  LabeledDataset probe;
  LabeledDataset test;
};

/// Dataset, train/test split, probe set and label-skew partition for `cfg`.
ExperimentData prepare_data(const ExperimentConfig& cfg);
RunResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data);
RunResult run_experiment(const ExperimentConfig& cfg);

void write_metrics_csv(const std::vector<RoundMetrics>& metrics, std::ostream& out);
std::vector<RoundMetrics> read_metrics_csv(std::istream& in);

struct RunOptions {
  fs::path source;  // config file or manifest.json
  std::optional<fs::path> output;
};

/// Runs one experiment and writes metrics.csv, cost.json, manifest.json and, for
/// HFLDD, topology.json into the output directory.
int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);

struct CompareOptions {
  std::vector<fs::path> runs;
  /// Accuracy to reach; defaults to the highest accuracy every run attains.
  std::optional<double> target;
  std::optional<fs::path> merged_csv;
};

int cmd_compare(const CompareOptions& opts, std::ostream& out, std::ostream& err);

struct CostOptions {
  std::optional<CostModel> model;
  std::optional<fs::path> from_json;
  bool json = false;
};

/// {"inputs": {...}, "fedavg_bits", "hfldd_bits", "fedseq_bits", "hfldd_over_fedavg"}
std::string cost_json(const CostModel& c);
CostModel cost_model_from_json(const std::string& text);
int cmd_cost(const CostOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace hfldd::cli
