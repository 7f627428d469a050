// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vmclass/balance.hpp"
#include "vmclass/model.hpp"
#include "vmclass/selection.hpp"
#include "vmclass/trace.hpp"
#include "vmclass/training.hpp"

namespace vmclass {

/// Everything one end-to-end run depends on. Defaults reproduce the
/// reference pipeline (SMOTE k=5, 70/10/20 split, Adam lr 0.01).
struct RunConfig {
  // [input]
  std::filesystem::path input_path; // raw trace CSV; empty means synthetic
  SyntheticSpec synthetic;
  bool skip_bad_rows = false;
  // [balance]
  BalanceMethod balance;
  bool train_only_smote = false;
  // [features]
  bool drop_id_features = false;
  bool train_only_normalization = false;
  // [split]
  SplitFractions fractions;
  std::uint64_t split_seed = 42;
  // [model]
  Architecture arch;
  // [train]
  HyperParams hp;
  std::size_t n_runs = 5;
  std::uint64_t base_seed = 42;
  bool parallel = false;
  // [output]
  std::filesystem::path output_dir = "out";
  std::string tag; // defaults to "cnn-gru-<balance method>"

  std::string resolved_tag() const;
};

/// INI-style key=value file with [section] headers. Unknown keys are errors.
RunConfig load_config(const std::filesystem::path &path);
void save_config(const std::filesystem::path &path, const RunConfig &config);

/// Sets one "section.key" field from text, as a config file line would.
void set_config_value(RunConfig &config, const std::string &dotted_key,
                      const std::string &value);

struct IngestResult {
  ParseReport parse;
  std::size_t parsed_records = 0;
  std::size_t cleaned_records = 0;
  std::size_t delay_insensitive = 0;
  std::size_t interactive = 0;
  EncodedTrace encoded;
};

/// parse -> clean -> label-encode.
IngestResult ingest(const RunConfig &config);

/// Writes encoded.csv (pre-balance, raw encoded columns), its sidecar with
/// the encoding maps, and dataset.csv (aggregated + normalized, unbalanced).
void write_ingest_outputs(const std::filesystem::path &dir, const IngestResult &ingested,
                          const RunConfig &config);

struct PreparedData {
  Dataset data; // aggregated, normalized, split-tagged
  std::vector<ColumnStats> stats;
  std::vector<std::string> warnings;
  std::size_t rows_before_balance = 0;
  std::size_t rows_after_balance = 0;
};

/// balance -> aggregate -> normalize -> split on an encoded dataset. With
/// train_only_smote the split comes first and only Train rows are balanced;
/// with train_only_normalization the split precedes normalization.
PreparedData prepare(const Dataset &encoded, const RunConfig &config);

struct TrainingOutputs {
  PreparedData prepared;
  std::vector<RunOutcome> runs;
  std::optional<MultiRunSummary> summary;
  std::vector<std::filesystem::path> checkpoints;
  std::vector<std::filesystem::path> curves;
};

/// prepare, then train n_runs models (seeds base_seed, base_seed+1, ...) and
/// write checkpoints, curves, metric tables, manifests and the resolved config.
TrainingOutputs run_training(const Dataset &encoded, const RunConfig &config,
                             const std::filesystem::path &dir);

Metadata stats_metadata(const std::vector<ColumnStats> &stats);
std::vector<ColumnStats> stats_from_metadata(const Metadata &meta);

/// Hosts built from synthetic records: features normalized with `stats`,
/// CPU series of `samples` readings scattered around each VM's average.
std::vector<HostSnapshot> synthetic_hosts(const std::vector<VmRecord> &records,
                                          const std::vector<ColumnStats> &stats,
                                          std::size_t vms_per_host, std::size_t samples,
                                          double bandwidth, std::uint64_t seed,
                                          bool drop_id_features = false);

} // namespace vmclass
