// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "vmclass/balance.hpp"
#include "vmclass/dataset.hpp"
#include "vmclass/metrics.hpp"
#include "vmclass/model.hpp"

namespace vmclass {

struct HyperParams {
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double lr = 0.01;
  double dropout = 0.4;
  std::uint64_t seed = 42;
  BalanceMethod balance;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0; // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord &, const EpochRecord &) = default;
};

struct Evaluation {
  ClassificationMetrics metrics;
  double loss = 0.0;
  std::size_t rows = 0;
};

struct RunMetrics {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  Evaluation test;
  double train_seconds = 0.0;
};

/// Fixed-epoch mini-batch training on the Train rows. The last partial batch
/// is kept. After every epoch the Train and Val rows are scored in eval mode
/// (Val columns are NaN when the split has no Val rows). The dropout rate in
/// `hp` overrides the model's.
RunMetrics train(ModelState &model, const Dataset &dataset, const HyperParams &hp);

/// Scores one split. Predictions are the argmax class, ties going to class 0.
Evaluation evaluate(const ModelState &model, const Dataset &dataset, SplitTag split);

struct RunOutcome {
  ModelState model;
  RunMetrics metrics;
};

struct MultiRunSummary {
  Summary accuracy;
  std::array<Summary, 2> precision;
  std::array<Summary, 2> recall;
};

struct MultiRunResult {
  std::vector<RunOutcome> runs;
  MultiRunSummary summary;
};

struct MultiRunOptions {
  std::size_t n_runs = 5;
  std::uint64_t base_seed = 42;
  /// Use base_seed for every run instead of base_seed + i.
  bool same_seed = false;
  /// Run on separate threads; results do not depend on this.
  bool parallel = false;
};

/// Trains n_runs fresh models (seed base_seed + i drives both initialisation
/// and batch order) and summarises their test metrics.
MultiRunResult multi_run(const Dataset &dataset, const Architecture &arch,
                         const HyperParams &hp, const MultiRunOptions &options);

MultiRunSummary summarize_runs(const std::vector<RunMetrics> &runs);

/// Slices rows into a [n, cols] feature grid and a label vector.
NumericGrid gather_features(const Dataset &dataset, std::span<const std::size_t> rows);
std::vector<int> gather_labels(const Dataset &dataset, std::span<const std::size_t> rows);

} // namespace vmclass
