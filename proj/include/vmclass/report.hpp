// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vmclass/dataset.hpp"
#include "vmclass/training.hpp"

namespace vmclass {

/// epoch,train_loss,val_loss,train_acc,val_acc
void write_curves(const std::filesystem::path &path, const std::vector<EpochRecord> &history);
std::vector<EpochRecord> read_curves(const std::filesystem::path &path);

struct MetricsRow {
  std::string model;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  ClassificationMetrics metrics;
};

/// One row per run: confusion counts, accuracy, per-class precision/recall.
void write_metrics_table(const std::filesystem::path &path,
                         const std::vector<MetricsRow> &rows);
std::vector<MetricsRow> read_metrics_table(const std::filesystem::path &path);

/// min, mean, std, max per metric plus a "min mean(std) max" percentage cell.
void write_summary_table(const std::filesystem::path &path, const std::string &model,
                         const MultiRunSummary &summary);

/// "95.01 95.18(0.13) 95.23" style rendering of a fractional summary.
std::string format_summary_percent(const Summary &s);

struct ReportFiles {
  std::filesystem::path curves;
  std::filesystem::path metrics;
  std::filesystem::path manifest;
};

/// File stem shared by all per-run outputs, e.g. "cnn-gru-smote_seed42".
std::string run_stem(const std::string &tag, std::uint64_t seed);

/// Writes the learning curves, a one-row metrics table and the run manifest
/// (hyperparameters etc. from `manifest`, plus training time) into `dir`.
ReportFiles emit_report(const std::filesystem::path &dir, const std::string &tag,
                        std::size_t run_index, const RunMetrics &run,
                        const Metadata &manifest);

} // namespace vmclass
