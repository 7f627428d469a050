// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vmclass/dataset.hpp"

namespace vmclass {

enum class Category { DelayInsensitive, Interactive, Unknown };

std::string_view to_string(Category c);

/// Case-insensitive; anything other than the two known labels is Unknown.
Category parse_category(std::string_view text);

/// One row of the per-VM summary table.
struct VmRecord {
  std::string vm_id;
  std::string subscription_id;
  std::string deployment_id;
  double created = 0.0; // seconds since trace epoch
  double deleted = 0.0;
  double cpu_min = 0.0; // percent
  double cpu_avg = 0.0;
  double cpu_max = 0.0;
  double core_count = 1.0;
  double memory = 1.0; // GB
  Category category = Category::Unknown;

  friend bool operator==(const VmRecord &, const VmRecord &) = default;
};

struct SyntheticSpec {
  std::size_t n = 1000;
  std::uint64_t seed = 42;
  /// Fraction of known-label records that are Interactive.
  double class_ratio = 0.5;
  /// Probability of flipping each known label after generation.
  double noise = 0.0;
  /// Fraction of the n records emitted with an Unknown category.
  double unknown_fraction = 0.0;
};

struct TraceSource {
  enum class Format { CsvFile, Synthetic };

  Format format = Format::CsvFile;
  std::filesystem::path path;
  SyntheticSpec synthetic;

  static TraceSource csv(std::filesystem::path p) {
    return {Format::CsvFile, std::move(p), {}};
  }
  static TraceSource generated(SyntheticSpec spec) {
    return {Format::Synthetic, {}, spec};
  }
};

struct ParseOptions {
  /// Skip rows with malformed numbers instead of failing on the first one.
  bool skip_bad_rows = false;
};

struct ParseReport {
  std::size_t data_rows = 0;
  std::vector<std::size_t> skipped_lines;
};

/// Header names are matched after lower-casing and stripping punctuation, so
/// "vm_id", "vmid" and "VM-ID" are equivalent. Column order is free.
std::vector<VmRecord> parse_trace(const TraceSource &source,
                                  const ParseOptions &options = {},
                                  ParseReport *report = nullptr);

/// Writes records with the canonical 11-column header.
void write_trace(const std::filesystem::path &path,
                 const std::vector<VmRecord> &records);

/// Drops records whose category is Unknown, preserving order.
std::vector<VmRecord> clean(const std::vector<VmRecord> &records);

struct NominalEncoding {
  std::vector<int> codes;
  std::vector<std::string> values; // values[code] is the original string
};

/// Codes 0..n-1 in order of first appearance.
NominalEncoding encode_nominal(const std::vector<std::string> &column);

inline const std::vector<std::string> &raw_feature_columns() {
  static const std::vector<std::string> cols = {
    "vm_id",  "subscription_id", "deployment_id", "created",    "deleted",
    "cpu_min", "cpu_avg",        "cpu_max",       "core_count", "memory"};
  return cols;
}

inline const std::vector<std::string> &aggregated_feature_columns() {
  static const std::vector<std::string> cols = {
    "vm_id",   "subscription_id", "deployment_id", "cpu_min",       "cpu_avg",
    "cpu_max", "memory",          "core_hour",     "lifetime_hours"};
  return cols;
}

inline const std::vector<std::string> &id_feature_columns() {
  static const std::vector<std::string> cols = {"vm_id", "subscription_id",
                                                "deployment_id"};
  return cols;
}

struct EncodedTrace {
  Dataset data; // raw_feature_columns(), labels 0/1
  NominalEncoding vm_ids;
  NominalEncoding subscriptions;
  NominalEncoding deployments;
};

/// Label-encodes the id columns and maps categories to 0/1. Input must be
/// cleaned; an Unknown category is a Data error.
EncodedTrace encode_records(const std::vector<VmRecord> &records);

struct AggregateOptions {
  bool drop_id_features = false;
};

/// Replaces created/deleted/core_count with lifetime_hours and core_hour.
/// Output columns follow aggregated_feature_columns() (minus the id columns
/// when they are dropped). Split tags and provenance carry over.
Dataset aggregate_features(const Dataset &raw, const AggregateOptions &options = {});
Dataset aggregate_features(const std::vector<VmRecord> &records,
                           const AggregateOptions &options = {});

enum class StatsScope { WholeData, TrainOnly };

struct ColumnStats {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

struct Normalized {
  Dataset data;
  std::vector<ColumnStats> stats;
  std::vector<std::string> warnings;
};

/// Min-max scaling per column. Constant columns map to 0 with a warning.
/// Under TrainOnly the statistics come from Train rows and every output is
/// clamped to [0,1].
Normalized minmax_normalize(const Dataset &dataset, StatsScope scope);

/// Applies previously computed statistics to one feature vector (clamped).
std::vector<double> apply_normalization(std::span<const double> features,
                                        const std::vector<ColumnStats> &stats);

struct SplitFractions {
  double train = 0.70;
  double val = 0.10;
  double test = 0.20;
};

/// Shuffles row positions with `seed` and tags them Train/Val/Test. Each
/// part receives floor(n*f) rows plus at most one leftover row.
Dataset split(const Dataset &dataset, const SplitFractions &fractions,
              std::uint64_t seed);

/// Deterministic stand-in for the Azure table. Interactive VMs draw cpu_avg
/// from [52,95] with short lifetimes, delay-insensitive ones from [5,48] with
/// long lifetimes, so at zero noise cpu_avg alone separates the classes.
std::vector<VmRecord> generate_synthetic(const SyntheticSpec &spec);

} // namespace vmclass
