// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vmclass/grid.hpp"

namespace vmclass {

enum class SplitTag { Unassigned, Train, Val, Test };
enum class Provenance { Real, Synthetic, Duplicate };

std::string_view to_string(SplitTag tag);
std::string_view to_string(Provenance p);
SplitTag parse_split_tag(std::string_view text);
Provenance parse_provenance(std::string_view text);

/// Class label 0 is delay-insensitive, 1 is interactive (delay-sensitive).
inline constexpr int kDelayInsensitive = 0;
inline constexpr int kInteractive = 1;

/// Numeric feature matrix with one label, split tag and provenance per row.
struct Dataset {
  NumericGrid features; // [rows, cols]
  std::vector<int> labels;
  std::vector<std::string> column_names;
  std::vector<SplitTag> split;
  std::vector<Provenance> provenance;

  static Dataset from_rows(std::vector<std::string> column_names,
                           std::vector<double> flat_features,
                           std::vector<int> labels);

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t cols() const noexcept { return column_names.size(); }

  std::span<const double> row(std::size_t i) const { return features.row(i); }

  /// Throws a Data error if the per-row vectors disagree in length.
  void validate() const;

  std::size_t count_label(int label) const;
  std::size_t count_split(SplitTag tag) const;
  std::vector<std::size_t> rows_in(SplitTag tag) const;

  /// Rows in the given order (indices may repeat).
  Dataset select_rows(std::span<const std::size_t> indices) const;

  /// Row-wise concatenation; column names must match.
  static Dataset concat(const Dataset &a, const Dataset &b);

  std::size_t column_index(std::string_view name) const;
};

/// Ordered key=value pairs written next to persisted datasets and runs.
using Metadata = std::vector<std::pair<std::string, std::string>>;

/// Writes `<path>` (CSV with feature columns then label, split, provenance)
/// and `<path>.meta` (key=value lines).
void write_dataset(const std::filesystem::path &path, const Dataset &dataset,
                   const Metadata &metadata);

Dataset read_dataset(const std::filesystem::path &path);

void write_metadata(const std::filesystem::path &path, const Metadata &metadata);
Metadata read_metadata(const std::filesystem::path &path);

/// FNV-1a over features, labels and split tags.
std::uint64_t dataset_hash(const Dataset &dataset);

} // namespace vmclass
