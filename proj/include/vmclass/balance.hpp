// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "vmclass/dataset.hpp"

namespace vmclass {

struct BalanceMethod {
  enum class Kind { Smote, RandomUnder, RandomOver };

  Kind kind = Kind::Smote;
  std::size_t k = 5; // SMOTE neighbour count
  std::uint64_t seed = 42;
};

std::string_view to_string(BalanceMethod::Kind kind);
BalanceMethod::Kind parse_balance_kind(std::string_view text);

/// D_i + (D_l - D_i) * delta, coordinate-wise.
std::vector<double> interpolate(std::span<const double> base,
                                std::span<const double> neighbour, double delta);

/// For each listed row, its k nearest rows among `candidates` (excluding
/// itself) under Euclidean distance; ties go to the lower row index.
/// Result[i] holds dataset row indices ordered by distance.
std::vector<std::vector<std::size_t>>
nearest_neighbours(const Dataset &dataset, std::span<const std::size_t> candidates,
                   std::size_t k);

struct SmoteOutput {
  Dataset data;
  /// (base row, neighbour row) for every appended synthetic row, in order.
  std::vector<std::pair<std::size_t, std::size_t>> parents;
  std::vector<double> deltas;
};

/// Appends exactly (majority - minority) synthetic minority rows. Base rows
/// are taken round-robin over the minority class; the neighbour is drawn
/// uniformly among its k nearest minority rows and delta ~ U[0,1].
SmoteOutput smote_detailed(const Dataset &dataset, std::size_t k, std::uint64_t seed);
Dataset smote(const Dataset &dataset, std::size_t k, std::uint64_t seed);

/// Keeps a uniformly drawn majority subset the size of the minority class.
/// Survivors keep their original relative order.
Dataset random_under(const Dataset &dataset, std::uint64_t seed);

/// Appends minority rows drawn with replacement until the classes match.
Dataset random_over(const Dataset &dataset, std::uint64_t seed);

Dataset balance(const Dataset &dataset, const BalanceMethod &method);

} // namespace vmclass
