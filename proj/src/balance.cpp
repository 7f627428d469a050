// SPDX-License-Identifier: Apache-2.0
#include "vmclass/balance.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"

namespace vmclass {

namespace {

struct ClassSplit {
  int minority_label;
  std::vector<std::size_t> minority;
  std::vector<std::size_t> majority;
};

ClassSplit split_classes(const Dataset &dataset) {
  dataset.validate();
  std::vector<std::size_t> zeros, ones;
  for (std::size_t i = 0; i < dataset.rows(); ++i)
    (dataset.labels[i] == kInteractive ? ones : zeros).push_back(i);
  if (zeros.empty() || ones.empty())
    throw Error(ErrorCode::Data, "balancing needs both classes present");
  // Class 1 counts as minority on a tie; balancing is then a no-op anyway.
  if (ones.size() <= zeros.size())
    return {kInteractive, std::move(ones), std::move(zeros)};
  return {kDelayInsensitive, std::move(zeros), std::move(ones)};
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

Dataset append_rows(const Dataset &dataset, const std::vector<double> &flat,
                    int label, Provenance provenance, SplitTag tag) {
  const std::size_t extra = flat.size() / std::max<std::size_t>(1, dataset.cols());
  Dataset added = Dataset::from_rows(dataset.column_names, flat,
                                     std::vector<int>(extra, label));
  std::fill(added.provenance.begin(), added.provenance.end(), provenance);
  std::fill(added.split.begin(), added.split.end(), tag);
  return Dataset::concat(dataset, added);
}

} // namespace

std::string_view to_string(BalanceMethod::Kind kind) {
  switch (kind) {
  case BalanceMethod::Kind::RandomUnder:
    return "rus";
  case BalanceMethod::Kind::RandomOver:
    return "ros";
  case BalanceMethod::Kind::Smote:
    break;
  }
  return "smote";
}

BalanceMethod::Kind parse_balance_kind(std::string_view text) {
  const auto t = csv::squash(text);
  if (t == "smote")
    return BalanceMethod::Kind::Smote;
  if (t == "rus" || t == "randomunder")
    return BalanceMethod::Kind::RandomUnder;
  if (t == "ros" || t == "randomover")
    return BalanceMethod::Kind::RandomOver;
  throw Error(ErrorCode::Usage, "unknown balance method '" + std::string(text) +
                                  "' (expected smote, rus or ros)");
}

std::vector<double> interpolate(std::span<const double> base,
                                std::span<const double> neighbour, double delta) {
  std::vector<double> out(base.size());
  for (std::size_t j = 0; j < base.size(); ++j)
    out[j] = base[j] + (neighbour[j] - base[j]) * delta;
  return out;
}

std::vector<std::vector<std::size_t>>
nearest_neighbours(const Dataset &dataset, std::span<const std::size_t> candidates,
                   std::size_t k) {
  if (k == 0 || k >= candidates.size())
    throw Error(ErrorCode::Data, "neighbour count k=" + std::to_string(k) +
                                   " must satisfy 1 <= k < " +
                                   std::to_string(candidates.size()));
  std::vector<std::vector<std::size_t>> out(candidates.size());
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(candidates.size());
  for (std::size_t a = 0; a < candidates.size(); ++a) {
    dist.clear();
    const auto row_a = dataset.row(candidates[a]);
    for (std::size_t b = 0; b < candidates.size(); ++b) {
      if (b == a)
        continue;
      dist.emplace_back(squared_distance(row_a, dataset.row(candidates[b])), candidates[b]);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    out[a].reserve(k);
    for (std::size_t j = 0; j < k; ++j)
      out[a].push_back(dist[j].second);
  }
  return out;
}

SmoteOutput smote_detailed(const Dataset &dataset, std::size_t k, std::uint64_t seed) {
  auto classes = split_classes(dataset);
  if (k == 0 || k >= classes.minority.size())
    throw Error(ErrorCode::Data, "SMOTE needs 1 <= k < minority size (k=" +
                                   std::to_string(k) + ", minority=" +
                                   std::to_string(classes.minority.size()) + ")");
  const std::size_t deficit = classes.majority.size() - classes.minority.size();
  SmoteOutput out;
  if (deficit == 0) {
    out.data = dataset;
    return out;
  }
  const auto neighbours = nearest_neighbours(dataset, classes.minority, k);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> flat;
  flat.reserve(deficit * dataset.cols());
  out.parents.reserve(deficit);
  out.deltas.reserve(deficit);
  for (std::size_t s = 0; s < deficit; ++s) {
    const std::size_t slot = s % classes.minority.size();
    const std::size_t base = classes.minority[slot];
    const std::size_t neighbour = neighbours[slot][pick(rng)];
    const double delta = unit(rng);
    const auto row = interpolate(dataset.row(base), dataset.row(neighbour), delta);
    flat.insert(flat.end(), row.begin(), row.end());
    out.parents.emplace_back(base, neighbour);
    out.deltas.push_back(delta);
  }
  out.data = append_rows(dataset, flat, classes.minority_label, Provenance::Synthetic,
                         dataset.split[classes.minority.front()]);
  return out;
}

Dataset smote(const Dataset &dataset, std::size_t k, std::uint64_t seed) {
  return smote_detailed(dataset, k, seed).data;
}

Dataset random_under(const Dataset &dataset, std::uint64_t seed) {
  auto classes = split_classes(dataset);
  std::mt19937_64 rng(seed);
  std::shuffle(classes.majority.begin(), classes.majority.end(), rng);
  classes.majority.resize(classes.minority.size());
  std::vector<std::size_t> keep = classes.minority;
  keep.insert(keep.end(), classes.majority.begin(), classes.majority.end());
  std::sort(keep.begin(), keep.end());
  return dataset.select_rows(keep);
}

Dataset random_over(const Dataset &dataset, std::uint64_t seed) {
  const auto classes = split_classes(dataset);
  const std::size_t deficit = classes.majority.size() - classes.minority.size();
  if (deficit == 0)
    return dataset;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, classes.minority.size() - 1);
  std::vector<double> flat;
  flat.reserve(deficit * dataset.cols());
  for (std::size_t s = 0; s < deficit; ++s) {
    const auto row = dataset.row(classes.minority[pick(rng)]);
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return append_rows(dataset, flat, classes.minority_label, Provenance::Duplicate,
                     dataset.split[classes.minority.front()]);
}

Dataset balance(const Dataset &dataset, const BalanceMethod &method) {
  switch (method.kind) {
  case BalanceMethod::Kind::RandomUnder:
    return random_under(dataset, method.seed);
  case BalanceMethod::Kind::RandomOver:
    return random_over(dataset, method.seed);
  case BalanceMethod::Kind::Smote:
    break;
  }
  return smote(dataset, method.k, method.seed);
}

} // namespace vmclass
