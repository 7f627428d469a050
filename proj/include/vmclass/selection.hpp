// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vmclass/model.hpp"

namespace vmclass {

struct VmRuntime {
  std::string vm_id;
  double memory_used = 0.0;       // GB
  std::vector<double> cpu_series; // percent, one sample per 5 minutes
  std::vector<double> features;   // normalized classifier input
};

struct HostSnapshot {
  std::string host_id;
  double bandwidth = 1.0; // GB/s
  std::vector<VmRuntime> vms;
};

enum class Policy {
  Random,
  MinMigrationTime,
  MinUtilization,
  MaxCorrelation,
  UtilizationSlope,
  ClassifierFirst,
};

std::string_view to_string(Policy p);
Policy parse_policy(std::string_view text);
const std::vector<Policy> &all_policies();

struct RankedVm {
  std::string vm_id;
  double score = 0.0;
  int predicted_class = -1; // -1 when no classifier was consulted
  bool flagged = false;     // score fell back to a default (zero variance)
};

/// Full ordering of a host's VMs; the head is the migration pick.
struct MigrationRanking {
  std::string host_id;
  Policy policy = Policy::Random;
  std::vector<RankedVm> entries;

  std::vector<std::string> order() const;
};

enum class CorrelationTarget {
  LeaveOneOut, // sum of every other VM's series
  HostTotal,   // sum of all series including the VM's own
};

double series_mean(std::span<const double> series);

/// Pearson correlation; 0 with `degenerate` set when either side is constant.
double pearson(std::span<const double> a, std::span<const double> b,
               bool *degenerate = nullptr);

/// Least-squares slope of the series against its sample index.
double least_squares_slope(std::span<const double> series);

/// Eval-mode classification of each VM's feature vector.
std::vector<int> classify_vms(const ModelState &model, std::span<const VmRuntime> vms);

/// Uniform permutation drawn from `seed` over the VMs sorted by id.
MigrationRanking select_random(const HostSnapshot &host, std::uint64_t seed);
/// memory_used / bandwidth, ascending.
MigrationRanking select_min_migration_time(const HostSnapshot &host);
/// Mean CPU utilization, ascending.
MigrationRanking select_min_utilization(const HostSnapshot &host);
/// Correlation with the reference series, descending.
MigrationRanking select_max_correlation(const HostSnapshot &host,
                                        CorrelationTarget target = CorrelationTarget::LeaveOneOut);
/// Least-squares utilization slope, descending.
MigrationRanking select_utilization_slope(const HostSnapshot &host);
/// Delay-insensitive VMs first, then by migration time within each class.
MigrationRanking select_classifier_first(const HostSnapshot &host, const ModelState &model);

struct SelectionOptions {
  std::uint64_t seed = 42;
  CorrelationTarget correlation_target = CorrelationTarget::LeaveOneOut;
  /// When set, every ranking also carries the predicted class per VM.
  const ModelState *model = nullptr;
};

MigrationRanking rank_host(const HostSnapshot &host, Policy policy,
                           const SelectionOptions &options);

/// CSV with header host_id,bandwidth,vm_id,memory_used,cpu_series,features;
/// the last two fields hold comma-joined numbers inside quotes. Rows sharing a
/// host_id form one snapshot, in order of first appearance.
std::vector<HostSnapshot> read_hosts(const std::filesystem::path &path);
void write_hosts(const std::filesystem::path &path, const std::vector<HostSnapshot> &hosts);

/// host_id,rank,vm_id,score,class,policy
void write_rankings(const std::filesystem::path &path,
                    const std::vector<MigrationRanking> &rankings);

} // namespace vmclass
