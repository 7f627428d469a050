// SPDX-License-Identifier: Apache-2.0
#include "vmclass/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"

namespace vmclass {

namespace {

void require_vms(const HostSnapshot &host) {
  if (host.vms.empty())
    throw Error(ErrorCode::Data, "host '" + host.host_id + "' has no VMs to select from");
  std::vector<std::string> ids;
  for (const auto &vm : host.vms)
    ids.push_back(vm.vm_id);
  std::sort(ids.begin(), ids.end());
  if (const auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end())
    throw Error(ErrorCode::Data, "host '" + host.host_id + "' lists VM '" + *dup + "' twice");
}

enum class Direction { Ascending, Descending };

// Orders entries by score in the given direction, then by vm_id.
MigrationRanking finish(const HostSnapshot &host, Policy policy,
                        std::vector<RankedVm> entries, Direction dir) {
  std::sort(entries.begin(), entries.end(), [dir](const RankedVm &a, const RankedVm &b) {
    if (a.score != b.score)
      return dir == Direction::Ascending ? a.score < b.score : a.score > b.score;
    return a.vm_id < b.vm_id;
  });
  return {host.host_id, policy, std::move(entries)};
}

std::vector<double> parse_number_list(const std::string &text, const std::string &where) {
  std::vector<double> out;
  for (const auto &part : csv::split(csv::trim(text), ',')) {
    const auto v = csv::parse_double(part);
    if (!v)
      throw Error(ErrorCode::Row, where + ": malformed number '" + part + "'");
    out.push_back(*v);
  }
  return out;
}

std::string join_numbers(const std::vector<double> &values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i)
      out.push_back(',');
    out += csv::format_double(values[i]);
  }
  return out;
}

} // namespace

std::string_view to_string(Policy p) {
  switch (p) {
  case Policy::Random:
    return "random";
  case Policy::MinMigrationTime:
    return "min_migration_time";
  case Policy::MinUtilization:
    return "min_utilization";
  case Policy::MaxCorrelation:
    return "max_correlation";
  case Policy::UtilizationSlope:
    return "utilization_slope";
  case Policy::ClassifierFirst:
    return "classifier_first";
  }
  return "unknown";
}

const std::vector<Policy> &all_policies() {
  static const std::vector<Policy> policies = {
    Policy::Random,         Policy::MinMigrationTime, Policy::MinUtilization,
    Policy::MaxCorrelation, Policy::UtilizationSlope, Policy::ClassifierFirst};
  return policies;
}

Policy parse_policy(std::string_view text) {
  for (Policy p : all_policies())
    if (csv::lower(text) == to_string(p))
      return p;
  std::string valid;
  for (Policy p : all_policies())
    valid += (valid.empty() ? "" : ", ") + std::string(to_string(p));
  throw Error(ErrorCode::Usage,
              "unknown policy '" + std::string(text) + "'; valid policies: " + valid);
}

std::vector<std::string> MigrationRanking::order() const {
  std::vector<std::string> ids;
  for (const auto &e : entries)
    ids.push_back(e.vm_id);
  return ids;
}

double series_mean(std::span<const double> series) {
  if (series.empty())
    throw Error(ErrorCode::Data, "mean of an empty series");
  return std::accumulate(series.begin(), series.end(), 0.0) /
         static_cast<double>(series.size());
}

double pearson(std::span<const double> a, std::span<const double> b, bool *degenerate) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorCode::Data, "correlation needs two series of equal length >= 2");
  const double ma = series_mean(a), mb = series_mean(b);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  const bool flat = saa == 0.0 || sbb == 0.0;
  if (degenerate)
    *degenerate = flat;
  return flat ? 0.0 : sab / std::sqrt(saa * sbb);
}

double least_squares_slope(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2)
    throw Error(ErrorCode::Data, "slope needs at least 2 samples");
  const double mx = static_cast<double>(n - 1) / 2.0;
  const double my = series_mean(series);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (series[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::vector<int> classify_vms(const ModelState &model, std::span<const VmRuntime> vms) {
  if (vms.empty())
    return {};
  const std::size_t d = model.arch.input_len;
  NumericGrid x({vms.size(), d});
  for (std::size_t i = 0; i < vms.size(); ++i) {
    if (vms[i].features.size() != d)
      throw Error(ErrorCode::Shape, "VM '" + vms[i].vm_id + "' has " +
                                      std::to_string(vms[i].features.size()) +
                                      " features, classifier expects " + std::to_string(d));
    std::copy(vms[i].features.begin(), vms[i].features.end(), x.row(i).begin());
  }
  return predict(model, x);
}

MigrationRanking select_random(const HostSnapshot &host, std::uint64_t seed) {
  require_vms(host);
  std::vector<std::string> ids;
  for (const auto &vm : host.vms)
    ids.push_back(vm.vm_id);
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  MigrationRanking r{host.host_id, Policy::Random, {}};
  for (std::size_t i = 0; i < ids.size(); ++i)
    r.entries.push_back({ids[i], static_cast<double>(i), -1, false});
  return r;
}

MigrationRanking select_min_migration_time(const HostSnapshot &host) {
  require_vms(host);
  if (!(host.bandwidth > 0.0) || !std::isfinite(host.bandwidth))
    throw Error(ErrorCode::Data, "host '" + host.host_id + "' needs a positive bandwidth");
  std::vector<RankedVm> entries;
  for (const auto &vm : host.vms)
    entries.push_back({vm.vm_id, vm.memory_used / host.bandwidth, -1, false});
  return finish(host, Policy::MinMigrationTime, std::move(entries), Direction::Ascending);
}

MigrationRanking select_min_utilization(const HostSnapshot &host) {
  require_vms(host);
  std::vector<RankedVm> entries;
  for (const auto &vm : host.vms) {
    if (vm.cpu_series.empty())
      throw Error(ErrorCode::Data, "VM '" + vm.vm_id + "' has an empty CPU series");
    entries.push_back({vm.vm_id, series_mean(vm.cpu_series), -1, false});
  }
  return finish(host, Policy::MinUtilization, std::move(entries), Direction::Ascending);
}

MigrationRanking select_max_correlation(const HostSnapshot &host, CorrelationTarget target) {
  require_vms(host);
  if (host.vms.size() < 2)
    throw Error(ErrorCode::Data, "maximum correlation needs at least 2 VMs");
  const std::size_t len = host.vms.front().cpu_series.size();
  for (const auto &vm : host.vms)
    if (vm.cpu_series.size() != len || len < 2)
      throw Error(ErrorCode::Data, "maximum correlation needs equal-length CPU series (>= 2)");
  std::vector<double> total(len, 0.0);
  for (const auto &vm : host.vms)
    for (std::size_t t = 0; t < len; ++t)
      total[t] += vm.cpu_series[t];

  std::vector<RankedVm> entries;
  std::vector<double> reference(len);
  for (const auto &vm : host.vms) {
    if (target == CorrelationTarget::LeaveOneOut) {
      // Summed directly rather than total - own to keep the oracle exact.
      std::fill(reference.begin(), reference.end(), 0.0);
      for (const auto &other : host.vms)
        if (&other != &vm)
          for (std::size_t t = 0; t < len; ++t)
            reference[t] += other.cpu_series[t];
    } else {
      reference = total;
    }
    bool degenerate = false;
    const double r = pearson(vm.cpu_series, reference, &degenerate);
    entries.push_back({vm.vm_id, r, -1, degenerate});
  }
  return finish(host, Policy::MaxCorrelation, std::move(entries), Direction::Descending);
}

MigrationRanking select_utilization_slope(const HostSnapshot &host) {
  require_vms(host);
  std::vector<RankedVm> entries;
  for (const auto &vm : host.vms) {
    if (vm.cpu_series.size() < 2)
      throw Error(ErrorCode::Data, "VM '" + vm.vm_id + "' needs at least 2 CPU samples");
    entries.push_back({vm.vm_id, least_squares_slope(vm.cpu_series), -1, false});
  }
  return finish(host, Policy::UtilizationSlope, std::move(entries), Direction::Descending);
}

MigrationRanking select_classifier_first(const HostSnapshot &host, const ModelState &model) {
  auto ranking = select_min_migration_time(host);
  const auto classes = classify_vms(model, host.vms);
  for (auto &e : ranking.entries) {
    const auto it = std::find_if(host.vms.begin(), host.vms.end(),
                                 [&e](const VmRuntime &vm) { return vm.vm_id == e.vm_id; });
    e.predicted_class = classes[static_cast<std::size_t>(it - host.vms.begin())];
  }
  // Stable on top of the (time, id) order, so only the class key is added.
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankedVm &a, const RankedVm &b) {
                     return a.predicted_class < b.predicted_class;
                   });
  ranking.policy = Policy::ClassifierFirst;
  return ranking;
}

MigrationRanking rank_host(const HostSnapshot &host, Policy policy,
                           const SelectionOptions &options) {
  MigrationRanking r;
  switch (policy) {
  case Policy::Random:
    r = select_random(host, options.seed);
    break;
  case Policy::MinMigrationTime:
    r = select_min_migration_time(host);
    break;
  case Policy::MinUtilization:
    r = select_min_utilization(host);
    break;
  case Policy::MaxCorrelation:
    r = select_max_correlation(host, options.correlation_target);
    break;
  case Policy::UtilizationSlope:
    r = select_utilization_slope(host);
    break;
  case Policy::ClassifierFirst:
    if (!options.model)
      throw Error(ErrorCode::Usage, "classifier_first needs a trained model");
    return select_classifier_first(host, *options.model);
  }
  if (options.model) {
    const auto classes = classify_vms(*options.model, host.vms);
    for (auto &e : r.entries)
      for (std::size_t i = 0; i < host.vms.size(); ++i)
        if (host.vms[i].vm_id == e.vm_id)
          e.predicted_class = classes[i];
  }
  return r;
}

std::vector<HostSnapshot> read_hosts(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read host file " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::Schema, path.string() + ": missing header");
  const std::vector<std::string> expected = {"host_id",     "bandwidth",  "vm_id",
                                             "memory_used", "cpu_series", "features"};
  auto header = csv::split_line(line);
  for (auto &h : header)
    h = csv::lower(csv::trim(h));
  if (header != expected)
    throw Error(ErrorCode::Schema,
                path.string() + ": header must be " + csv::join(expected));

  std::vector<HostSnapshot> hosts;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty())
      continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto f = csv::split_line(line);
    if (f.size() != expected.size())
      throw Error(ErrorCode::Row, where + ": expected 6 fields");
    const auto bandwidth = csv::parse_double(f[1]);
    const auto memory = csv::parse_double(f[3]);
    if (!bandwidth || !memory)
      throw Error(ErrorCode::Row, where + ": malformed bandwidth or memory");
    VmRuntime vm{f[2], *memory, parse_number_list(f[4], where), parse_number_list(f[5], where)};
    for (double v : vm.cpu_series)
      if (v < 0.0 || v > 100.0)
        throw Error(ErrorCode::Row, where + ": CPU samples must lie in [0,100]");
    auto it = std::find_if(hosts.begin(), hosts.end(),
                           [&](const HostSnapshot &h) { return h.host_id == f[0]; });
    if (it == hosts.end()) {
      hosts.push_back({f[0], *bandwidth, {}});
      it = hosts.end() - 1;
    } else if (it->bandwidth != *bandwidth) {
      throw Error(ErrorCode::Row, where + ": bandwidth differs from earlier rows of host " + f[0]);
    }
    it->vms.push_back(std::move(vm));
  }
  return hosts;
}

void write_hosts(const std::filesystem::path &path, const std::vector<HostSnapshot> &hosts) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "host_id,bandwidth,vm_id,memory_used,cpu_series,features\n";
  for (const auto &h : hosts)
    for (const auto &vm : h.vms)
      out << csv::join({h.host_id, csv::format_double(h.bandwidth), vm.vm_id,
                        csv::format_double(vm.memory_used), join_numbers(vm.cpu_series),
                        join_numbers(vm.features)})
          << '\n';
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

void write_rankings(const std::filesystem::path &path,
                    const std::vector<MigrationRanking> &rankings) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "host_id,rank,vm_id,score,class,policy\n";
  for (const auto &r : rankings)
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      const auto &e = r.entries[i];
      out << csv::join({r.host_id, std::to_string(i + 1), e.vm_id, csv::format_double(e.score),
                        e.predicted_class < 0 ? std::string() : std::to_string(e.predicted_class),
                        std::string(to_string(r.policy))})
          << '\n';
    }
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

} // namespace vmclass
