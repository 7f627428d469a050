// SPDX-License-Identifier: Apache-2.0
#include "vmclass/trace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <unordered_map>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"

namespace vmclass {

std::string_view to_string(Category c) {
  switch (c) {
  case Category::DelayInsensitive:
    return "Delay-insensitive";
  case Category::Interactive:
    return "Interactive";
  case Category::Unknown:
    break;
  }
  return "Unknown";
}

Category parse_category(std::string_view text) {
  const auto key = csv::squash(text);
  if (key == "delayinsensitive")
    return Category::DelayInsensitive;
  if (key == "interactive")
    return Category::Interactive;
  return Category::Unknown;
}

namespace {

enum Field : std::size_t {
  kVmId,
  kSubscription,
  kDeployment,
  kCreated,
  kDeleted,
  kCpuMin,
  kCpuAvg,
  kCpuMax,
  kCoreCount,
  kMemory,
  kCategory,
  kFieldCount
};

constexpr std::array<std::string_view, kFieldCount> kCanonicalHeader = {
  "vm_id",   "subscription_id", "deployment_id", "created",
  "deleted", "cpu_min",         "cpu_avg",       "cpu_max",
  "core_count", "memory",       "category"};

// Squashed aliases per field. The third CPU column is min in the described
// schema but p95 of max in some public releases of the table.
const std::array<std::vector<std::string_view>, kFieldCount> kAliases = {{
  {"vmid"},
  {"subscriptionid"},
  {"deploymentid"},
  {"created", "vmcreated", "timestampvmcreated"},
  {"deleted", "vmdeleted", "timestampvmdeleted"},
  {"cpumin", "mincpu", "p95maxcpu", "cpup95"},
  {"cpuavg", "avgcpu"},
  {"cpumax", "maxcpu"},
  {"corecount", "vmcorecount", "vmvirtualcorecount"},
  {"memory", "vmmemory"},
  {"category", "vmcategory"},
}};

std::array<std::size_t, kFieldCount>
resolve_header(const std::vector<std::string> &header, const std::string &where) {
  std::array<std::size_t, kFieldCount> pos;
  pos.fill(static_cast<std::size_t>(-1));
  for (std::size_t col = 0; col < header.size(); ++col) {
    const auto key = csv::squash(header[col]);
    for (std::size_t f = 0; f < kFieldCount; ++f) {
      const auto &aliases = kAliases[f];
      if (std::find(aliases.begin(), aliases.end(), key) != aliases.end()) {
        if (pos[f] != static_cast<std::size_t>(-1))
          throw Error(ErrorCode::Schema, where + ": duplicate column for '" +
                                           std::string(kCanonicalHeader[f]) + "'");
        pos[f] = col;
      }
    }
  }
  for (std::size_t f = 0; f < kFieldCount; ++f)
    if (pos[f] == static_cast<std::size_t>(-1))
      throw Error(ErrorCode::Schema, where + ": missing column '" +
                                       std::string(kCanonicalHeader[f]) + "'");
  return pos;
}

// Returns the name of the first malformed numeric field, if any.
std::optional<std::string_view>
fill_record(const std::vector<std::string> &fields,
            const std::array<std::size_t, kFieldCount> &pos, VmRecord &rec) {
  rec.vm_id = fields[pos[kVmId]];
  rec.subscription_id = fields[pos[kSubscription]];
  rec.deployment_id = fields[pos[kDeployment]];
  rec.category = parse_category(fields[pos[kCategory]]);
  const std::array<std::pair<Field, double *>, 7> numeric = {{
    {kCreated, &rec.created},
    {kDeleted, &rec.deleted},
    {kCpuMin, &rec.cpu_min},
    {kCpuAvg, &rec.cpu_avg},
    {kCpuMax, &rec.cpu_max},
    {kCoreCount, &rec.core_count},
    {kMemory, &rec.memory},
  }};
  for (const auto &[field, target] : numeric) {
    const auto v = csv::parse_double(fields[pos[field]]);
    if (!v)
      return kCanonicalHeader[field];
    *target = *v;
  }
  return std::nullopt;
}

std::vector<VmRecord> parse_csv(const std::filesystem::path &path,
                                const ParseOptions &options, ParseReport *report) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read trace file " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorCode::Schema, path.string() + ": empty file, expected a header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
    line.erase(0, 3);
  const auto header = csv::split_line(line);
  const auto pos = resolve_header(header, path.string());
  const std::size_t needed = *std::max_element(pos.begin(), pos.end()) + 1;

  std::vector<VmRecord> records;
  ParseReport local;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty())
      continue;
    ++local.data_rows;
    const auto fields = csv::split_line(line);
    std::optional<std::string> problem;
    VmRecord rec;
    if (fields.size() < needed) {
      problem = "expected " + std::to_string(header.size()) + " fields, got " +
                std::to_string(fields.size());
    } else if (auto bad = fill_record(fields, pos, rec)) {
      problem = "malformed number in column '" + std::string(*bad) + "'";
    }
    if (problem) {
      if (!options.skip_bad_rows)
        throw Error(ErrorCode::Row,
                    path.string() + ":" + std::to_string(line_no) + ": " + *problem);
      local.skipped_lines.push_back(line_no);
      continue;
    }
    records.push_back(std::move(rec));
  }
  if (report)
    *report = std::move(local);
  return records;
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace

std::vector<VmRecord> parse_trace(const TraceSource &source,
                                  const ParseOptions &options, ParseReport *report) {
  if (source.format == TraceSource::Format::Synthetic) {
    auto records = generate_synthetic(source.synthetic);
    if (report) {
      report->data_rows = records.size();
      report->skipped_lines.clear();
    }
    return records;
  }
  return parse_csv(source.path, options, report);
}

void write_trace(const std::filesystem::path &path,
                 const std::vector<VmRecord> &records) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << csv::join({kCanonicalHeader.begin(), kCanonicalHeader.end()}) << '\n';
  for (const auto &r : records) {
    out << csv::join({r.vm_id, r.subscription_id, r.deployment_id,
                      csv::format_double(r.created), csv::format_double(r.deleted),
                      csv::format_double(r.cpu_min), csv::format_double(r.cpu_avg),
                      csv::format_double(r.cpu_max), csv::format_double(r.core_count),
                      csv::format_double(r.memory), std::string(to_string(r.category))})
        << '\n';
  }
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

std::vector<VmRecord> clean(const std::vector<VmRecord> &records) {
  std::vector<VmRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [](const VmRecord &r) { return r.category != Category::Unknown; });
  return out;
}

NominalEncoding encode_nominal(const std::vector<std::string> &column) {
  NominalEncoding enc;
  enc.codes.reserve(column.size());
  std::unordered_map<std::string, int> seen;
  for (const auto &value : column) {
    auto [it, inserted] = seen.try_emplace(value, static_cast<int>(enc.values.size()));
    if (inserted)
      enc.values.push_back(value);
    enc.codes.push_back(it->second);
  }
  return enc;
}

EncodedTrace encode_records(const std::vector<VmRecord> &records) {
  std::vector<std::string> vm, sub, dep;
  vm.reserve(records.size());
  sub.reserve(records.size());
  dep.reserve(records.size());
  for (const auto &r : records) {
    vm.push_back(r.vm_id);
    sub.push_back(r.subscription_id);
    dep.push_back(r.deployment_id);
  }
  EncodedTrace out;
  out.vm_ids = encode_nominal(vm);
  out.subscriptions = encode_nominal(sub);
  out.deployments = encode_nominal(dep);

  std::vector<double> flat;
  flat.reserve(records.size() * raw_feature_columns().size());
  std::vector<int> labels;
  labels.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto &r = records[i];
    if (r.category == Category::Unknown)
      throw Error(ErrorCode::Data, "record " + std::to_string(i) +
                                     " has an unknown category; clean before encoding");
    flat.insert(flat.end(),
                {static_cast<double>(out.vm_ids.codes[i]),
                 static_cast<double>(out.subscriptions.codes[i]),
                 static_cast<double>(out.deployments.codes[i]), r.created, r.deleted,
                 r.cpu_min, r.cpu_avg, r.cpu_max, r.core_count, r.memory});
    labels.push_back(r.category == Category::Interactive ? kInteractive
                                                         : kDelayInsensitive);
  }
  out.data = Dataset::from_rows(raw_feature_columns(), std::move(flat), std::move(labels));
  return out;
}

Dataset aggregate_features(const Dataset &raw, const AggregateOptions &options) {
  raw.validate();
  if (raw.column_names != raw_feature_columns())
    throw Error(ErrorCode::Schema, "aggregate_features expects the raw encoded columns");
  std::vector<std::string> names;
  for (const auto &c : aggregated_feature_columns()) {
    const auto &ids = id_feature_columns();
    if (options.drop_id_features && std::find(ids.begin(), ids.end(), c) != ids.end())
      continue;
    names.push_back(c);
  }
  std::vector<double> flat;
  flat.reserve(raw.rows() * names.size());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto r = raw.row(i);
    const double created = r[3], deleted = r[4];
    if (deleted < created)
      throw Error(ErrorCode::Row, "record " + std::to_string(i) +
                                    ": deleted timestamp precedes created");
    const double lifetime_hours = (deleted - created) / 3600.0;
    const double core_hour = lifetime_hours * r[8];
    if (!options.drop_id_features)
      flat.insert(flat.end(), {r[0], r[1], r[2]});
    flat.insert(flat.end(), {r[5], r[6], r[7], r[9], core_hour, lifetime_hours});
  }
  Dataset out;
  out.column_names = std::move(names);
  out.features = NumericGrid({raw.rows(), out.column_names.size()}, std::move(flat));
  out.labels = raw.labels;
  out.split = raw.split;
  out.provenance = raw.provenance;
  return out;
}

Dataset aggregate_features(const std::vector<VmRecord> &records,
                           const AggregateOptions &options) {
  return aggregate_features(encode_records(records).data, options);
}

Normalized minmax_normalize(const Dataset &dataset, StatsScope scope) {
  dataset.validate();
  std::vector<std::size_t> stat_rows;
  if (scope == StatsScope::TrainOnly) {
    stat_rows = dataset.rows_in(SplitTag::Train);
    if (stat_rows.empty())
      throw Error(ErrorCode::Data, "train-only normalization needs Train rows; split first");
  } else {
    stat_rows.resize(dataset.rows());
    std::iota(stat_rows.begin(), stat_rows.end(), std::size_t{0});
  }
  if (stat_rows.empty())
    throw Error(ErrorCode::Data, "cannot normalize an empty dataset");

  Normalized out;
  const std::size_t c = dataset.cols();
  out.stats.resize(c);
  for (std::size_t j = 0; j < c; ++j) {
    double lo = dataset.features.at(stat_rows[0], j), hi = lo;
    for (std::size_t i : stat_rows) {
      lo = std::min(lo, dataset.features.at(i, j));
      hi = std::max(hi, dataset.features.at(i, j));
    }
    out.stats[j] = {dataset.column_names[j], lo, hi};
    if (!(hi > lo))
      out.warnings.push_back("column '" + dataset.column_names[j] +
                             "' is constant; normalized to 0");
  }
  out.data = dataset;
  for (std::size_t i = 0; i < dataset.rows(); ++i) {
    auto normalized = apply_normalization(dataset.row(i), out.stats);
    std::copy(normalized.begin(), normalized.end(), out.data.features.row(i).begin());
  }
  return out;
}

std::vector<double> apply_normalization(std::span<const double> features,
                                        const std::vector<ColumnStats> &stats) {
  if (features.size() != stats.size())
    throw Error(ErrorCode::Shape, "feature vector has " + std::to_string(features.size()) +
                                    " values, normalization expects " +
                                    std::to_string(stats.size()));
  std::vector<double> out(features.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    const double range = stats[j].max - stats[j].min;
    out[j] = range > 0.0
               ? std::clamp((features[j] - stats[j].min) / range, 0.0, 1.0)
               : 0.0;
  }
  return out;
}

Dataset split(const Dataset &dataset, const SplitFractions &fractions,
              std::uint64_t seed) {
  dataset.validate();
  const std::size_t n = dataset.rows();
  if (n < 3)
    throw Error(ErrorCode::Data, "split needs at least 3 rows, got " + std::to_string(n));
  const std::array<double, 3> f = {fractions.train, fractions.val, fractions.test};
  if (std::any_of(f.begin(), f.end(), [](double x) { return x < 0.0; }) ||
      std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
    throw Error(ErrorCode::Usage, "split fractions must be non-negative and sum to 1");

  // Largest-remainder apportionment keeps every count within one of floor(n*f).
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(n) * f[k];
    counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::array<std::size_t, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned)
    ++counts[order[k % 3]];

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  Dataset out = dataset;
  for (std::size_t p = 0; p < n; ++p) {
    SplitTag tag = SplitTag::Test;
    if (p < counts[0])
      tag = SplitTag::Train;
    else if (p < counts[0] + counts[1])
      tag = SplitTag::Val;
    out.split[perm[p]] = tag;
  }
  return out;
}

std::vector<VmRecord> generate_synthetic(const SyntheticSpec &spec) {
  if (spec.n < 4)
    throw Error(ErrorCode::Usage, "synthetic trace needs n >= 4");
  if (!(spec.class_ratio > 0.0 && spec.class_ratio < 1.0))
    throw Error(ErrorCode::Usage, "class ratio must lie in (0,1)");
  if (spec.noise < 0.0 || spec.noise > 1.0 || spec.unknown_fraction < 0.0 ||
      spec.unknown_fraction >= 1.0)
    throw Error(ErrorCode::Usage, "noise must lie in [0,1] and unknown fraction in [0,1)");

  const auto n_unknown =
    static_cast<std::size_t>(std::floor(static_cast<double>(spec.n) * spec.unknown_fraction));
  const std::size_t n_known = spec.n - n_unknown;
  const auto n_interactive =
    static_cast<std::size_t>(std::llround(static_cast<double>(n_known) * spec.class_ratio));

  std::vector<Category> cats(spec.n, Category::DelayInsensitive);
  std::fill_n(cats.begin(), n_interactive, Category::Interactive);
  std::fill_n(cats.begin() + static_cast<std::ptrdiff_t>(n_known), n_unknown,
              Category::Unknown);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(cats.begin(), cats.end(), rng);

  constexpr std::array<double, 4> kCores = {1, 2, 4, 8};
  constexpr std::array<double, 3> kMemPerCore = {0.75, 1.75, 3.5};
  const std::size_t n_subscriptions = 16;
  const std::size_t n_deployments = std::max<std::size_t>(1, spec.n / 8);

  std::vector<VmRecord> out;
  out.reserve(spec.n);
  char hex[32];
  for (std::size_t i = 0; i < spec.n; ++i) {
    VmRecord r;
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(rng()));
    r.vm_id = std::string("vm-") + hex;
    r.subscription_id = "sub-" + std::to_string(rng() % n_subscriptions);
    r.deployment_id = "dep-" + std::to_string(rng() % n_deployments);

    // Unknown records look like either class.
    const bool interactive_shape =
      cats[i] == Category::Interactive ||
      (cats[i] == Category::Unknown && uniform(rng, 0.0, 1.0) < 0.5);
    const double lifetime_h =
      interactive_shape ? uniform(rng, 0.5, 48.0) : uniform(rng, 24.0, 720.0);
    r.created = std::floor(uniform(rng, 0.0, 30.0 * 86400.0));
    r.deleted = r.created + std::round(lifetime_h * 3600.0);
    r.cpu_avg = interactive_shape ? uniform(rng, 52.0, 95.0) : uniform(rng, 5.0, 48.0);
    r.cpu_min = r.cpu_avg * uniform(rng, 0.1, 0.9);
    r.cpu_max = r.cpu_avg + (100.0 - r.cpu_avg) * uniform(rng, 0.1, 1.0);
    r.core_count = kCores[rng() % kCores.size()];
    r.memory = r.core_count * kMemPerCore[rng() % kMemPerCore.size()];

    const bool flip = uniform(rng, 0.0, 1.0) < spec.noise;
    r.category = cats[i];
    if (flip && r.category != Category::Unknown)
      r.category = r.category == Category::Interactive ? Category::DelayInsensitive
                                                       : Category::Interactive;
    out.push_back(std::move(r));
  }
  return out;
}

} // namespace vmclass
