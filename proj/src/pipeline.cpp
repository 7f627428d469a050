// SPDX-License-Identifier: Apache-2.0
#include "vmclass/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"
#include "vmclass/report.hpp"

namespace vmclass {

namespace {

namespace pt = boost::property_tree;

bool parse_bool(const std::string &key, const std::string &value) {
  const auto v = csv::lower(csv::trim(value));
  if (v == "1" || v == "true" || v == "yes" || v == "on")
    return true;
  if (v == "0" || v == "false" || v == "no" || v == "off")
    return false;
  throw Error(ErrorCode::Usage, "config " + key + ": expected a boolean, got '" + value + "'");
}

double parse_real(const std::string &key, const std::string &value) {
  const auto v = csv::parse_double(value);
  if (!v)
    throw Error(ErrorCode::Usage, "config " + key + ": expected a number, got '" + value + "'");
  return *v;
}

std::uint64_t parse_uint(const std::string &key, const std::string &value) {
  const auto v = csv::parse_double(value);
  if (!v || *v < 0.0 || *v != std::floor(*v) || *v > 1.8e19)
    throw Error(ErrorCode::Usage,
                "config " + key + ": expected a non-negative integer, got '" + value + "'");
  return static_cast<std::uint64_t>(std::stoull(std::string(csv::trim(value))));
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::vector<std::pair<std::string, std::string>> config_entries(const RunConfig &c) {
  const auto &a = c.arch;
  const auto &h = c.hp;
  return {
    {"input.path", c.input_path.string()},
    {"input.synthetic_n", std::to_string(c.synthetic.n)},
    {"input.synthetic_seed", std::to_string(c.synthetic.seed)},
    {"input.synthetic_ratio", csv::format_double(c.synthetic.class_ratio)},
    {"input.synthetic_noise", csv::format_double(c.synthetic.noise)},
    {"input.synthetic_unknown_fraction", csv::format_double(c.synthetic.unknown_fraction)},
    {"input.skip_bad_rows", bool_text(c.skip_bad_rows)},
    {"balance.method", std::string(to_string(c.balance.kind))},
    {"balance.k", std::to_string(c.balance.k)},
    {"balance.seed", std::to_string(c.balance.seed)},
    {"balance.train_only", bool_text(c.train_only_smote)},
    {"features.drop_ids", bool_text(c.drop_id_features)},
    {"features.normalization", c.train_only_normalization ? "train" : "whole"},
    {"split.train", csv::format_double(c.fractions.train)},
    {"split.val", csv::format_double(c.fractions.val)},
    {"split.test", csv::format_double(c.fractions.test)},
    {"split.seed", std::to_string(c.split_seed)},
    {"model.conv_filters", std::to_string(a.conv_filters)},
    {"model.kernel", std::to_string(a.kernel)},
    {"model.pool", std::to_string(a.pool)},
    {"model.hidden", std::to_string(a.hidden)},
    {"model.gru_bias", a.double_bias ? "double" : "single"},
    {"train.batch_size", std::to_string(h.batch_size)},
    {"train.epochs", std::to_string(h.epochs)},
    {"train.lr", csv::format_double(h.lr)},
    {"train.dropout", csv::format_double(h.dropout)},
    {"train.n_runs", std::to_string(c.n_runs)},
    {"train.base_seed", std::to_string(c.base_seed)},
    {"train.parallel", bool_text(c.parallel)},
    {"output.dir", c.output_dir.string()},
    {"output.tag", c.resolved_tag()},
  };
}

std::string join_names(const std::vector<std::string> &values) {
  std::string out;
  for (const auto &v : values)
    out += (out.empty() ? "" : "|") + v;
  return out;
}

} // namespace

std::string RunConfig::resolved_tag() const {
  return tag.empty() ? "cnn-gru-" + std::string(to_string(balance.kind)) : tag;
}

void set_config_value(RunConfig &c, const std::string &key, const std::string &raw) {
  const std::string value(csv::trim(raw));
  if (key == "input.path")
    c.input_path = value;
  else if (key == "input.synthetic_n")
    c.synthetic.n = parse_uint(key, value);
  else if (key == "input.synthetic_seed")
    c.synthetic.seed = parse_uint(key, value);
  else if (key == "input.synthetic_ratio")
    c.synthetic.class_ratio = parse_real(key, value);
  else if (key == "input.synthetic_noise")
    c.synthetic.noise = parse_real(key, value);
  else if (key == "input.synthetic_unknown_fraction")
    c.synthetic.unknown_fraction = parse_real(key, value);
  else if (key == "input.skip_bad_rows")
    c.skip_bad_rows = parse_bool(key, value);
  else if (key == "balance.method")
    c.balance.kind = parse_balance_kind(value);
  else if (key == "balance.k")
    c.balance.k = parse_uint(key, value);
  else if (key == "balance.seed")
    c.balance.seed = parse_uint(key, value);
  else if (key == "balance.train_only")
    c.train_only_smote = parse_bool(key, value);
  else if (key == "features.drop_ids")
    c.drop_id_features = parse_bool(key, value);
  else if (key == "features.normalization") {
    const auto v = csv::lower(value);
    if (v != "whole" && v != "train")
      throw Error(ErrorCode::Usage, "config " + key + ": expected 'whole' or 'train'");
    c.train_only_normalization = v == "train";
  } else if (key == "split.train")
    c.fractions.train = parse_real(key, value);
  else if (key == "split.val")
    c.fractions.val = parse_real(key, value);
  else if (key == "split.test")
    c.fractions.test = parse_real(key, value);
  else if (key == "split.seed")
    c.split_seed = parse_uint(key, value);
  else if (key == "model.conv_filters")
    c.arch.conv_filters = parse_uint(key, value);
  else if (key == "model.kernel")
    c.arch.kernel = parse_uint(key, value);
  else if (key == "model.pool")
    c.arch.pool = parse_uint(key, value);
  else if (key == "model.hidden")
    c.arch.hidden = parse_uint(key, value);
  else if (key == "model.gru_bias") {
    const auto v = csv::lower(value);
    if (v != "double" && v != "single")
      throw Error(ErrorCode::Usage, "config " + key + ": expected 'double' or 'single'");
    c.arch.double_bias = v == "double";
  } else if (key == "train.batch_size")
    c.hp.batch_size = parse_uint(key, value);
  else if (key == "train.epochs")
    c.hp.epochs = parse_uint(key, value);
  else if (key == "train.lr")
    c.hp.lr = parse_real(key, value);
  else if (key == "train.dropout") {
    c.hp.dropout = parse_real(key, value);
    c.arch.dropout_rate = c.hp.dropout;
  } else if (key == "train.n_runs")
    c.n_runs = parse_uint(key, value);
  else if (key == "train.base_seed")
    c.base_seed = parse_uint(key, value);
  else if (key == "train.parallel")
    c.parallel = parse_bool(key, value);
  else if (key == "output.dir")
    c.output_dir = value;
  else if (key == "output.tag")
    c.tag = value;
  else
    throw Error(ErrorCode::Usage, "unknown config key '" + key + "'");
}

RunConfig load_config(const std::filesystem::path &path) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error &e) {
    throw Error(ErrorCode::Io, "cannot read config " + path.string() + ": " + e.message());
  }
  RunConfig c;
  for (const auto &[section, body] : tree) {
    if (body.empty())
      throw Error(ErrorCode::Usage, "config key '" + section + "' must sit inside a [section]");
    for (const auto &[key, leaf] : body)
      set_config_value(c, section + "." + key, leaf.data());
  }
  return c;
}

void save_config(const std::filesystem::path &path, const RunConfig &config) {
  pt::ptree tree;
  for (const auto &[key, value] : config_entries(config))
    tree.put(pt::ptree::path_type(key, '.'), value);
  try {
    pt::write_ini(path.string(), tree);
  } catch (const pt::ini_parser_error &e) {
    throw Error(ErrorCode::Io, "cannot write config " + path.string() + ": " + e.message());
  }
}

IngestResult ingest(const RunConfig &config) {
  const TraceSource source = config.input_path.empty()
                               ? TraceSource::generated(config.synthetic)
                               : TraceSource::csv(config.input_path);
  IngestResult out;
  const auto records = parse_trace(source, {config.skip_bad_rows}, &out.parse);
  out.parsed_records = records.size();
  const auto cleaned = clean(records);
  out.cleaned_records = cleaned.size();
  if (cleaned.empty())
    throw Error(ErrorCode::Data, "no records with a known category remain after cleaning");
  out.encoded = encode_records(cleaned);
  out.interactive = out.encoded.data.count_label(kInteractive);
  out.delay_insensitive = out.encoded.data.count_label(kDelayInsensitive);
  return out;
}

Metadata stats_metadata(const std::vector<ColumnStats> &stats) {
  Metadata m;
  for (const auto &s : stats) {
    m.emplace_back("min." + s.name, csv::format_double(s.min));
    m.emplace_back("max." + s.name, csv::format_double(s.max));
  }
  return m;
}

std::vector<ColumnStats> stats_from_metadata(const Metadata &meta) {
  std::vector<ColumnStats> out;
  for (const auto &[key, value] : meta) {
    if (key.rfind("min.", 0) != 0)
      continue;
    const std::string name = key.substr(4);
    const auto max_it = std::find_if(meta.begin(), meta.end(), [&](const auto &kv) {
      return kv.first == "max." + name;
    });
    const auto lo = csv::parse_double(value);
    if (max_it == meta.end() || !lo || !csv::parse_double(max_it->second))
      throw Error(ErrorCode::Schema, "incomplete normalization statistics for '" + name + "'");
    out.push_back({name, *lo, *csv::parse_double(max_it->second)});
  }
  return out;
}

void write_ingest_outputs(const std::filesystem::path &dir, const IngestResult &ingested,
                          const RunConfig &config) {
  std::filesystem::create_directories(dir);
  Metadata meta = {
    {"stage", "encoded"},
    {"source", config.input_path.empty() ? "synthetic" : config.input_path.string()},
    {"synthetic_seed", std::to_string(config.synthetic.seed)},
    {"data_rows", std::to_string(ingested.parse.data_rows)},
    {"skipped_rows", std::to_string(ingested.parse.skipped_lines.size())},
    {"parsed_records", std::to_string(ingested.parsed_records)},
    {"cleaned_records", std::to_string(ingested.cleaned_records)},
    {"unknown_removed", std::to_string(ingested.parsed_records - ingested.cleaned_records)},
    {"count.delay_insensitive", std::to_string(ingested.delay_insensitive)},
    {"count.interactive", std::to_string(ingested.interactive)},
    {"columns", join_names(ingested.encoded.data.column_names)},
  };
  auto add_encoding = [&meta](const std::string &column, const NominalEncoding &enc) {
    meta.emplace_back("encoding." + column + ".count", std::to_string(enc.values.size()));
    for (std::size_t code = 0; code < enc.values.size(); ++code)
      meta.emplace_back("encoding." + column + "." + std::to_string(code), enc.values[code]);
  };
  add_encoding("vm_id", ingested.encoded.vm_ids);
  add_encoding("subscription_id", ingested.encoded.subscriptions);
  add_encoding("deployment_id", ingested.encoded.deployments);
  meta.emplace_back("encoding.category.0", "Delay-insensitive");
  meta.emplace_back("encoding.category.1", "Interactive");
  write_dataset(dir / "encoded.csv", ingested.encoded.data, meta);

  // Inspection copy: aggregated and normalized over the unbalanced data.
  const auto aggregated =
    aggregate_features(ingested.encoded.data, {config.drop_id_features});
  const auto normalized = minmax_normalize(aggregated, StatsScope::WholeData);
  Metadata dmeta = {{"stage", "aggregated-normalized"},
                    {"rows", std::to_string(aggregated.rows())},
                    {"columns", join_names(aggregated.column_names)}};
  for (const auto &kv : stats_metadata(normalized.stats))
    dmeta.push_back(kv);
  write_dataset(dir / "dataset.csv", normalized.data, dmeta);
}

PreparedData prepare(const Dataset &encoded, const RunConfig &config) {
  PreparedData out;
  out.rows_before_balance = encoded.rows();
  Dataset balanced;
  bool split_done = false;
  if (config.train_only_smote) {
    const Dataset tagged = split(encoded, config.fractions, config.split_seed);
    const auto train_rows = tagged.rows_in(SplitTag::Train);
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < tagged.rows(); ++i)
      if (tagged.split[i] != SplitTag::Train)
        rest.push_back(i);
    balanced = Dataset::concat(balance(tagged.select_rows(train_rows), config.balance),
                               tagged.select_rows(rest));
    split_done = true;
  } else {
    balanced = balance(encoded, config.balance);
  }
  out.rows_after_balance = balanced.rows();

  Dataset aggregated = aggregate_features(balanced, {config.drop_id_features});
  if (config.train_only_normalization && !split_done) {
    aggregated = split(aggregated, config.fractions, config.split_seed);
    split_done = true;
  }
  auto normalized = minmax_normalize(aggregated, config.train_only_normalization
                                                   ? StatsScope::TrainOnly
                                                   : StatsScope::WholeData);
  out.stats = std::move(normalized.stats);
  out.warnings = std::move(normalized.warnings);
  out.data = split_done ? std::move(normalized.data)
                        : split(normalized.data, config.fractions, config.split_seed);
  return out;
}

TrainingOutputs run_training(const Dataset &encoded, const RunConfig &config,
                             const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  TrainingOutputs out;
  out.prepared = prepare(encoded, config);
  const Dataset &data = out.prepared.data;
  const std::string tag = config.resolved_tag();

  Architecture arch = config.arch;
  arch.input_len = data.cols();
  arch.dropout_rate = config.hp.dropout;
  arch.validate();

  save_config(dir / "config_resolved.ini", config);
  Metadata prepared_meta = {
    {"stage", "prepared"},
    {"rows_before_balance", std::to_string(out.prepared.rows_before_balance)},
    {"rows_after_balance", std::to_string(out.prepared.rows_after_balance)},
    {"count.delay_insensitive", std::to_string(data.count_label(kDelayInsensitive))},
    {"count.interactive", std::to_string(data.count_label(kInteractive))},
    {"split.train", std::to_string(data.count_split(SplitTag::Train))},
    {"split.val", std::to_string(data.count_split(SplitTag::Val))},
    {"split.test", std::to_string(data.count_split(SplitTag::Test))},
    {"split_seed", std::to_string(config.split_seed)},
    {"balance_seed", std::to_string(config.balance.seed)},
    {"columns", join_names(data.column_names)},
  };
  const Metadata stats = stats_metadata(out.prepared.stats);
  prepared_meta.insert(prepared_meta.end(), stats.begin(), stats.end());
  write_dataset(dir / "prepared.csv", data, prepared_meta);
  write_metadata(dir / "normalization.txt", stats);
  for (const auto &w : out.prepared.warnings)
    std::cerr << "warning: " << w << '\n';

  if (config.n_runs == 0)
    throw Error(ErrorCode::Usage, "n_runs must be at least 1");
  if (config.n_runs == 1) {
    RunOutcome run{build_model(arch, config.base_seed), {}};
    HyperParams hp = config.hp;
    hp.seed = config.base_seed;
    run.metrics = train(run.model, data, hp);
    out.runs.push_back(std::move(run));
  } else {
    auto result = multi_run(data, arch, config.hp,
                            {config.n_runs, config.base_seed, false, config.parallel});
    out.runs = std::move(result.runs);
    out.summary = result.summary;
  }

  const Metadata manifest = {
    {"model", "CNN-GRU"},
    {"tag", tag},
    {"balance", std::string(to_string(config.balance.kind))},
    {"smote_k", std::to_string(config.balance.k)},
    {"batch_size", std::to_string(config.hp.batch_size)},
    {"epochs", std::to_string(config.hp.epochs)},
    {"learning_rate", csv::format_double(config.hp.lr)},
    {"dropout", csv::format_double(config.hp.dropout)},
    {"optimizer", "adam"},
    {"input_len", std::to_string(arch.input_len)},
    {"parameter_count", std::to_string(arch.parameter_count())},
    {"dataset_hash", std::to_string(dataset_hash(data))},
    {"train_rows", std::to_string(data.count_split(SplitTag::Train))},
  };
  std::vector<MetricsRow> rows;
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    const auto &run = out.runs[i];
    if (run.metrics.history.empty())
      continue;
    const auto files = emit_report(dir, tag, i, run.metrics, manifest);
    out.curves.push_back(files.curves);
    const auto ckpt = dir / ("model_" + run_stem(tag, run.metrics.seed) + ".ckpt");
    save_checkpoint(ckpt, run.model);
    out.checkpoints.push_back(ckpt);
    rows.push_back({tag, i, run.metrics.seed, run.metrics.test.metrics});
  }
  write_metrics_table(dir / ("metrics_" + tag + ".csv"), rows);
  if (out.summary)
    write_summary_table(dir / ("summary_" + tag + ".csv"), tag, *out.summary);
  return out;
}

std::vector<HostSnapshot> synthetic_hosts(const std::vector<VmRecord> &records,
                                          const std::vector<ColumnStats> &stats,
                                          std::size_t vms_per_host, std::size_t samples,
                                          double bandwidth, std::uint64_t seed,
                                          bool drop_id_features) {
  if (vms_per_host == 0 || samples < 2)
    throw Error(ErrorCode::Usage, "hosts need at least one VM and two CPU samples");
  const auto known = clean(records);
  const Dataset features = aggregate_features(known, {drop_id_features});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 4.0);
  std::uniform_real_distribution<double> trend(-1.5, 1.5);
  std::vector<HostSnapshot> hosts;
  for (std::size_t i = 0; i < known.size(); ++i) {
    if (i % vms_per_host == 0)
      hosts.push_back({"host-" + std::to_string(i / vms_per_host), bandwidth, {}});
    const auto &r = known[i];
    VmRuntime vm;
    vm.vm_id = r.vm_id;
    vm.memory_used = r.memory * std::uniform_real_distribution<double>(0.3, 1.0)(rng);
    const double slope = trend(rng);
    for (std::size_t t = 0; t < samples; ++t) {
      const double centred = static_cast<double>(t) - static_cast<double>(samples - 1) / 2.0;
      vm.cpu_series.push_back(std::clamp(r.cpu_avg + slope * centred + jitter(rng), 0.0, 100.0));
    }
    vm.features = apply_normalization(features.row(i), stats);
    hosts.back().vms.push_back(std::move(vm));
  }
  return hosts;
}

} // namespace vmclass
