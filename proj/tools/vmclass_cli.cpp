// SPDX-License-Identifier: Apache-2.0
// vmclass: ingest, balance, train, evaluate, select, synthgen, report.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"
#include "vmclass/pipeline.hpp"
#include "vmclass/report.hpp"

namespace fs = std::filesystem;
using namespace vmclass;

namespace {

/// Options that map one-to-one onto config keys. Only options given on the
/// command line are applied, after the config file.
struct Overrides {
  std::map<std::string, std::string> values;
  std::string config_path;

  void option(CLI::App *app, const std::string &flag, const std::string &key,
              const std::string &help) {
    app->add_option_function<std::string>(
      flag, [this, key](const std::string &v) { values[key] = v; }, help);
  }
  void flag(CLI::App *app, const std::string &flag, const std::string &key,
            const std::string &help) {
    app->add_flag_callback(flag, [this, key] { values[key] = "true"; }, help);
  }
};

void add_common(CLI::App *app, Overrides &o) {
  app->add_option("--config", o.config_path, "INI config file")->check(CLI::ExistingFile);
  o.option(app, "-o,--output-dir", "output.dir", "output directory (default: $VMCLASS_OUTPUT_ROOT or ./out)");
  app->add_option_function<std::vector<std::string>>(
    "--set",
    [&o](const std::vector<std::string> &kvs) {
      for (const auto &kv : kvs) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw Error(ErrorCode::Usage, "--set expects section.key=value, got '" + kv + "'");
        o.values[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
    },
    "override any config key, e.g. --set train.epochs=20");
}

void add_input(CLI::App *app, Overrides &o) {
  o.option(app, "-i,--input", "input.path", "raw trace CSV (omit for synthetic data)");
  o.option(app, "--synthetic-n", "input.synthetic_n", "synthetic VM count");
  o.option(app, "--synthetic-seed", "input.synthetic_seed", "synthetic generator seed");
  o.option(app, "--synthetic-ratio", "input.synthetic_ratio", "interactive fraction of synthetic VMs");
  o.option(app, "--noise", "input.synthetic_noise", "synthetic feature noise");
  o.flag(app, "--skip-bad-rows", "input.skip_bad_rows", "skip malformed rows instead of failing");
}

void add_balance(CLI::App *app, Overrides &o) {
  o.option(app, "--balance", "balance.method", "smote | rus | ros");
  o.option(app, "-k,--smote-k", "balance.k", "SMOTE neighbour count");
  o.option(app, "--balance-seed", "balance.seed", "balancing seed");
  o.flag(app, "--train-only-smote", "balance.train_only", "split first, balance the Train rows only");
}

void add_features(CLI::App *app, Overrides &o) {
  o.flag(app, "--drop-id-features", "features.drop_ids", "drop vm/subscription/deployment ids");
  app->add_flag_callback(
    "--train-only-normalization", [&o] { o.values["features.normalization"] = "train"; },
    "fit min-max statistics on Train rows only");
}

void add_training(CLI::App *app, Overrides &o) {
  o.option(app, "--split-train", "split.train", "train fraction");
  o.option(app, "--split-val", "split.val", "validation fraction");
  o.option(app, "--split-test", "split.test", "test fraction");
  o.option(app, "--split-seed", "split.seed", "split seed");
  o.option(app, "--epochs", "train.epochs", "epochs per run");
  o.option(app, "--batch-size", "train.batch_size", "minibatch size");
  o.option(app, "--lr", "train.lr", "Adam learning rate");
  o.option(app, "--dropout", "train.dropout", "dropout rate");
  o.option(app, "--n-runs", "train.n_runs", "independent runs");
  o.option(app, "--base-seed", "train.base_seed", "seed of the first run");
  o.flag(app, "--parallel", "train.parallel", "train runs on separate threads");
  o.option(app, "--tag", "output.tag", "model tag used in file names");
}

/// Precedence: built-in defaults, $VMCLASS_OUTPUT_ROOT, config file, flags.
RunConfig resolve(const Overrides &o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  const char *root = std::getenv("VMCLASS_OUTPUT_ROOT");
  if (root && *root && config.output_dir == RunConfig{}.output_dir)
    config.output_dir = root;
  for (const auto &[key, value] : o.values)
    set_config_value(config, key, value);
  config.hp.validate();
  return config;
}

std::string pct(double v) { return csv::format_double(std::round(v * 10000.0) / 100.0); }

void print_metrics(const std::string &label, const ClassificationMetrics &m) {
  const auto &c = m.confusion;
  std::cout << label << ": accuracy=" << pct(m.accuracy) << "%"
            << " precision[interactive]=" << pct(m.precision[1]) << "%"
            << " recall[interactive]=" << pct(m.recall[1]) << "%"
            << " precision[delay-insensitive]=" << pct(m.precision[0]) << "%"
            << " recall[delay-insensitive]=" << pct(m.recall[0]) << "%"
            << " tp=" << c.tp << " fp=" << c.fp << " tn=" << c.tn << " fn=" << c.fn << '\n';
  for (const auto &u : m.undefined)
    std::cout << "  note: " << u << " undefined (zero denominator), reported as 0\n";
}

void print_summary(const std::string &tag, const MultiRunSummary &s) {
  std::cout << "summary " << tag << " (min mean(std) max, %)\n"
            << "  accuracy                     " << format_summary_percent(s.accuracy) << '\n'
            << "  precision interactive        " << format_summary_percent(s.precision[1]) << '\n'
            << "  precision delay-insensitive  " << format_summary_percent(s.precision[0]) << '\n'
            << "  recall interactive           " << format_summary_percent(s.recall[1]) << '\n'
            << "  recall delay-insensitive     " << format_summary_percent(s.recall[0]) << '\n';
}

void cmd_ingest(const RunConfig &config) {
  const auto result = ingest(config);
  write_ingest_outputs(config.output_dir, result, config);
  save_config(config.output_dir / "config_resolved.ini", config);
  std::cout << "rows read: " << result.parse.data_rows << '\n';
  if (!result.parse.skipped_lines.empty())
    std::cout << "rows skipped (malformed): " << result.parse.skipped_lines.size() << '\n';
  std::cout << "records after cleaning: " << result.cleaned_records << " (removed "
            << result.parsed_records - result.cleaned_records << " with unknown category)\n"
            << "delay-insensitive: " << result.delay_insensitive << '\n'
            << "interactive: " << result.interactive << '\n'
            << "wrote " << (config.output_dir / "encoded.csv").string() << " and "
            << (config.output_dir / "dataset.csv").string() << '\n';
}

Dataset load_encoded(const fs::path &path) {
  if (!fs::exists(path))
    throw Error(ErrorCode::Io, "dataset " + path.string() + " not found; run 'vmclass ingest' first");
  return read_dataset(path);
}

void cmd_balance(const RunConfig &config, fs::path dataset) {
  if (dataset.empty())
    dataset = config.output_dir / "encoded.csv";
  const Dataset encoded = load_encoded(dataset);
  const Dataset balanced = balance(encoded, config.balance);
  fs::create_directories(config.output_dir);
  const auto out = config.output_dir / "balanced.csv";
  std::size_t synthetic = 0;
  for (auto p : balanced.provenance)
    synthetic += p != Provenance::Real;
  write_dataset(out, balanced,
                {{"stage", "balanced"},
                 {"method", std::string(to_string(config.balance.kind))},
                 {"k", std::to_string(config.balance.k)},
                 {"seed", std::to_string(config.balance.seed)},
                 {"rows_before", std::to_string(encoded.rows())},
                 {"rows_after", std::to_string(balanced.rows())}});
  std::cout << "method: " << to_string(config.balance.kind) << '\n'
            << "before: delay-insensitive=" << encoded.count_label(kDelayInsensitive)
            << " interactive=" << encoded.count_label(kInteractive) << '\n'
            << "after:  delay-insensitive=" << balanced.count_label(kDelayInsensitive)
            << " interactive=" << balanced.count_label(kInteractive)
            << " (generated " << synthetic << ")\n"
            << "wrote " << out.string() << '\n';
}

void cmd_train(const RunConfig &config, fs::path dataset) {
  if (dataset.empty())
    dataset = config.output_dir / "encoded.csv";
  const Dataset encoded = load_encoded(dataset);
  const auto outputs = run_training(encoded, config, config.output_dir);
  const auto &data = outputs.prepared.data;
  std::cout << "rows: " << outputs.prepared.rows_before_balance << " -> "
            << outputs.prepared.rows_after_balance << " after balancing; train="
            << data.count_split(SplitTag::Train) << " val=" << data.count_split(SplitTag::Val)
            << " test=" << data.count_split(SplitTag::Test) << '\n';
  for (std::size_t i = 0; i < outputs.runs.size(); ++i) {
    const auto &m = outputs.runs[i].metrics;
    const std::string label = "run " + std::to_string(i) + " seed " + std::to_string(m.seed);
    if (m.test.rows > 0)
      print_metrics(label + " test", m.test.metrics);
    else
      std::cout << label << ": no test rows\n";
    std::cout << "  checkpoint " << outputs.checkpoints.at(i).string() << '\n';
  }
  if (outputs.summary)
    print_summary(config.resolved_tag(), *outputs.summary);
}

void cmd_evaluate(const RunConfig &config, const fs::path &checkpoint, fs::path dataset,
                  const std::string &split_name) {
  if (dataset.empty())
    dataset = config.output_dir / "prepared.csv";
  if (!fs::exists(dataset))
    throw Error(ErrorCode::Io, "dataset " + dataset.string() + " not found; run 'vmclass train' first");
  const auto model = load_checkpoint(checkpoint);
  const auto data = read_dataset(dataset);
  const auto result = evaluate(model, data, parse_split_tag(split_name));
  std::cout << "rows: " << result.rows << " loss: " << csv::format_double(result.loss) << '\n';
  print_metrics(split_name, result.metrics);
}

void cmd_select(const RunConfig &config, const fs::path &hosts_path, const fs::path &checkpoint,
                const std::string &policy_name, std::uint64_t seed, const std::string &target,
                fs::path out) {
  const Policy policy = parse_policy(policy_name);
  SelectionOptions options;
  options.seed = seed;
  if (target == "host")
    options.correlation_target = CorrelationTarget::HostTotal;
  else if (target != "others")
    throw Error(ErrorCode::Usage, "--correlation-target must be 'others' or 'host'");
  std::optional<ModelState> model;
  if (!checkpoint.empty()) {
    model = load_checkpoint(checkpoint);
    options.model = &*model;
  } else if (policy == Policy::ClassifierFirst) {
    throw Error(ErrorCode::Usage, "policy classifier_first needs --checkpoint");
  }
  const auto hosts = read_hosts(hosts_path);
  std::vector<MigrationRanking> rankings;
  for (const auto &host : hosts)
    rankings.push_back(rank_host(host, policy, options));
  if (out.empty())
    out = config.output_dir / ("ranking_" + std::string(to_string(policy)) + ".csv");
  if (out.has_parent_path())
    fs::create_directories(out.parent_path());
  write_rankings(out, rankings);
  for (const auto &r : rankings) {
    std::cout << r.host_id << ':';
    const std::size_t shown = std::min<std::size_t>(r.entries.size(), 5);
    for (std::size_t i = 0; i < shown; ++i) {
      std::cout << ' ' << r.entries[i].vm_id;
      if (r.entries[i].predicted_class >= 0)
        std::cout << "(c" << r.entries[i].predicted_class << ')';
    }
    if (shown < r.entries.size())
      std::cout << " ... (" << r.entries.size() << " VMs)";
    std::cout << '\n';
  }
  std::cout << "wrote " << out.string() << '\n';
}

struct SynthOptions {
  fs::path trace_out;
  fs::path hosts_out;
  fs::path stats;
  std::size_t vms_per_host = 10;
  std::size_t samples = 12;
  double bandwidth = 1000.0;
};

void cmd_synthgen(const RunConfig &config, const SynthOptions &s) {
  const auto records = generate_synthetic(config.synthetic);
  const fs::path trace = s.trace_out.empty() ? config.output_dir / "synthetic_trace.csv" : s.trace_out;
  if (trace.has_parent_path())
    fs::create_directories(trace.parent_path());
  write_trace(trace, records);
  std::cout << "wrote " << records.size() << " VMs to " << trace.string() << '\n';
  if (s.hosts_out.empty())
    return;
  std::vector<ColumnStats> stats;
  if (!s.stats.empty()) {
    stats = stats_from_metadata(read_metadata(s.stats));
  } else {
    const auto aggregated = aggregate_features(clean(records), {config.drop_id_features});
    stats = minmax_normalize(aggregated, StatsScope::WholeData).stats;
  }
  const auto hosts = synthetic_hosts(records, stats, s.vms_per_host, s.samples, s.bandwidth,
                                     config.synthetic.seed + 1, config.drop_id_features);
  if (s.hosts_out.has_parent_path())
    fs::create_directories(s.hosts_out.parent_path());
  write_hosts(s.hosts_out, hosts);
  std::cout << "wrote " << hosts.size() << " hosts to " << s.hosts_out.string() << '\n';
}

void cmd_report(const RunConfig &config, fs::path metrics, fs::path out) {
  const std::string tag = config.resolved_tag();
  if (metrics.empty())
    metrics = config.output_dir / ("metrics_" + tag + ".csv");
  if (!fs::exists(metrics))
    throw Error(ErrorCode::Io, "metrics table " + metrics.string() + " not found");
  const auto rows = read_metrics_table(metrics);
  if (rows.empty())
    throw Error(ErrorCode::Data, "metrics table " + metrics.string() + " has no runs");
  std::vector<double> acc, p0, p1, r0, r1;
  for (const auto &row : rows) {
    acc.push_back(row.metrics.accuracy);
    p0.push_back(row.metrics.precision[0]);
    p1.push_back(row.metrics.precision[1]);
    r0.push_back(row.metrics.recall[0]);
    r1.push_back(row.metrics.recall[1]);
  }
  MultiRunSummary s;
  s.accuracy = summarize(acc);
  s.precision = {summarize(p0), summarize(p1)};
  s.recall = {summarize(r0), summarize(r1)};
  const std::string model = rows.front().model;
  if (out.empty())
    out = config.output_dir / ("summary_" + model + ".csv");
  if (out.has_parent_path())
    fs::create_directories(out.parent_path());
  write_summary_table(out, model, s);
  print_summary(model, s);
  std::cout << "wrote " << out.string() << '\n';
}

int run(int argc, char **argv) {
  CLI::App app{"VM workload classification and migration selection"};
  app.require_subcommand(1);
  Overrides o;

  auto *ingest_cmd = app.add_subcommand("ingest", "parse, clean and encode a trace");
  add_common(ingest_cmd, o);
  add_input(ingest_cmd, o);
  add_features(ingest_cmd, o);

  fs::path dataset;
  auto *balance_cmd = app.add_subcommand("balance", "balance an encoded dataset");
  add_common(balance_cmd, o);
  add_balance(balance_cmd, o);
  balance_cmd->add_option("--dataset", dataset, "encoded dataset (default: <out>/encoded.csv)");

  auto *train_cmd = app.add_subcommand("train", "balance, split and train CNN-GRU runs");
  add_common(train_cmd, o);
  add_balance(train_cmd, o);
  add_features(train_cmd, o);
  add_training(train_cmd, o);
  train_cmd->add_option("--dataset", dataset, "encoded dataset (default: <out>/encoded.csv)");

  fs::path checkpoint;
  std::string split_name = "test";
  auto *eval_cmd = app.add_subcommand("evaluate", "score a checkpoint on a prepared dataset");
  add_common(eval_cmd, o);
  eval_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--dataset", dataset, "prepared dataset (default: <out>/prepared.csv)");
  eval_cmd->add_option("--split", split_name, "train | val | test");

  fs::path hosts_path, out_path;
  std::string policy_name, target = "others";
  std::uint64_t select_seed = 42;
  auto *select_cmd = app.add_subcommand("select", "rank VMs on each host for migration");
  add_common(select_cmd, o);
  select_cmd->add_option("--hosts", hosts_path, "host snapshot CSV")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--policy", policy_name, "selection policy")->required();
  select_cmd->add_option("--checkpoint", checkpoint, "model checkpoint for classification");
  select_cmd->add_option("--seed", select_seed, "seed for the random policy");
  select_cmd->add_option("--correlation-target", target, "others | host");
  select_cmd->add_option("--out", out_path, "ranking CSV (default: <out>/ranking_<policy>.csv)");

  SynthOptions synth;
  auto *synth_cmd = app.add_subcommand("synthgen", "write a synthetic trace and host snapshots");
  add_common(synth_cmd, o);
  add_input(synth_cmd, o);
  add_features(synth_cmd, o);
  o.option(synth_cmd, "--unknown-fraction", "input.synthetic_unknown_fraction",
           "fraction of VMs with an unknown category");
  synth_cmd->add_option("--trace-out", synth.trace_out, "trace CSV (default: <out>/synthetic_trace.csv)");
  synth_cmd->add_option("--hosts-out", synth.hosts_out, "also write a host snapshot CSV");
  synth_cmd->add_option("--stats", synth.stats, "normalization.txt from a training run");
  synth_cmd->add_option("--vms-per-host", synth.vms_per_host, "VMs per host");
  synth_cmd->add_option("--samples", synth.samples, "CPU readings per VM");
  synth_cmd->add_option("--bandwidth", synth.bandwidth, "host network bandwidth");

  fs::path metrics_path;
  auto *report_cmd = app.add_subcommand("report", "summarize a metrics table across runs");
  add_common(report_cmd, o);
  o.option(report_cmd, "--tag", "output.tag", "model tag");
  report_cmd->add_option("--metrics", metrics_path, "metrics table (default: <out>/metrics_<tag>.csv)");
  report_cmd->add_option("--out", out_path, "summary CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    if (rc != 0)
      std::cerr << "error: code=E_USAGE message=" << e.what() << '\n';
    return rc == 0 ? 0 : 2;
  }

  const RunConfig config = resolve(o);
  if (*ingest_cmd)
    cmd_ingest(config);
  else if (*balance_cmd)
    cmd_balance(config, dataset);
  else if (*train_cmd)
    cmd_train(config, dataset);
  else if (*eval_cmd)
    cmd_evaluate(config, checkpoint, dataset, split_name);
  else if (*select_cmd)
    cmd_select(config, hosts_path, checkpoint, policy_name, select_seed, target, out_path);
  else if (*synth_cmd)
    cmd_synthgen(config, synth);
  else if (*report_cmd)
    cmd_report(config, metrics_path, out_path);
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  try {
    return run(argc, argv);
  } catch (const Error &e) {
    std::cerr << "error: code=" << error_code_name(e.code()) << " message=" << e.what() << '\n';
    return e.code() == ErrorCode::Usage ? 2 : 1;
  } catch (const std::exception &e) {
    std::cerr << "error: code=E_INTERNAL message=" << e.what() << '\n';
    return 1;
  }
}
