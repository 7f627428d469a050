// SPDX-License-Identifier: Apache-2.0
#include "vmclass/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "vmclass/csv.hpp"
#include "vmclass/error.hpp"

namespace vmclass {

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

std::string num(double v) {
  return std::isnan(v) ? std::string("nan") : csv::format_double(v);
}

double parse_num(const std::string &text, const std::filesystem::path &path) {
  if (csv::lower(csv::trim(text)) == "nan")
    return std::numeric_limits<double>::quiet_NaN();
  const auto v = csv::parse_double(text);
  if (!v)
    throw Error(ErrorCode::Row, path.string() + ": malformed number '" + text + "'");
  return *v;
}

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path &path,
                                                const std::string &expected_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != expected_header)
    throw Error(ErrorCode::Schema, path.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line))
    if (!line.empty())
      rows.push_back(csv::split_line(line));
  return rows;
}

const std::string kCurvesHeader = "epoch,train_loss,val_loss,train_acc,val_acc";
const std::string kMetricsHeader =
  "model,run,seed,rows,tp,fp,tn,fn,accuracy,precision_interactive,"
  "precision_delay_insensitive,recall_interactive,recall_delay_insensitive";

} // namespace

void write_curves(const std::filesystem::path &path, const std::vector<EpochRecord> &history) {
  auto out = open_out(path);
  out << kCurvesHeader << '\n';
  for (const auto &r : history)
    out << r.epoch << ',' << num(r.train_loss) << ',' << num(r.val_loss) << ','
        << num(r.train_accuracy) << ',' << num(r.val_accuracy) << '\n';
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

std::vector<EpochRecord> read_curves(const std::filesystem::path &path) {
  std::vector<EpochRecord> out;
  for (const auto &f : read_rows(path, kCurvesHeader)) {
    if (f.size() != 5)
      throw Error(ErrorCode::Row, path.string() + ": expected 5 fields per row");
    out.push_back({static_cast<std::size_t>(std::stoull(f[0])), parse_num(f[1], path),
                   parse_num(f[2], path), parse_num(f[3], path), parse_num(f[4], path)});
  }
  return out;
}

void write_metrics_table(const std::filesystem::path &path,
                         const std::vector<MetricsRow> &rows) {
  auto out = open_out(path);
  out << kMetricsHeader << '\n';
  for (const auto &r : rows) {
    const auto &m = r.metrics;
    const auto &cm = m.confusion;
    out << csv::quote(r.model) << ',' << r.run << ',' << r.seed << ',' << cm.total() << ','
        << cm.tp << ',' << cm.fp << ',' << cm.tn << ',' << cm.fn << ',' << num(m.accuracy)
        << ',' << num(m.precision[1]) << ',' << num(m.precision[0]) << ','
        << num(m.recall[1]) << ',' << num(m.recall[0]) << '\n';
  }
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

std::vector<MetricsRow> read_metrics_table(const std::filesystem::path &path) {
  std::vector<MetricsRow> out;
  for (const auto &f : read_rows(path, kMetricsHeader)) {
    if (f.size() != 13)
      throw Error(ErrorCode::Row, path.string() + ": expected 13 fields per row");
    MetricsRow r;
    r.model = f[0];
    r.run = std::stoull(f[1]);
    r.seed = std::stoull(f[2]);
    auto &cm = r.metrics.confusion;
    cm.tp = std::stoull(f[4]);
    cm.fp = std::stoull(f[5]);
    cm.tn = std::stoull(f[6]);
    cm.fn = std::stoull(f[7]);
    r.metrics.accuracy = parse_num(f[8], path);
    r.metrics.precision[1] = parse_num(f[9], path);
    r.metrics.precision[0] = parse_num(f[10], path);
    r.metrics.recall[1] = parse_num(f[11], path);
    r.metrics.recall[0] = parse_num(f[12], path);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_summary_percent(const Summary &s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f %.2f(%.2f) %.2f", 100.0 * s.min, 100.0 * s.mean,
                100.0 * s.std, 100.0 * s.max);
  return buf;
}

void write_summary_table(const std::filesystem::path &path, const std::string &model,
                         const MultiRunSummary &summary) {
  auto out = open_out(path);
  out << "model,metric,runs,min,mean,std,max,min_mean(std)_max_percent\n";
  auto row = [&](const char *metric, const Summary &s) {
    out << csv::quote(model) << ',' << metric << ',' << s.count << ',' << num(s.min) << ','
        << num(s.mean) << ',' << num(s.std) << ',' << num(s.max) << ','
        << format_summary_percent(s) << '\n';
  };
  row("accuracy", summary.accuracy);
  row("precision_interactive", summary.precision[1]);
  row("precision_delay_insensitive", summary.precision[0]);
  row("recall_interactive", summary.recall[1]);
  row("recall_delay_insensitive", summary.recall[0]);
  if (!out)
    throw Error(ErrorCode::Io, "failed while writing " + path.string());
}

std::string run_stem(const std::string &tag, std::uint64_t seed) {
  return tag + "_seed" + std::to_string(seed);
}

ReportFiles emit_report(const std::filesystem::path &dir, const std::string &tag,
                        std::size_t run_index, const RunMetrics &run,
                        const Metadata &manifest) {
  if (run.history.empty())
    throw Error(ErrorCode::Data, "cannot emit a report for an empty training history");
  const std::string stem = run_stem(tag, run.seed);
  ReportFiles files{dir / ("curves_" + stem + ".csv"), dir / ("metrics_" + stem + ".csv"),
                    dir / ("manifest_" + stem + ".txt")};
  write_curves(files.curves, run.history);
  write_metrics_table(files.metrics, {{tag, run_index, run.seed, run.test.metrics}});
  Metadata full = manifest;
  full.emplace_back("seed", std::to_string(run.seed));
  full.emplace_back("epochs_completed", std::to_string(run.history.size()));
  full.emplace_back("test_rows", std::to_string(run.test.rows));
  full.emplace_back("training_seconds", csv::format_double(run.train_seconds));
  write_metadata(files.manifest, full);
  return files;
}

} // namespace vmclass
