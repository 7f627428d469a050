// SPDX-License-Identifier: Apache-2.0
#include "vmclass/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <random>

#include "vmclass/error.hpp"

namespace vmclass {

namespace {

constexpr std::size_t kEvalChunk = 512;

struct Scored {
  double loss = 0.0;
  std::vector<int> predictions;
};

Scored score_rows(const ModelState &model, const Dataset &dataset,
                  std::span<const std::size_t> rows) {
  Scored out;
  out.predictions.reserve(rows.size());
  double total = 0.0;
  for (std::size_t start = 0; start < rows.size(); start += kEvalChunk) {
    const auto chunk = rows.subspan(start, std::min(kEvalChunk, rows.size() - start));
    const auto x = gather_features(dataset, chunk);
    const auto y = gather_labels(dataset, chunk);
    const auto pass = forward(model, x, nn::Mode::Eval);
    total += loss(pass, y) * static_cast<double>(chunk.size());
    const auto pred = argmax_rows(pass.probs);
    out.predictions.insert(out.predictions.end(), pred.begin(), pred.end());
  }
  out.loss = rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  return out;
}

double accuracy_of(const std::vector<int> &pred, const std::vector<int> &labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    hits += pred[i] == labels[i];
  return pred.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(pred.size());
}

} // namespace

void HyperParams::validate() const {
  if (batch_size == 0)
    throw Error(ErrorCode::Usage, "batch size must be positive");
  if (!(lr > 0.0))
    throw Error(ErrorCode::Usage, "learning rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw Error(ErrorCode::Usage, "dropout rate must lie in [0,1)");
}

NumericGrid gather_features(const Dataset &dataset, std::span<const std::size_t> rows) {
  const std::size_t c = dataset.cols();
  NumericGrid x({rows.size(), c});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = dataset.row(rows[i]);
    std::copy(r.begin(), r.end(), x.row(i).begin());
  }
  return x;
}

std::vector<int> gather_labels(const Dataset &dataset, std::span<const std::size_t> rows) {
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    y[i] = dataset.labels[rows[i]];
  return y;
}

RunMetrics train(ModelState &model, const Dataset &dataset, const HyperParams &hp) {
  hp.validate();
  dataset.validate();
  if (dataset.cols() != model.arch.input_len)
    throw Error(ErrorCode::Shape, "dataset has " + std::to_string(dataset.cols()) +
                                    " features, model expects " +
                                    std::to_string(model.arch.input_len));
  std::vector<std::size_t> train_rows = dataset.rows_in(SplitTag::Train);
  if (train_rows.empty())
    throw Error(ErrorCode::Data, "training split is empty");
  const std::vector<std::size_t> val_rows = dataset.rows_in(SplitTag::Val);
  const auto train_labels = gather_labels(dataset, train_rows);
  const auto val_labels = gather_labels(dataset, val_rows);
  model.arch.dropout_rate = hp.dropout;

  RunMetrics metrics;
  metrics.seed = hp.seed;
  std::seed_seq seq{hp.seed, std::uint64_t{0x7261696e}};
  std::mt19937_64 rng(seq);
  const auto started = std::chrono::steady_clock::now();

  std::vector<std::size_t> order = train_rows;
  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const auto batch = std::span<const std::size_t>(order).subspan(
        start, std::min(hp.batch_size, order.size() - start));
      const auto x = gather_features(dataset, batch);
      const auto y = gather_labels(dataset, batch);
      const auto pass = forward(model, x, nn::Mode::Train, &rng);
      adam_step(model, backward(model, pass, y), hp.lr);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const auto on_train = score_rows(model, dataset, train_rows);
    rec.train_loss = on_train.loss;
    rec.train_accuracy = accuracy_of(on_train.predictions, train_labels);
    if (val_rows.empty()) {
      rec.val_loss = rec.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
      const auto on_val = score_rows(model, dataset, val_rows);
      rec.val_loss = on_val.loss;
      rec.val_accuracy = accuracy_of(on_val.predictions, val_labels);
    }
    metrics.history.push_back(rec);
  }
  metrics.train_seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  if (dataset.count_split(SplitTag::Test) > 0)
    metrics.test = evaluate(model, dataset, SplitTag::Test);
  return metrics;
}

Evaluation evaluate(const ModelState &model, const Dataset &dataset, SplitTag split) {
  const auto rows = dataset.rows_in(split);
  if (rows.empty())
    throw Error(ErrorCode::Data, "cannot evaluate: split '" + std::string(to_string(split)) +
                                   "' is empty");
  const auto scored = score_rows(model, dataset, rows);
  Evaluation e;
  e.rows = rows.size();
  e.loss = scored.loss;
  e.metrics = compute_metrics(ConfusionMatrix::count(scored.predictions,
                                                     gather_labels(dataset, rows)));
  return e;
}

MultiRunSummary summarize_runs(const std::vector<RunMetrics> &runs) {
  auto collect = [&runs](auto getter) {
    std::vector<double> v;
    for (const auto &r : runs)
      v.push_back(getter(r));
    return summarize(v);
  };
  MultiRunSummary s;
  s.accuracy = collect([](const RunMetrics &r) { return r.test.metrics.accuracy; });
  for (std::size_t c = 0; c < 2; ++c) {
    s.precision[c] = collect([c](const RunMetrics &r) { return r.test.metrics.precision[c]; });
    s.recall[c] = collect([c](const RunMetrics &r) { return r.test.metrics.recall[c]; });
  }
  return s;
}

MultiRunResult multi_run(const Dataset &dataset, const Architecture &arch,
                         const HyperParams &hp, const MultiRunOptions &options) {
  if (options.n_runs < 2)
    throw Error(ErrorCode::Usage, "multi_run needs at least 2 runs");
  auto one = [&](std::size_t i) {
    HyperParams run_hp = hp;
    run_hp.seed = options.same_seed ? options.base_seed : options.base_seed + i;
    Architecture run_arch = arch;
    run_arch.dropout_rate = hp.dropout;
    RunOutcome out{build_model(run_arch, run_hp.seed), {}};
    out.metrics = train(out.model, dataset, run_hp);
    return out;
  };

  MultiRunResult result;
  if (options.parallel) {
    std::vector<std::future<RunOutcome>> pending;
    for (std::size_t i = 0; i < options.n_runs; ++i)
      pending.push_back(std::async(std::launch::async, one, i));
    for (auto &f : pending)
      result.runs.push_back(f.get());
  } else {
    for (std::size_t i = 0; i < options.n_runs; ++i)
      result.runs.push_back(one(i));
  }
  std::vector<RunMetrics> metrics;
  for (const auto &r : result.runs)
    metrics.push_back(r.metrics);
  result.summary = summarize_runs(metrics);
  return result;
}

} // namespace vmclass
