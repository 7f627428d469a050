// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vmclass/error.hpp"
#include "vmclass/metrics.hpp"
#include "vmclass/report.hpp"
#include "vmclass/trace.hpp"
#include "vmclass/training.hpp"

using namespace vmclass;

namespace {

Dataset prepared(std::size_t n, std::uint64_t seed) {
  const auto ds = aggregate_features(clean(generate_synthetic({n, seed})));
  return split(minmax_normalize(ds, StatsScope::WholeData).data, {}, seed);
}

HyperParams quick(std::size_t epochs) {
  HyperParams hp;
  hp.epochs = epochs;
  return hp;
}

Architecture small_arch() {
  Architecture a;
  a.conv_filters = 8;
  a.hidden = 8;
  return a;
}

} // namespace

TEST_SUITE("train_eval") {

TEST_CASE("metrics: hand example and perfect predictions") {
  const auto m = compute_metrics({3, 2, 4, 1});
  CHECK(m.accuracy == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(m.precision[1] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(m.recall[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(m.precision[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(m.recall[0] == doctest::Approx(4.0 / 6.0).epsilon(1e-15));
  CHECK(m.undefined.empty());

  const std::vector<int> y = {0, 1, 1, 0, 1};
  const auto perfect = compute_metrics(ConfusionMatrix::count(y, y));
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == std::array<double, 2>{1.0, 1.0});
  CHECK(perfect.recall == std::array<double, 2>{1.0, 1.0});
}

TEST_CASE("metrics equal brute-force confusion counting") {
  std::mt19937_64 rng(31);
  for (std::size_t n : {200u, 500u}) {
    std::vector<int> pred(n), actual(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = static_cast<int>(rng() % 2);
      actual[i] = static_cast<int>(rng() % 2);
    }
    const auto want = oracle::count(pred, actual);
    const auto cm = ConfusionMatrix::count(pred, actual);
    CHECK(cm.tp == want.tp);
    CHECK(cm.fp == want.fp);
    CHECK(cm.tn == want.tn);
    CHECK(cm.fn == want.fn);
    CHECK(cm.total() == n);
    const auto m = compute_metrics(cm);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i)
      correct += pred[i] == actual[i];
    CHECK(m.accuracy == static_cast<double>(correct) / static_cast<double>(n));
    CHECK(m.precision[1] == static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fp));
    CHECK(m.recall[1] == static_cast<double>(want.tp) / static_cast<double>(want.tp + want.fn));
    CHECK(m.precision[0] == static_cast<double>(want.tn) / static_cast<double>(want.tn + want.fn));
    CHECK(m.recall[0] == static_cast<double>(want.tn) / static_cast<double>(want.tn + want.fp));

    std::vector<int> sp(n), sa(n);
    for (std::size_t i = 0; i < n; ++i) {
      sp[i] = 1 - pred[i];
      sa[i] = 1 - actual[i];
    }
    CHECK(compute_metrics(ConfusionMatrix::count(sp, sa)).accuracy == m.accuracy);
  }
}

TEST_CASE("zero denominators report 0 and are flagged") {
  const std::vector<int> pred = {0, 0, 0}, actual = {0, 1, 0};
  const auto m = compute_metrics(ConfusionMatrix::count(pred, actual));
  CHECK(m.precision[1] == 0.0);
  CHECK_FALSE(m.undefined.empty());
}

TEST_CASE("summary statistics") {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  const auto s = summarize(v);
  CHECK(s.min == 1);
  CHECK(s.max == 5);
  CHECK(s.mean == 3);
  CHECK(std::abs(s.std - std::sqrt(2.0)) < 1e-15);
  CHECK(s.count == 5);

  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.8, 1.0);
  std::vector<double> r(7);
  for (auto &x : r)
    x = u(rng);
  const auto t = summarize(r);
  const double mean = oracle::mean(r);
  double var = 0.0;
  for (double x : r)
    var += (x - mean) * (x - mean);
  CHECK(std::abs(t.mean - mean) < 1e-12);
  CHECK(std::abs(t.std - std::sqrt(var / 7.0)) < 1e-12);
  CHECK(t.min <= t.mean);
  CHECK(t.mean <= t.max);
  CHECK(format_summary_percent({0.9501, 0.9518, 0.0013, 0.9523, 5}) == "95.01 95.18(0.13) 95.23");
}

TEST_CASE("zero epochs leave the model untouched") {
  const auto data = prepared(100, 1);
  auto model = build_model(small_arch(), 5);
  const auto before = model.params.gru.w_update;
  const auto run = train(model, data, quick(0));
  CHECK(run.history.empty());
  CHECK(model.params.gru.w_update == before);
  CHECK(model.step == 0);
}

TEST_CASE("training is deterministic and the loss falls early on") {
  const auto data = prepared(600, 2);
  auto a = build_model(Architecture{}, 42), b = build_model(Architecture{}, 42);
  const auto ra = train(a, data, quick(5));
  const auto rb = train(b, data, quick(5));
  CHECK(ra.history == rb.history);
  CHECK(a.params.fc_w == b.params.fc_w);
  REQUIRE(ra.history.size() == 5);
  int falling = 0;
  for (std::size_t e = 1; e < 5; ++e)
    falling += ra.history[e].train_loss <= ra.history[e - 1].train_loss;
  CHECK(falling >= 3);
  CHECK(ra.history.front().epoch == 1);
  CHECK(ra.test.rows == data.count_split(SplitTag::Test));
}

TEST_CASE("evaluate agrees with counting argmax-correct rows") {
  const auto data = prepared(300, 3);
  auto model = build_model(small_arch(), 6);
  train(model, data, quick(2));
  const auto ev = evaluate(model, data, SplitTag::Val);
  const auto rows = data.rows_in(SplitTag::Val);
  const auto pred = predict(model, gather_features(data, rows));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    correct += pred[i] == data.labels[rows[i]];
  CHECK(ev.metrics.accuracy == static_cast<double>(correct) / static_cast<double>(rows.size()));
  CHECK(ev.metrics.confusion.total() == rows.size());

  auto no_val = data;
  for (auto &t : no_val.split)
    if (t == SplitTag::Val)
      t = SplitTag::Train;
  CHECK_THROWS_AS(evaluate(model, no_val, SplitTag::Val), Error);
}

TEST_CASE("argmax ties resolve to class 0") {
  CHECK(argmax_rows(NumericGrid({2, 2}, {0.5, 0.5, 0.4, 0.6})) == std::vector<int>{0, 1});
}

TEST_CASE("an empty train split is an error") {
  auto data = prepared(60, 4);
  for (auto &t : data.split)
    t = SplitTag::Test;
  auto model = build_model(small_arch(), 1);
  CHECK_THROWS_AS(train(model, data, quick(1)), Error);
}

TEST_CASE("multi_run seeds, forced seeds and thread independence") {
  const auto data = prepared(200, 5);
  const auto arch = small_arch();
  const auto seq = multi_run(data, arch, quick(2), {3, 42, false, false});
  REQUIRE(seq.runs.size() == 3);
  CHECK(seq.runs[0].metrics.seed == 42);
  CHECK(seq.runs[2].metrics.seed == 44);
  const auto par = multi_run(data, arch, quick(2), {3, 42, false, true});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(par.runs[i].metrics.history == seq.runs[i].metrics.history);

  const auto same = multi_run(data, arch, quick(2), {3, 7, true, false});
  CHECK(same.summary.accuracy.std == 0.0);
  CHECK(same.summary.accuracy.min == same.summary.accuracy.max);
  CHECK(same.summary.accuracy.mean == same.summary.accuracy.min);
  CHECK_THROWS_AS(multi_run(data, arch, quick(1), {1, 1, false, false}), Error);

  std::vector<double> acc;
  for (const auto &r : seq.runs)
    acc.push_back(r.metrics.test.metrics.accuracy);
  CHECK(std::abs(seq.summary.accuracy.mean - oracle::mean(acc)) < 1e-12);
}

TEST_CASE("separable synthetic data is learned to 99% train accuracy in 100 epochs") {
  const auto data = prepared(2000, 42);
  auto model = build_model(Architecture{}, 42);
  const auto run = train(model, data, HyperParams{});
  REQUIRE(run.history.size() == 100);
  CHECK(run.history.back().train_accuracy >= 0.99);
}

TEST_CASE("report files round trip") {
  const auto dir = testutil::scratch("report");
  std::vector<EpochRecord> history;
  for (std::size_t e = 1; e <= 100; ++e)
    history.push_back({e, 1.0 / static_cast<double>(e), 0.3 + 1e-3 * static_cast<double>(e),
                       0.5 + 0.004 * static_cast<double>(e), std::nan("")});
  write_curves(dir / "c.csv", history);
  const auto text = testutil::read_file(dir / "c.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 101);
  const auto back = read_curves(dir / "c.csv");
  REQUIRE(back.size() == 100);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(back[i].train_loss == history[i].train_loss);
    CHECK(back[i].val_loss == history[i].val_loss);
    CHECK(std::isnan(back[i].val_accuracy));
  }

  MetricsRow row{"cnn-gru-smote", 0, 42, compute_metrics({3, 2, 4, 1})};
  write_metrics_table(dir / "m.csv", {row});
  const auto rows = read_metrics_table(dir / "m.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].model == "cnn-gru-smote");
  CHECK(rows[0].seed == 42);
  CHECK(rows[0].metrics.confusion == row.metrics.confusion);
  CHECK(rows[0].metrics.accuracy == row.metrics.accuracy);

  RunMetrics run;
  run.seed = 42;
  run.history = history;
  run.train_seconds = 1.5;
  const auto files = emit_report(dir, "tag", 0, run, {{"parameter_count", "25346"}});
  CHECK(files.curves.filename() == "curves_tag_seed42.csv");
  const auto manifest = read_metadata(files.manifest);
  auto has = [&](const std::string &k) {
    return std::any_of(manifest.begin(), manifest.end(),
                       [&](const auto &kv) { return kv.first == k; });
  };
  CHECK(has("parameter_count"));
  CHECK(has("training_seconds"));
  CHECK(has("seed"));
  CHECK_THROWS_AS(emit_report(dir, "t", 0, RunMetrics{}, {}), Error);
  CHECK_THROWS_AS(emit_report(dir / "c.csv" / "sub", "t", 0, run, {}), Error);
}

}
