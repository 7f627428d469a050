// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vmclass/error.hpp"
#include "vmclass/trace.hpp"

using namespace vmclass;

namespace {

const char *kHeader =
  "vm_id,subscription_id,deployment_id,created,deleted,cpu_min,cpu_avg,cpu_max,core_count,"
  "memory,category\n";

VmRecord record(Category c, double created = 0, double deleted = 3600, double cores = 1) {
  VmRecord r;
  r.vm_id = "vm";
  r.subscription_id = "s";
  r.deployment_id = "d";
  r.created = created;
  r.deleted = deleted;
  r.cpu_min = 1;
  r.cpu_avg = 2;
  r.cpu_max = 3;
  r.core_count = cores;
  r.memory = 2;
  r.category = c;
  return r;
}

ErrorCode code_of(auto &&fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Usage;
}

Dataset numeric(std::vector<double> column) {
  const std::size_t n = column.size();
  return Dataset::from_rows({"x"}, std::move(column), std::vector<int>(n, 0));
}

} // namespace

TEST_SUITE("trace") {

TEST_CASE("category strings map case-insensitively") {
  CHECK(parse_category("Delay-insensitive") == Category::DelayInsensitive);
  CHECK(parse_category("delay-insensitive") == Category::DelayInsensitive);
  CHECK(parse_category("INTERACTIVE") == Category::Interactive);
  CHECK(parse_category("Unknown") == Category::Unknown);
  CHECK(parse_category("batch") == Category::Unknown);
}

TEST_CASE("parse_trace reads rows with columns in any order") {
  const auto dir = testutil::scratch("parse");
  testutil::write_file(dir / "t.csv",
                       "category,vm_id,subscription_id,deployment_id,created,deleted,cpu_min,"
                       "cpu_avg,cpu_max,core_count,memory\n"
                       "Delay-insensitive,a,s1,d1,0,7200,1,20,40,2,3.5\n"
                       "Unknown,b,s1,d2,10,20,5,6,7,1,1.75\n"
                       "Interactive,c,s2,d2,0,3600,10,70,90,4,7\n");
  ParseReport report;
  const auto recs = parse_trace(TraceSource::csv(dir / "t.csv"), {}, &report);
  REQUIRE(recs.size() == 3);
  CHECK(report.data_rows == 3);
  CHECK(recs[0].category == Category::DelayInsensitive);
  CHECK(recs[1].category == Category::Unknown);
  CHECK(recs[2].category == Category::Interactive);
  CHECK(recs[0].vm_id == "a");
  CHECK(recs[0].deleted == 7200);
  CHECK(recs[2].memory == 7);
}

TEST_CASE("the p95 header is accepted for the third CPU column") {
  const auto dir = testutil::scratch("p95");
  testutil::write_file(dir / "t.csv",
                       "vmid,subscriptionid,deploymentid,vmcreated,vmdeleted,p95maxcpu,avgcpu,"
                       "maxcpu,vmcorecount,vmmemory,vmcategory\n"
                       "a,s,d,0,60,9,5,10,1,1,Interactive\n");
  const auto recs = parse_trace(TraceSource::csv(dir / "t.csv"));
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].cpu_min == 9);
}

TEST_CASE("a missing column is a schema error naming it") {
  const auto dir = testutil::scratch("schema");
  testutil::write_file(dir / "t.csv", "vm_id,subscription_id,deployment_id,created,deleted,"
                                      "cpu_min,cpu_avg,cpu_max,core_count,category\n");
  try {
    parse_trace(TraceSource::csv(dir / "t.csv"));
    FAIL("expected a schema error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Schema);
    CHECK(std::string(e.what()).find("memory") != std::string::npos);
  }
}

TEST_CASE("malformed numbers fail fast with the line number, or are skipped on request") {
  const auto dir = testutil::scratch("rows");
  testutil::write_file(dir / "t.csv", std::string(kHeader) +
                                        "a,s,d,0,60,1,2,3,1,1,Interactive\n"
                                        "b,s,d,0,sixty,1,2,3,1,1,Interactive\n"
                                        "c,s,d,0,60,1,2,3,1,1,Delay-insensitive\n");
  try {
    parse_trace(TraceSource::csv(dir / "t.csv"));
    FAIL("expected a row error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Row);
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  ParseReport report;
  const auto recs = parse_trace(TraceSource::csv(dir / "t.csv"), {true}, &report);
  CHECK(recs.size() == 2);
  CHECK(report.skipped_lines == std::vector<std::size_t>{3});
  CHECK(code_of([&] { parse_trace(TraceSource::csv(dir / "absent.csv")); }) == ErrorCode::Io);
}

TEST_CASE("write_trace and parse_trace round trip") {
  const auto dir = testutil::scratch("trace_rt");
  const auto recs = generate_synthetic({50, 9, 0.3, 0.0, 0.1});
  write_trace(dir / "t.csv", recs);
  CHECK(parse_trace(TraceSource::csv(dir / "t.csv")) == recs);
}

TEST_CASE("clean drops unknown categories and keeps order") {
  auto a = record(Category::Interactive);
  a.vm_id = "a";
  auto b = record(Category::Unknown);
  auto c = record(Category::DelayInsensitive);
  c.vm_id = "c";
  const auto out = clean({a, b, c});
  REQUIRE(out.size() == 2);
  CHECK(out[0].vm_id == "a");
  CHECK(out[1].vm_id == "c");
  CHECK(clean({b, b}).empty());
  const auto recs = generate_synthetic({200, 5, 0.5, 0.0, 0.3});
  CHECK(clean(clean(recs)) == clean(recs));
}

TEST_CASE("encode_nominal assigns codes by first appearance") {
  CHECK(encode_nominal({"a", "b", "a"}).codes == std::vector<int>{0, 1, 0});
  CHECK(encode_nominal({"x"}).codes == std::vector<int>{0});
  const auto e = encode_nominal({"Delay-insensitive", "Interactive"});
  CHECK(e.codes == std::vector<int>{0, 1});

  std::mt19937_64 rng(1);
  std::vector<std::string> column;
  for (int i = 0; i < 300; ++i)
    column.push_back("v" + std::to_string(rng() % 37));
  const auto enc = encode_nominal(column);
  std::set<std::string> distinct(column.begin(), column.end());
  CHECK(enc.values.size() == distinct.size());
  for (std::size_t i = 0; i < column.size(); ++i)
    CHECK(enc.values[static_cast<std::size_t>(enc.codes[i])] == column[i]);
}

TEST_CASE("encode_records fixes labels: delay-insensitive 0, interactive 1") {
  const auto enc = encode_records({record(Category::Interactive),
                                   record(Category::DelayInsensitive)});
  CHECK(enc.data.labels == std::vector<int>{1, 0});
  CHECK(enc.data.column_names == raw_feature_columns());
}

TEST_CASE("aggregate_features derives lifetime and core-hours") {
  const auto ds = aggregate_features(std::vector<VmRecord>{
    record(Category::Interactive, 0, 7200, 2), record(Category::Interactive, 50, 50, 4)});
  CHECK(ds.column_names == aggregated_feature_columns());
  CHECK(ds.cols() == 9);
  const auto life = ds.column_index("lifetime_hours");
  const auto ch = ds.column_index("core_hour");
  CHECK(ds.features.at(0, life) == 2.0);
  CHECK(ds.features.at(0, ch) == 4.0);
  CHECK(ds.features.at(1, ch) == 0.0);
  CHECK(aggregate_features(std::vector<VmRecord>{record(Category::Interactive)},
                           {true})
          .cols() == 6);
  CHECK(code_of([] {
          aggregate_features(std::vector<VmRecord>{record(Category::Interactive, 10, 5)});
        }) == ErrorCode::Row);
}

TEST_CASE("min-max normalization") {
  const auto n = minmax_normalize(numeric({2, 4, 6}), StatsScope::WholeData);
  CHECK(n.data.features[0] == 0.0);
  CHECK(n.data.features[1] == 0.5);
  CHECK(n.data.features[2] == 1.0);
  const auto mid = minmax_normalize(numeric({0, 5, 10}), StatsScope::WholeData);
  CHECK(mid.data.features[1] == 0.5);
  CHECK(mid.stats[0].min == 0.0);
  CHECK(mid.stats[0].max == 10.0);

  const auto flat = minmax_normalize(numeric({3, 3, 3}), StatsScope::WholeData);
  CHECK(flat.warnings.size() == 1);
  for (double v : flat.data.features.data())
    CHECK(v == 0.0);
}

TEST_CASE("normalized columns span exactly [0,1] over the whole data") {
  const auto ds = aggregate_features(clean(generate_synthetic({300, 4})));
  const auto n = minmax_normalize(ds, StatsScope::WholeData);
  for (std::size_t c = 0; c < n.data.cols(); ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t r = 0; r < n.data.rows(); ++r) {
      lo = std::min(lo, n.data.features.at(r, c));
      hi = std::max(hi, n.data.features.at(r, c));
    }
    CHECK(lo == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(hi == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("train-only normalization fits on Train rows and stays within [0,1]") {
  auto ds = split(numeric({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}), {}, 3);
  const auto n = minmax_normalize(ds, StatsScope::TrainOnly);
  double lo = 1e9, hi = -1e9;
  for (auto i : ds.rows_in(SplitTag::Train)) {
    lo = std::min(lo, ds.features[i]);
    hi = std::max(hi, ds.features[i]);
  }
  CHECK(n.stats[0].min == lo);
  CHECK(n.stats[0].max == hi);
  for (double v : n.data.features.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(code_of([] { minmax_normalize(numeric({1, 2}), StatsScope::TrainOnly); }) ==
        ErrorCode::Data);
}

TEST_CASE("normalization commutes with row reordering") {
  const auto ds = aggregate_features(clean(generate_synthetic({120, 8})));
  std::vector<std::size_t> perm(ds.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto a = minmax_normalize(ds, StatsScope::WholeData).data.select_rows(perm);
  const auto b = minmax_normalize(ds.select_rows(perm), StatsScope::WholeData).data;
  CHECK(a.features == b.features);
}

TEST_CASE("split assigns 7/1/2 of 10 rows and is deterministic") {
  std::vector<double> v(10);
  std::iota(v.begin(), v.end(), 0.0);
  const auto a = split(numeric(v), {0.7, 0.1, 0.2}, 42);
  CHECK(a.count_split(SplitTag::Train) == 7);
  CHECK(a.count_split(SplitTag::Val) == 1);
  CHECK(a.count_split(SplitTag::Test) == 2);
  CHECK(a.count_split(SplitTag::Unassigned) == 0);
  CHECK(split(numeric(v), {0.7, 0.1, 0.2}, 42).split == a.split);
  CHECK(split(numeric(v), {0.7, 0.1, 0.2}, 43).split != a.split);
}

TEST_CASE("split counts stay within one row of floor(n*f)") {
  for (std::size_t n = 3; n < 400; n += 7) {
    const auto ds = split(numeric(std::vector<double>(n, 1.0)), {0.7, 0.1, 0.2}, n);
    const double fr[3] = {0.7, 0.1, 0.2};
    const SplitTag tags[3] = {SplitTag::Train, SplitTag::Val, SplitTag::Test};
    std::size_t total = 0;
    for (int k = 0; k < 3; ++k) {
      const auto got = static_cast<double>(ds.count_split(tags[k]));
      const double want = std::floor(static_cast<double>(n) * fr[k]);
      CHECK(std::abs(got - want) <= 1.0);
      total += ds.count_split(tags[k]);
    }
    CHECK(total == n);
  }
}

TEST_CASE("split rejects tiny datasets and bad fractions") {
  CHECK(code_of([] { split(numeric({1, 2}), {}, 1); }) == ErrorCode::Data);
  CHECK(code_of([] { split(numeric({1, 2, 3, 4}), {0.5, 0.5, 0.5}, 1); }) ==
        ErrorCode::Usage);
}

TEST_CASE("synthetic generator honours the class ratio and seed") {
  const auto recs = generate_synthetic({100, 1, 0.5});
  const auto interactive = std::count_if(recs.begin(), recs.end(), [](const VmRecord &r) {
    return r.category == Category::Interactive;
  });
  CHECK(interactive == 50);
  CHECK(generate_synthetic({100, 1, 0.5}) == recs);
  CHECK(generate_synthetic({100, 2, 0.5}) != recs);
  for (const auto &r : recs) {
    CHECK(r.deleted >= r.created);
    CHECK(r.cpu_min <= r.cpu_avg);
    CHECK(r.cpu_avg <= r.cpu_max);
    CHECK(r.cpu_max <= 100.0);
  }
  CHECK(code_of([] { generate_synthetic({3}); }) == ErrorCode::Usage);
}

TEST_CASE("noise-free synthetic data is separable by one cpu_avg threshold") {
  const auto recs = generate_synthetic({1000, 42, 0.5, 0.0});
  std::vector<double> x;
  std::vector<int> y;
  for (const auto &r : recs) {
    x.push_back(r.cpu_avg);
    y.push_back(r.category == Category::Interactive ? 1 : 0);
  }
  CHECK(oracle::best_threshold_accuracy(x, y) >= 0.99);
}

TEST_CASE("datasets round trip through CSV with metadata") {
  const auto dir = testutil::scratch("dataset_rt");
  auto ds = split(aggregate_features(clean(generate_synthetic({40, 3}))), {}, 1);
  ds.provenance[3] = Provenance::Synthetic;
  write_dataset(dir / "d.csv", ds, {{"seed", "1"}, {"min.cpu_avg", "5"}});
  const auto back = read_dataset(dir / "d.csv");
  CHECK(back.features == ds.features);
  CHECK(back.labels == ds.labels);
  CHECK(back.split == ds.split);
  CHECK(back.provenance == ds.provenance);
  CHECK(back.column_names == ds.column_names);
  CHECK(dataset_hash(back) == dataset_hash(ds));
  const auto meta = read_metadata(dir / "d.csv.meta");
  CHECK(meta == Metadata{{"seed", "1"}, {"min.cpu_avg", "5"}});
}

}
