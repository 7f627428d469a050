// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "oracles.hpp"
#include "selection_fixture.hpp"
#include "test_util.hpp"
#include "vmclass/error.hpp"
#include "vmclass/selection.hpp"

using namespace vmclass;

namespace {

VmRuntime vm(std::string id, double mem, std::vector<double> series = {1, 2}) {
  return {std::move(id), mem, std::move(series), std::vector<double>(9, 0.0)};
}

std::vector<std::string> ids(const MigrationRanking &r) { return r.order(); }

/// Reference order: sort by (key, vm_id) in the given direction.
std::vector<std::string> by_key(const HostSnapshot &h, auto key, bool descending) {
  std::vector<std::pair<double, std::string>> rows;
  for (const auto &v : h.vms)
    rows.emplace_back(key(v), v.vm_id);
  std::sort(rows.begin(), rows.end(), [&](const auto &a, const auto &b) {
    if (a.first != b.first)
      return descending ? a.first > b.first : a.first < b.first;
    return a.second < b.second;
  });
  std::vector<std::string> out;
  for (const auto &r : rows)
    out.push_back(r.second);
  return out;
}

oracle::Vec others_sum(const HostSnapshot &h, const VmRuntime &self) {
  oracle::Vec s(self.cpu_series.size(), 0.0);
  for (const auto &v : h.vms)
    if (v.vm_id != self.vm_id)
      for (std::size_t t = 0; t < s.size(); ++t)
        s[t] += v.cpu_series[t];
  return s;
}

} // namespace

TEST_SUITE("selection") {

TEST_CASE("random policy: single VM, seeding and uniform first pick") {
  HostSnapshot one{"h", 1.0, {vm("only", 1)}};
  CHECK(ids(select_random(one, 3)) == std::vector<std::string>{"only"});
  HostSnapshot four{"h", 1.0, {vm("a", 1), vm("b", 1), vm("c", 1), vm("d", 1)}};
  CHECK(ids(select_random(four, 7)) == ids(select_random(four, 7)));
  std::map<std::string, int> first;
  for (std::uint64_t seed = 0; seed < 10000; ++seed)
    ++first[select_random(four, seed).entries.front().vm_id];
  for (const auto &[id, n] : first)
    CHECK(std::abs(n / 10000.0 - 0.25) <= 0.02);
  CHECK(first.size() == 4);
}

TEST_CASE("minimum migration time") {
  HostSnapshot h{"h", 1.0, {vm("vm1", 4), vm("vm2", 2), vm("vm3", 8)}};
  const auto r = select_min_migration_time(h);
  CHECK(ids(r) == std::vector<std::string>{"vm2", "vm1", "vm3"});
  CHECK(r.entries[0].score == 2.0);
  CHECK(r.entries[2].score == 8.0);
  HostSnapshot tie{"h", 1.0, {vm("b", 3), vm("a", 3), vm("c", 3)}};
  CHECK(ids(select_min_migration_time(tie)) == std::vector<std::string>{"a", "b", "c"});
  auto fast = h;
  fast.bandwidth = 2.0;
  const auto rf = select_min_migration_time(fast);
  CHECK(ids(rf) == ids(r));
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(rf.entries[i].score == r.entries[i].score / 2.0);
  fast.bandwidth = 0.0;
  CHECK_THROWS_AS(select_min_migration_time(fast), Error);
}

TEST_CASE("minimum utilization") {
  HostSnapshot h{"h", 1.0, {vm("vm1", 1, {10, 10}), vm("vm2", 1, {40, 60}), vm("vm3", 1, {30})}};
  CHECK(ids(select_min_utilization(h)) == std::vector<std::string>{"vm1", "vm3", "vm2"});
  HostSnapshot c{"h", 1.0, {vm("x", 1, {7.5, 7.5, 7.5})}};
  CHECK(select_min_utilization(c).entries[0].score == 7.5);
  std::mt19937_64 rng(41);
  const auto rnd = fixture::random_host(6, 12, rng);
  for (const auto &e : select_min_utilization(rnd).entries) {
    const auto &v = *std::find_if(rnd.vms.begin(), rnd.vms.end(),
                                  [&](const auto &x) { return x.vm_id == e.vm_id; });
    CHECK(std::abs(e.score - oracle::mean(v.cpu_series)) <= 1e-12);
  }
  HostSnapshot empty_series{"h", 1.0, {vm("x", 1, {})}};
  CHECK_THROWS_AS(select_min_utilization(empty_series), Error);
}

TEST_CASE("maximum correlation") {
  HostSnapshot pair{"h", 1.0, {vm("B", 1, {2, 4, 6}), vm("A", 1, {1, 2, 3})}};
  const auto rp = select_max_correlation(pair);
  CHECK(ids(rp) == std::vector<std::string>{"A", "B"});
  CHECK(std::abs(rp.entries[0].score - 1.0) < 1e-12);

  HostSnapshot three{"h", 1.0,
                     {vm("A", 1, {1, 2, 3}), vm("B", 1, {2, 4, 6}), vm("C", 1, {3, 2, 1})}};
  const auto r3 = select_max_correlation(three);
  CHECK(ids(r3) == std::vector<std::string>{"A", "B", "C"});
  CHECK(std::abs(r3.entries[2].score + 1.0) < 1e-12);
  CHECK(r3.entries[1].score == 0.0);
  CHECK(r3.entries[1].flagged);

  std::mt19937_64 rng(42);
  const auto rnd = fixture::random_host(3, 10, rng);
  for (const auto &e : select_max_correlation(rnd).entries) {
    const auto &v = *std::find_if(rnd.vms.begin(), rnd.vms.end(),
                                  [&](const auto &x) { return x.vm_id == e.vm_id; });
    CHECK(std::abs(e.score - oracle::pearson(v.cpu_series, others_sum(rnd, v))) <= 1e-12);
  }
  HostSnapshot solo{"h", 1.0, {vm("A", 1, {1, 2})}};
  CHECK_THROWS_AS(select_max_correlation(solo), Error);
  HostSnapshot ragged{"h", 1.0, {vm("A", 1, {1, 2}), vm("B", 1, {1, 2, 3})}};
  CHECK_THROWS_AS(select_max_correlation(ragged), Error);
}

TEST_CASE("host-total correlation target includes the VM itself") {
  std::mt19937_64 rng(43);
  const auto h = fixture::random_host(4, 8, rng);
  oracle::Vec total(8, 0.0);
  for (const auto &v : h.vms)
    for (std::size_t t = 0; t < 8; ++t)
      total[t] += v.cpu_series[t];
  for (const auto &e : select_max_correlation(h, CorrelationTarget::HostTotal).entries) {
    const auto &v = *std::find_if(h.vms.begin(), h.vms.end(),
                                  [&](const auto &x) { return x.vm_id == e.vm_id; });
    CHECK(std::abs(e.score - oracle::pearson(v.cpu_series, total)) <= 1e-12);
  }
}

TEST_CASE("utilization slope") {
  CHECK(least_squares_slope(std::vector<double>{10, 20, 30}) == doctest::Approx(10.0));
  CHECK(least_squares_slope(std::vector<double>{4, 4, 4, 4}) == 0.0);
  std::mt19937_64 rng(44);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<double> y;
  for (int t = 0; t < 30; ++t)
    y.push_back(5.0 + 2.0 * t + noise(rng));
  CHECK(std::abs(least_squares_slope(y) - oracle::slope(y)) <= 1e-9);
  HostSnapshot h{"h", 1.0, {vm("up", 1, {1, 5, 9}), vm("flat", 1, {3, 3, 3}), vm("down", 1, {9, 5, 1})}};
  CHECK(ids(select_utilization_slope(h)) == std::vector<std::string>{"up", "flat", "down"});
  HostSnapshot short_series{"h", 1.0, {vm("x", 1, {1})}};
  CHECK_THROWS_AS(select_utilization_slope(short_series), Error);
}

TEST_CASE("pearson flags zero variance") {
  bool degenerate = false;
  CHECK(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}, &degenerate) == 0.0);
  CHECK(degenerate);
  CHECK(series_mean(std::vector<double>{1, 2, 3, 4}) == 2.5);
}

TEST_CASE("every policy returns an order-invariant permutation matching its oracle") {
  std::mt19937_64 rng(45);
  const auto &clf = fixture::classifier();
  for (int trial = 0; trial < 25; ++trial) {
    auto host = fixture::random_host(10, 12, rng, trial % 2 == 0);
    auto shuffled = host;
    std::shuffle(shuffled.vms.begin(), shuffled.vms.end(), rng);
    const std::uint64_t seed = rng();
    SelectionOptions opts{seed, CorrelationTarget::LeaveOneOut, &clf.model};
    std::set<std::string> all;
    for (const auto &v : host.vms)
      all.insert(v.vm_id);
    for (Policy p : all_policies()) {
      CAPTURE(to_string(p));
      const auto a = rank_host(host, p, opts);
      const auto b = rank_host(shuffled, p, opts);
      CHECK(a.order() == b.order());
      const auto order = a.order();
      CHECK(std::set<std::string>(order.begin(), order.end()) == all);
      CHECK(order.size() == host.vms.size());
    }
    const double bw = host.bandwidth;
    CHECK(ids(select_min_migration_time(host)) ==
          by_key(host, [&](const VmRuntime &v) { return v.memory_used / bw; }, false));
    CHECK(ids(select_min_utilization(host)) ==
          by_key(host, [](const VmRuntime &v) { return oracle::mean(v.cpu_series); }, false));
    CHECK(ids(select_utilization_slope(host)) ==
          by_key(host, [](const VmRuntime &v) { return oracle::slope(v.cpu_series); }, true));
    CHECK(ids(select_max_correlation(host)) ==
          by_key(host,
                 [&](const VmRuntime &v) {
                   return oracle::pearson(v.cpu_series, others_sum(host, v));
                 },
                 true));
  }
}

TEST_CASE("classifier agrees with generator labels on held-out data") {
  const auto &clf = fixture::classifier();
  const auto held = fixture::held_out(400, 777);
  std::vector<VmRuntime> vms;
  for (const auto &[v, label] : held)
    vms.push_back(v);
  const auto classes = classify_vms(clf.model, vms);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < held.size(); ++i)
    agree += classes[i] == held[i].second;
  CHECK(static_cast<double>(agree) / static_cast<double>(held.size()) >= 0.95);
  CHECK(classify_vms(clf.model, vms) == classes);
  for (std::size_t i = 0; i < 20; ++i)
    CHECK(classify_vms(clf.model, std::span(&vms[i], 1)).front() == classes[i]);
  auto bad = vms.front();
  bad.features.resize(8);
  CHECK_THROWS_AS(classify_vms(clf.model, std::span(&bad, 1)), Error);
}

TEST_CASE("classifier-first ordering") {
  const auto &clf = fixture::classifier();
  const auto held = fixture::held_out(200, 778);
  std::vector<VmRuntime> zeros, ones;
  for (const auto &[v, label] : held) {
    std::vector<VmRuntime> one_vm = {v};
    (classify_vms(clf.model, one_vm).front() == 0 ? zeros : ones).push_back(v);
  }
  REQUIRE(zeros.size() >= 5);
  REQUIRE(ones.size() >= 5);

  HostSnapshot h{"h", 1.0, {ones[0], zeros[0], zeros[1]}};
  for (auto &v : h.vms)
    v.memory_used = 4.0;
  const auto r = select_classifier_first(h, clf.model);
  CHECK(r.entries[0].predicted_class == 0);
  CHECK(r.entries[1].predicted_class == 0);
  CHECK(r.entries[2].vm_id == ones[0].vm_id);

  HostSnapshot all0{"h", 2.0, {zeros[0], zeros[1], zeros[2], zeros[3]}};
  CHECK(ids(select_classifier_first(all0, clf.model)) == ids(select_min_migration_time(all0)));

  HostSnapshot mixed{"h", 3.0, {zeros[0], ones[0], zeros[1], ones[1], zeros[2], ones[2]}};
  mixed.vms[0].memory_used = mixed.vms[3].memory_used = 2.0;
  std::vector<std::tuple<int, double, std::string>> want;
  for (const auto &v : mixed.vms) {
    std::vector<VmRuntime> one_vm = {v};
    want.emplace_back(classify_vms(clf.model, one_vm).front(), v.memory_used / mixed.bandwidth,
                      v.vm_id);
  }
  std::sort(want.begin(), want.end());
  std::vector<std::string> want_ids;
  for (const auto &w : want)
    want_ids.push_back(std::get<2>(w));
  CHECK(ids(select_classifier_first(mixed, clf.model)) == want_ids);
}

TEST_CASE("malformed hosts and policy names are rejected") {
  HostSnapshot empty{"h", 1.0, {}};
  CHECK_THROWS_AS(select_min_migration_time(empty), Error);
  HostSnapshot dup{"h", 1.0, {vm("a", 1), vm("a", 2)}};
  CHECK_THROWS_AS(select_min_migration_time(dup), Error);
  try {
    parse_policy("fastest");
    FAIL("expected a usage error");
  } catch (const Error &e) {
    CHECK(e.code() == ErrorCode::Usage);
    CHECK(std::string(e.what()).find("min_migration_time") != std::string::npos);
  }
  for (Policy p : all_policies())
    CHECK(parse_policy(to_string(p)) == p);
}

TEST_CASE("host and ranking files") {
  const auto dir = testutil::scratch("hosts");
  std::mt19937_64 rng(46);
  std::vector<HostSnapshot> hosts = {fixture::random_host(3, 4, rng),
                                     fixture::random_host(2, 4, rng)};
  hosts[1].host_id = "h2";
  write_hosts(dir / "hosts.csv", hosts);
  const auto back = read_hosts(dir / "hosts.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].host_id == "h2");
  CHECK(back[0].bandwidth == hosts[0].bandwidth);
  CHECK(back[0].vms[2].cpu_series == hosts[0].vms[2].cpu_series);
  CHECK(back[1].vms[1].features == hosts[1].vms[1].features);
  write_rankings(dir / "r.csv", {select_min_migration_time(back[0])});
  const auto text = testutil::read_file(dir / "r.csv");
  CHECK(text.rfind("host_id,rank,vm_id,score,class,policy\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}

}
