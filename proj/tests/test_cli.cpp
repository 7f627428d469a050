// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "test_util.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::string &args, const fs::path &dir, const std::string &env = "") {
  const auto out = dir / "stdout.txt", err = dir / "stderr.txt";
  const std::string cmd = "cd '" + dir.string() + "' && " + env + " '" VMCLASS_CLI_PATH "' " +
                          args + " >'" + out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, testutil::read_file(out),
          testutil::read_file(err)};
}

bool contains(const std::string &hay, const std::string &needle) {
  return hay.find(needle) != std::string::npos;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("ingest, train, evaluate, report and select end to end") {
  const auto dir = testutil::scratch("cli_e2e");
  auto r = run("ingest --synthetic-n 1000 --set input.unknown_fraction=0.1 -o out", dir);
  CHECK(r.code != 0);
  CHECK(contains(r.err, "code=E_USAGE"));

  r = run("ingest --synthetic-n 1000 --set input.synthetic_unknown_fraction=0.1 -o out", dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "rows read: 1000"));
  CHECK(contains(r.out, "removed 100 with unknown category"));
  CHECK(fs::exists(dir / "out" / "encoded.csv"));
  CHECK(fs::exists(dir / "out" / "dataset.csv.meta"));

  r = run("balance -o out --balance ros", dir);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "out" / "balanced.csv"));

  const std::string train_args =
    "train -o out --epochs 3 --n-runs 1 --set model.conv_filters=8 --set model.hidden=8";
  r = run(train_args, dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "run 0 seed 42 test: accuracy="));
  const auto metrics = testutil::read_file(dir / "out" / "metrics_cnn-gru-smote.csv");
  const auto ckpt = testutil::read_file(dir / "out" / "model_cnn-gru-smote_seed42.ckpt");
  r = run(train_args, dir);
  REQUIRE(r.code == 0);
  CHECK(testutil::read_file(dir / "out" / "metrics_cnn-gru-smote.csv") == metrics);
  CHECK(testutil::read_file(dir / "out" / "model_cnn-gru-smote_seed42.ckpt") == ckpt);

  r = run("evaluate -o out --checkpoint out/model_cnn-gru-smote_seed42.ckpt --split val", dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "val: accuracy="));

  r = run("report -o out", dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "accuracy"));
  CHECK(fs::exists(dir / "out" / "summary_cnn-gru-smote.csv"));

  r = run("synthgen -o out --synthetic-n 30 --hosts-out out/hosts.csv --stats out/normalization.txt",
          dir);
  REQUIRE(r.code == 0);
  r = run("select -o out --hosts out/hosts.csv --policy classifier_first "
          "--checkpoint out/model_cnn-gru-smote_seed42.ckpt",
          dir);
  REQUIRE(r.code == 0);
  const auto ranking = testutil::read_file(dir / "out" / "ranking_classifier_first.csv");
  CHECK(contains(ranking, "host_id,rank,vm_id,score,class,policy"));
  // Within each host every class-0 row precedes every class-1 row.
  std::string last_host;
  bool seen_one = false;
  std::size_t pos = ranking.find('\n') + 1;
  while (pos < ranking.size()) {
    const auto end = ranking.find('\n', pos);
    const auto line = ranking.substr(pos, end - pos);
    pos = end + 1;
    const auto host = line.substr(0, line.find(','));
    if (host != last_host) {
      last_host = host;
      seen_one = false;
    }
    const bool is_one = contains(line, ",1,classifier_first");
    CHECK_FALSE((seen_one && !is_one));
    seen_one = seen_one || is_one;
  }
}

TEST_CASE("random selection is reproducible and min migration time follows memory") {
  const auto dir = testutil::scratch("cli_select");
  testutil::write_file(dir / "hosts.csv",
                       "host_id,bandwidth,vm_id,memory_used,cpu_series,features\n"
                       "h,1,vm1,4,\"10,20\",\"0,0,0,0,0,0,0,0,0\"\n"
                       "h,1,vm2,2,\"30,20\",\"0,0,0,0,0,0,0,0,0\"\n"
                       "h,1,vm3,8,\"50,60\",\"0,0,0,0,0,0,0,0,0\"\n");
  REQUIRE(run("select --hosts hosts.csv --policy random --seed 7 --out a.csv", dir).code == 0);
  REQUIRE(run("select --hosts hosts.csv --policy random --seed 7 --out b.csv", dir).code == 0);
  CHECK(testutil::read_file(dir / "a.csv") == testutil::read_file(dir / "b.csv"));
  const auto r = run("select --hosts hosts.csv --policy min_migration_time --out m.csv", dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "h: vm2 vm1 vm3"));
  CHECK(contains(testutil::read_file(dir / "m.csv"), "h,1,vm2,2,,min_migration_time"));
}

TEST_CASE("errors carry machine-readable codes and nonzero exits") {
  const auto dir = testutil::scratch("cli_errors");
  testutil::write_file(dir / "hosts.csv", "host_id,bandwidth,vm_id,memory_used,cpu_series,features\n"
                                          "h,1,a,1,\"1,2\",\"\"\n");
  auto r = run("select --hosts hosts.csv --policy fastest", dir);
  CHECK(r.code != 0);
  CHECK(contains(r.err, "error: code=E_USAGE"));
  CHECK(contains(r.err, "utilization_slope"));

  r = run("train -o empty", dir);
  CHECK(r.code != 0);
  CHECK(contains(r.err, "error: code=E_IO"));

  testutil::write_file(dir / "trace.csv", "vm_id,created\nx,1\n");
  r = run("ingest -i trace.csv -o out", dir);
  CHECK(r.code != 0);
  CHECK(contains(r.err, "error: code=E_SCHEMA"));

  r = run("frobnicate", dir);
  CHECK(r.code != 0);
  CHECK(contains(r.err, "code=E_USAGE"));
}

TEST_CASE("output root comes from the environment unless a flag overrides it") {
  const auto dir = testutil::scratch("cli_env");
  auto r = run("synthgen --synthetic-n 20", dir, "VMCLASS_OUTPUT_ROOT=envroot");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "envroot" / "synthetic_trace.csv"));
  r = run("synthgen --synthetic-n 20 -o flagroot", dir, "VMCLASS_OUTPUT_ROOT=envroot");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir / "flagroot" / "synthetic_trace.csv"));
}

TEST_CASE("config files drive commands and the resolved config is written") {
  const auto dir = testutil::scratch("cli_config");
  testutil::write_file(dir / "run.ini", "[input]\nsynthetic_n = 200\n[output]\ndir = cfgout\n");
  auto r = run("ingest --config run.ini", dir);
  REQUIRE(r.code == 0);
  CHECK(contains(r.out, "rows read: 200"));
  CHECK(contains(testutil::read_file(dir / "cfgout" / "config_resolved.ini"), "synthetic_n=200"));
}

}
