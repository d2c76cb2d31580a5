#include "confope/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "doctest.h"

#include "confope/metrics.hpp"

using namespace confope;

TEST_SUITE("harness") {

TEST_CASE("sweep config parses a complete document") {
  const std::string text = R"({
    "sigma_o_list": [0.5, 1.0],
    "w_list": [-3, -2, 1, 2],
    "n_list": [50000, 200000],
    "replications": 10,
    "master_seed": 42,
    "rff": {"gamma_k": 5.0, "d": 100, "seeds": 5}
  })";
  const SweepConfig cfg = parse_sweep_config(text);
  CHECK(cfg.sigma_o_list == std::vector<double>{0.5, 1.0});
  CHECK(cfg.w_list == std::vector<double>{-3.0, -2.0, 1.0, 2.0});
  CHECK(cfg.n_list == std::vector<long>{50000, 200000});
  CHECK(cfg.replications == 10);
  CHECK(cfg.master_seed == 42);
  CHECK(cfg.rff.gamma_k == 5.0);
  CHECK(cfg.rff.d == 100);
  CHECK(cfg.rff.seeds == 5);

  const SweepConfig upper = parse_sweep_config(R"({
    "sigma_o_list": [0.0], "w_list": [1], "n_list": [300],
    "rff": {"D": 64}
  })");
  CHECK(upper.rff.d == 64);
  CHECK(upper.replications == 10);
}

TEST_CASE("sweep config rejects malformed documents") {
  CHECK_THROWS(parse_sweep_config("not json"));
  CHECK_THROWS(parse_sweep_config("[1, 2]"));
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [1], "w_list": [1], "n_list": [300], "bogus": 1})"));
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [1], "w_list": [1], "n_list": [300],
          "rff": {"width": 3}})"));
  // w outside the supported set
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [1], "w_list": [0.5], "n_list": [300]})"));
  // too few steps for a single trajectory harvest
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [1], "w_list": [1], "n_list": [200]})"));
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [-1], "w_list": [1], "n_list": [300]})"));
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [1], "w_list": [1], "n_list": [300],
          "replications": 0})"));
  CHECK_THROWS(parse_sweep_config(
      R"({"sigma_o_list": [1], "w_list": [1], "n_list": [300],
          "rff": {"seeds": 0}})"));
  CHECK_THROWS(parse_sweep_config(R"({"w_list": [1], "n_list": [300]})"));
}

TEST_CASE("toy table validates its configuration") {
  ToyTableConfig cfg;
  cfg.num_trajectories = 0;
  CHECK_THROWS(run_toy_table(cfg));
  cfg.num_trajectories = 10;
  cfg.horizon = 2;
  CHECK_THROWS(run_toy_table(cfg));
}

TEST_CASE("value key separates nearby parameter values") {
  CHECK(value_key(0.5) != value_key(1.0));
  CHECK(value_key(-2.0) != value_key(2.0));
  CHECK(value_key(0.5) == value_key(0.5));
}

TEST_CASE("tiny sweep reruns bitwise and summarizes consistently") {
  SweepConfig cfg;
  cfg.sigma_o_list = {0.5};
  cfg.w_list = {1.0};
  cfg.n_list = {300};
  cfg.replications = 2;
  cfg.master_seed = 7;
  cfg.rff.d = 8;
  cfg.rff.seeds = 2;

  const std::vector<SweepRow> rows = run_1d_sweep(cfg);
  const std::vector<SweepRow> again = run_1d_sweep(cfg);

  REQUIRE(rows.size() == 4);  // 1 sigma x 1 w x 1 n x 2 reps x 2 methods
  REQUIRE(again.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].estimate == again[i].estimate);
    CHECK(rows[i].truth == again[i].truth);
    CHECK(rows[i].method == again[i].method);
    CHECK(rows[i].replication == again[i].replication);
  }

  // Sorted by (sigma, w, n, replication, method) with both methods present.
  bool saw_vm = false, saw_naive = false;
  for (const auto& r : rows) {
    CHECK(r.env == "dyn1d");
    CHECK(r.sigma_o == 0.5);
    CHECK(r.w == 1.0);
    CHECK(r.n == 300);
    CHECK(std::isfinite(r.estimate));
    CHECK(r.truth != 0.0);
    if (r.method == "vm_linear") saw_vm = true;
    if (r.method == "lstdq_naive") saw_naive = true;
  }
  CHECK(saw_vm);
  CHECK(saw_naive);
  auto key = [](const SweepRow& r) {
    return std::make_tuple(r.sigma_o, r.w, r.n, r.replication, r.method);
  };
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(key(rows[i - 1]) < key(rows[i]));

  // Truth is shared within the (sigma, w) cell.
  for (const auto& r : rows) CHECK(r.truth == rows[0].truth);

  // Summary agrees with a direct metrics recomputation.
  const std::vector<SweepSummaryRow> summary = summarize_sweep(rows);
  REQUIRE(summary.size() == 2);
  for (const auto& s : summary) {
    std::vector<double> est;
    for (const auto& r : rows)
      if (r.method == s.method) est.push_back(r.estimate);
    REQUIRE(est.size() == 2);
    CHECK(s.replications == 2);
    CHECK(s.rel_bias == relative_bias(est, rows[0].truth));
    CHECK(s.rel_mse == relative_mse(est, rows[0].truth));
    CHECK(s.ci_halfwidth == ci_halfwidth(est, rows[0].truth));
  }

  // CSV round trip preserves every numeric field bitwise.
  const std::string path = "/tmp/confope_test_sweep.csv";
  write_sweep_csv(path, rows);
  const std::vector<SweepRow> back = read_sweep_csv(path);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].env == rows[i].env);
    CHECK(back[i].sigma_o == rows[i].sigma_o);
    CHECK(back[i].w == rows[i].w);
    CHECK(back[i].n == rows[i].n);
    CHECK(back[i].replication == rows[i].replication);
    CHECK(back[i].method == rows[i].method);
    CHECK(back[i].estimate == rows[i].estimate);
    CHECK(back[i].truth == rows[i].truth);
  }
  std::remove(path.c_str());

  const std::string spath = "/tmp/confope_test_summary.csv";
  write_sweep_summary_csv(spath, summary);
  std::FILE* f = std::fopen(spath.c_str(), "r");
  REQUIRE(f != nullptr);
  char line[256];
  REQUIRE(std::fgets(line, sizeof(line), f) != nullptr);
  CHECK(std::string(line).find("rel_bias") != std::string::npos);
  std::fclose(f);
  std::remove(spath.c_str());

  CHECK_THROWS(run_1d_sweep(SweepConfig{}));
}

TEST_CASE("toy table csv writer emits one row per epsilon") {
  std::vector<ToyTableRow> rows{{0.25, 10.0, 10.0, 11.5},
                                {0.5, 10.0, 10.0, 10.1}};
  const std::string path = "/tmp/confope_test_toy.csv";
  write_toy_table_csv(path, rows);
  std::FILE* f = std::fopen(path.c_str(), "r");
  REQUIRE(f != nullptr);
  int lines = 0;
  char buf[256];
  while (std::fgets(buf, sizeof(buf), f) != nullptr) ++lines;
  std::fclose(f);
  CHECK(lines == 3);
  std::remove(path.c_str());
}

}  // TEST_SUITE
