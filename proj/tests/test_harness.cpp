#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fulcrum/harness.hpp"

using namespace fulcrum;

namespace {

const DeviceModel& device() {
  static const DeviceModel dev = DeviceModel::with_presets();
  return dev;
}

SweepSpec small_infer() {
  SweepSpec s = SweepSpec::defaults(Variant::Infer);
  s.power = {15, 35, 10};
  s.latency = {0.1, 0.5, 0.2};
  s.arrival = {30, 90, 30};
  s.full_fidelity = true;
  s.workloads = {{"yolo-infer", {}, {}, {}}};
  s.strategies = {"optimal", "gmd", "binary", "rnd40"};
  s.seeds = {1, 2};
  return s;
}

std::string csv_of(const std::vector<MetricRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

}  // namespace

TEST(Harness, TrainingSampleHas215Configs) {
  std::ifstream in(FULCRUM_SOURCE_DIR "/samples/sweep_train.json");
  ASSERT_TRUE(in);
  const auto spec = SweepSpec::from_json(nlohmann::json::parse(in));
  EXPECT_EQ(spec.config_count(), 215u);
  EXPECT_EQ(spec.seeds.size(), 3u);
  EXPECT_NO_THROW(spec.validate(device()));
}

TEST(Harness, ThinningKeepsEveryFifthValue) {
  SweepSpec s = SweepSpec::defaults(Variant::Infer);
  s.workloads = {{"resnet-infer", {}, {}, {}}};
  s.strategies = {"gmd"};
  // Power 10..50 -> 9 kept, latency 0.05..1.0 -> 20 kept, arrival 30..90 -> 13.
  EXPECT_EQ(s.config_count(), 9u * 20u * 13u);
  s.full_fidelity = true;
  EXPECT_EQ(s.config_count(), 41u * 96u * 13u);
}

TEST(Harness, ParseStrategy) {
  EXPECT_EQ(parse_strategy("rnd50").k, 50);
  EXPECT_EQ(parse_strategy("nn").k, 250);
  EXPECT_EQ(parse_strategy("nn250").name, "nn250");
  EXPECT_EQ(parse_strategy("oracle").name, "optimal");
  EXPECT_TRUE(parse_strategy("als").seeded());
  EXPECT_FALSE(parse_strategy("gmd").seeded());
  EXPECT_THROW(parse_strategy("rnd"), ConfigError);
  EXPECT_THROW(parse_strategy("rnd0"), ConfigError);
  EXPECT_THROW(parse_strategy("rndx"), ConfigError);
  EXPECT_THROW(parse_strategy("ga"), ConfigError);
}

TEST(Harness, ValidatesBeforeRunning) {
  auto s = small_infer();
  s.strategies.push_back("bogus");
  EXPECT_THROW(run_sweep(device(), s), ConfigError);
  s = small_infer();
  s.workloads.push_back({"missing", {}, {}, {}});
  EXPECT_THROW(run_sweep(device(), s), ConfigError);
  s = small_infer();
  s.workloads = {{"resnet-train", {}, {}, {}}};
  EXPECT_THROW(run_sweep(device(), s), ConfigError);
  s = small_infer();
  s.strategies = {"rnd100000"};
  EXPECT_THROW(run_sweep(device(), s), ConfigError);
  s = SweepSpec::defaults(Variant::Concurrent);
  s.workloads = {{"resnet-train", {}, {}, {}}};
  s.strategies = {"gmd"};
  EXPECT_THROW(s.validate(device()), ConfigError);
}

TEST(Harness, CsvHeaderIsStable) {
  std::ostringstream os;
  write_csv_header(os);
  EXPECT_EQ(os.str(),
            "strategy,variant,p_budget_w,lat_budget_s,arrival_rps,workload,solved,excess_time_pct,tput_loss_pct,"
            "power_delta_w,trials,seed,oracle_solved,violation\n");
}

TEST(Harness, OracleRowsHaveZeroExcessAndFullSolveRate) {
  const auto rows = run_sweep(device(), small_infer());
  const auto sum = summarize(rows);
  const auto* o = find_summary(sum, "optimal");
  ASSERT_NE(o, nullptr);
  EXPECT_EQ(o->pct_solved, 100.0);
  EXPECT_EQ(o->median, 0.0);
  EXPECT_EQ(o->violations, 0u);
  for (const auto& r : rows) {
    if (r.strategy == "optimal") {
      EXPECT_EQ(r.solved, r.oracle_solved);
      if (r.solved) EXPECT_EQ(*r.excess_time_pct, 0.0);
      EXPECT_FALSE(r.seed.has_value());
    }
    if (r.strategy == "rnd40") EXPECT_TRUE(r.seed.has_value());
    if (r.solved && r.oracle_solved) EXPECT_GE(r.metric(), 0.0);
    EXPECT_FALSE(r.violation) << r.strategy;
  }
}

TEST(Harness, PercentSolvedCountsOracleSolvableConfigsOnly) {
  std::vector<MetricRow> rows(4);
  for (auto& r : rows) r.strategy = "x", r.workload = "w";
  rows[0].oracle_solved = rows[1].oracle_solved = rows[2].oracle_solved = true;
  rows[0].solved = true;
  rows[0].excess_time_pct = 2.0;
  rows[3].solved = false;
  const auto s = summarize(rows);
  const auto* g = find_summary(s, "x", "w");
  ASSERT_NE(g, nullptr);
  EXPECT_EQ(g->oracle_solved, 3u);
  EXPECT_NEAR(g->pct_solved, 100.0 / 3.0, 1e-12);
  // Two unsolved rows count as infinitely bad.
  EXPECT_TRUE(std::isinf(g->median));
  EXPECT_TRUE(std::isinf(g->q1));
}

TEST(Harness, QuantileIsInfinitySafe) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(quantile({1, 2, 3}, 0.5), 2.0);
  EXPECT_EQ(quantile({1, 2, inf, inf}, 0.25), 1.75);
  EXPECT_TRUE(std::isinf(quantile({1, inf, inf}, 0.5)));
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(Harness, RerunsAreByteIdentical) {
  auto s = small_infer();
  const auto a = csv_of(run_sweep(device(), s));
  s.jobs = 3;
  const auto b = csv_of(run_sweep(device(), s));
  EXPECT_EQ(a, b);
}

TEST(Harness, ConcurrentRowsReportThroughputLoss) {
  SweepSpec s = SweepSpec::defaults(Variant::Concurrent);
  s.power = {30, 50, 10};
  s.latency = {0.5, 1.5, 0.5};
  s.arrival = {30, 90, 30};
  s.full_fidelity = true;
  s.workloads = {{"mobilenet-train+mobilenet-infer", {}, {}, {}}};
  s.strategies = {"optimal", "gmd"};
  const auto rows = run_sweep(device(), s);
  ASSERT_EQ(rows.size(), 2u * 27u);
  for (const auto& r : rows)
    if (r.solved && r.oracle_solved) {
      ASSERT_TRUE(r.tput_loss_pct.has_value());
      EXPECT_FALSE(r.excess_time_pct.has_value());
      EXPECT_GE(*r.tput_loss_pct, -1e-9);
    }
}

TEST(Harness, SpecJsonRoundTrip) {
  auto s = small_infer();
  s.workloads.push_back({"lstm-infer", Range{10, 20, 5}, {}, {}});
  const auto back = SweepSpec::from_json(s.to_json());
  EXPECT_EQ(back.to_json().dump(), s.to_json().dump());
  EXPECT_EQ(back.config_count(), s.config_count());
}
