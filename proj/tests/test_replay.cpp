#include <gtest/gtest.h>

#include "fulcrum/replay.hpp"

using namespace fulcrum;

namespace {

const DeviceModel& device() {
  static const DeviceModel dev = DeviceModel::with_presets();
  return dev;
}

ProblemConfig concurrent(double p, double lat) {
  ProblemConfig pr;
  pr.variant = Variant::Concurrent;
  pr.workload = "resnet-train";
  pr.infer_workload = "resnet-infer";
  pr.power_budget = p;
  pr.latency_budget = lat;
  pr.arrival_rate = 60;
  return pr;
}

}  // namespace

TEST(Replay, GmdReusesHistoryAndKeepsBudgets) {
  const auto trace = poisson_trace(60, 7, 1800);
  const auto r = replay_dynamic(device(), ReplayStrategy::Gmd, trace, concurrent(40, 0.1));
  ASSERT_EQ(r.segments.size(), 6u);
  EXPECT_EQ(r.segments.front().source, "search");
  int later = 0;
  for (const auto& s : r.segments) {
    EXPECT_LE(s.new_trials, gmd_budget(Variant::Concurrent));
    if (s.index > 0) later += s.new_trials;
  }
  EXPECT_LT(later, 6 * gmd_budget(Variant::Concurrent));
  EXPECT_EQ(r.solved_violations(), 0u);
  EXPECT_EQ(r.total.arrived, r.total.latencies.size() + r.total.dropped + r.total.pending);
  EXPECT_NEAR(r.horizon, 1800.0, 1e-9);
  EXPECT_LT(r.profiling_share(), 0.05);
}

TEST(Replay, AlsProfilesUpFrontOnly) {
  const auto trace = poisson_trace(60, 7, 1800);
  ReplayOptions opt;
  opt.als.surrogate.epochs = 150;
  opt.seed = 3;
  const auto r = replay_dynamic(device(), ReplayStrategy::Als, trace, concurrent(40, 0.1), opt);
  EXPECT_GT(r.setup_trials, 0);
  for (const auto& s : r.segments) {
    if (s.source == "front") EXPECT_EQ(s.new_trials, 0);
  }
  EXPECT_EQ(r.solved_violations(), 0u);
}

TEST(Replay, AlsExtendsOutsideQuadrantRange) {
  ArrivalTrace trace;
  trace.segments = {{60, 60}, {60, 110}};
  ReplayOptions opt;
  opt.als.surrogate.epochs = 100;
  const auto r = replay_dynamic(device(), ReplayStrategy::Als, trace, concurrent(45, 0.5), opt);
  EXPECT_EQ(r.segments[1].source == "extend" || r.segments[1].source == "none", true);
  if (r.segments[1].source == "extend") EXPECT_GT(r.segments[1].new_trials, 0);
}

TEST(Replay, UnsolvedSegmentsDropStaleRequests) {
  ArrivalTrace trace;
  trace.segments = {{30, 60}};
  const auto r = replay_dynamic(device(), ReplayStrategy::Gmd, trace, concurrent(2, 0.01));
  ASSERT_EQ(r.segments.size(), 1u);
  EXPECT_FALSE(r.segments[0].solution.has_value());
  EXPECT_EQ(r.segments[0].source, "none");
  EXPECT_LE(r.segments[0].sim.max_latency, 10 * 0.01 + 1.0);
}

TEST(Replay, InferVariantHasNoTraining) {
  ArrivalTrace trace;
  trace.segments = {{60, 40}, {60, 80}};
  ProblemConfig pr;
  pr.variant = Variant::Infer;
  pr.workload = "resnet-infer";
  pr.power_budget = 30;
  pr.latency_budget = 0.3;
  pr.arrival_rate = 40;
  const auto r = replay_dynamic(device(), ReplayStrategy::Gmd, trace, pr);
  EXPECT_EQ(r.total.train_minibatches, 0);
  EXPECT_GT(r.total.infer_batches, 0);
}

TEST(Replay, RejectsTrainProblem) {
  ProblemConfig pr;
  pr.workload = "resnet-train";
  pr.power_budget = 30;
  EXPECT_THROW(replay_dynamic(device(), ReplayStrategy::Gmd, poisson_trace(60, 1, 600), pr), ConfigError);
  EXPECT_THROW(replay_strategy_from_string("rnd"), ConfigError);
}

TEST(Replay, DeterministicGivenSeed) {
  const auto trace = poisson_trace(60, 11, 900);
  const auto a = replay_dynamic(device(), ReplayStrategy::Gmd, trace, concurrent(40, 0.1));
  const auto b = replay_dynamic(device(), ReplayStrategy::Gmd, trace, concurrent(40, 0.1));
  EXPECT_EQ(nlohmann::json(a).dump(), nlohmann::json(b).dump());
}
