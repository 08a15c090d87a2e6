// Tunes one training problem, one inference problem and one concurrent problem on the
// preset device, then replays a short trace.
#include <cstdio>

#include "fulcrum.hpp"

using namespace fulcrum;

static void show(const char* label, const ProblemConfig& pr, const StrategyResult& r,
                 const std::optional<Solution>& best) {
  if (!r.solution) {
    std::printf("%-12s no solution (%d trials)\n", label, r.trials_used);
    return;
  }
  const Solution& s = *r.solution;
  std::printf("%-12s %s bs=%d power=%.1fW objective=%.4g trials=%d", label, s.mode().str().c_str(), s.batch_size(),
              s.eval.power, s.eval.objective, r.trials_used);
  if (best) std::printf("  (oracle %.4g)", best->eval.objective);
  std::printf("\n");
  (void)pr;
}

int main() {
  const DeviceModel dev = DeviceModel::with_presets();

  ProblemConfig train;
  train.variant = Variant::Train;
  train.power_budget = 30.0;
  train.workload = "resnet-train";
  ProfilingSession s1(dev, gmd_budget(train.variant));
  show("train/gmd", train, gmd_solve(train, s1), optimal_oracle(dev, train));

  ProblemConfig infer;
  infer.variant = Variant::Infer;
  infer.power_budget = 25.0;
  infer.latency_budget = 0.2;
  infer.arrival_rate = 60.0;
  infer.workload = "resnet-infer";
  ProfilingSession s2(dev, gmd_budget(infer.variant));
  show("infer/gmd", infer, gmd_solve(infer, s2), optimal_oracle(dev, infer));

  ProblemConfig conc;
  conc.variant = Variant::Concurrent;
  conc.power_budget = 40.0;
  conc.latency_budget = 0.1;
  conc.arrival_rate = 60.0;
  conc.workload = "resnet-train";
  conc.infer_workload = "resnet-infer";
  ProfilingSession s3(dev, gmd_budget(conc.variant));
  show("conc/gmd", conc, gmd_solve(conc, s3), optimal_oracle(dev, conc));

  AlsSampler als = als_concurrent(dev, "resnet-train", "resnet-infer", 1);
  show("conc/als", conc, als.solve(conc), optimal_oracle(dev, conc));

  ArrivalTrace trace = poisson_trace(60.0, 7, 1800.0);
  const ReplayResult r = replay_dynamic(dev, ReplayStrategy::Gmd, trace, conc);
  std::printf("replay: %zu/%zu segments solved, %d new profiles, %.2f%% of the trace spent profiling\n",
              r.solved_segments(), r.segments.size(), r.new_trials, 100.0 * r.profiling_share());
  return 0;
}
