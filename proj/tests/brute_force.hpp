#pragma once

// Reference implementations written directly from the problem definitions, sharing no code
// with the library beyond the device model itself.

#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

#include "fulcrum/device_model.hpp"
#include "fulcrum/problem.hpp"

namespace brute {

struct Pick {
  fulcrum::PowerMode mode;
  int beta = 1;
  double objective = 0.0;
  double power = 0.0;
  double latency = 0.0;
};

// Nested loops over every grid value and batch size.
inline std::optional<Pick> solve(const fulcrum::DeviceModel& dev, const fulcrum::ProblemConfig& pr) {
  using fulcrum::Variant;
  const auto& g = dev.grid();
  std::vector<int> betas{1};
  if (pr.variant != Variant::Train)
    betas = dev.workload(pr.variant == Variant::Infer ? pr.workload : pr.infer_workload).batch_sizes;
  std::optional<Pick> best;
  auto key = [&](const Pick& p) {
    // Lower is better.
    const double obj = fulcrum::is_concurrent(pr.variant) ? -p.objective : p.objective;
    const double lat = fulcrum::is_concurrent(pr.variant) ? p.latency : 0.0;
    return std::make_tuple(obj, lat, p.power, p.beta, p.mode);
  };
  for (int c : g.values(0))
    for (int cpu : g.values(1))
      for (int gpu : g.values(2))
        for (int mem : g.values(3))
          for (int b : betas) {
            const fulcrum::PowerMode m{c, cpu, gpu, mem};
            Pick p{m, b};
            const double a = pr.arrival_rate;
            if (pr.variant == Variant::Train) {
              const auto r = dev.eval(m, 1, pr.workload);
              p.objective = r.time;
              p.power = r.power;
            } else if (pr.variant == Variant::Infer) {
              const auto r = dev.eval(m, b, pr.workload);
              if (r.time * a > b) continue;
              p.latency = (b - 1) / a + r.time;
              if (p.latency > pr.latency_budget) continue;
              p.objective = p.latency;
              p.power = r.power;
            } else {
              const auto bg = dev.eval(m, pr.variant == Variant::Concurrent ? 1 : pr.background_batch, pr.workload);
              const auto in = dev.eval(m, b, pr.infer_workload);
              const double cycle = b / a;
              if (in.time > cycle) continue;
              p.latency = (b - 1) / a + in.time;
              if (p.latency > pr.latency_budget) continue;
              // The +1e-9 guard absorbs representation error when the slack is an exact multiple.
              const double tau = std::floor((cycle - in.time) / bg.time + 1e-9);
              p.objective = tau / cycle;
              p.power = std::max(bg.power, in.power);
            }
            if (p.power > pr.power_budget) continue;
            if (!best || key(p) < key(*best)) best = p;
          }
  return best;
}

inline fulcrum::PowerModeGrid reduced_grid() {
  return fulcrum::PowerModeGrid({4, 8, 12}, {422, 1344, 2200}, {115, 727, 1300}, {665, 3200});
}

}  // namespace brute
