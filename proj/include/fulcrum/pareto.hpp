#pragma once

#include <algorithm>
#include <optional>
#include <ostream>
#include <tuple>
#include <vector>

#include "fulcrum/device_model.hpp"
#include "fulcrum/power_mode.hpp"
#include "fulcrum/problem.hpp"

namespace fulcrum {

enum class Sense { Minimize, Maximize };

struct ParetoPoint {
  PowerMode mode;
  int batch_size = 1;
  double power = 0.0;
  double objective = 0.0;
  int aux = 0;  // tau where applicable
};

// True when a dominates b (power <= and objective at least as good, one strictly).
inline bool dominates(const ParetoPoint& a, const ParetoPoint& b, Sense sense) {
  const bool obj_le = sense == Sense::Minimize ? a.objective <= b.objective : a.objective >= b.objective;
  const bool obj_lt = sense == Sense::Minimize ? a.objective < b.objective : a.objective > b.objective;
  return a.power <= b.power && obj_le && (a.power < b.power || obj_lt);
}

class ParetoFront {
 public:
  ParetoFront() = default;
  ParetoFront(std::vector<ParetoPoint> points, Sense sense) : points_(std::move(points)), sense_(sense) {}

  const std::vector<ParetoPoint>& points() const { return points_; }
  Sense sense() const { return sense_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  // Best objective among points with power <= budget.
  std::optional<ParetoPoint> lookup(double power_budget) const {
    auto it = std::upper_bound(points_.begin(), points_.end(), power_budget,
                               [](double b, const ParetoPoint& p) { return b < p.power; });
    if (it == points_.begin()) return std::nullopt;
    return *std::prev(it);
  }

  void write_csv(std::ostream& os) const {
    os << "power_w,objective,cores,cpu_freq,gpu_freq,mem_freq,batch_size\n";
    for (const auto& p : points_)
      os << p.power << ',' << p.objective << ',' << p.mode.cores << ',' << p.mode.cpu_freq << ',' << p.mode.gpu_freq
         << ',' << p.mode.mem_freq << ',' << p.batch_size << '\n';
  }

 private:
  std::vector<ParetoPoint> points_;
  Sense sense_ = Sense::Minimize;
};

// Non-dominated subset sorted by power. Exact duplicates keep the lowest batch, then mode.
inline ParetoFront build_front(std::vector<ParetoPoint> samples, Sense sense) {
  const bool minimize = sense == Sense::Minimize;
  std::sort(samples.begin(), samples.end(), [&](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.power != b.power) return a.power < b.power;
    if (a.objective != b.objective) return minimize ? a.objective < b.objective : a.objective > b.objective;
    if (a.batch_size != b.batch_size) return a.batch_size < b.batch_size;
    return a.mode < b.mode;
  });
  std::vector<ParetoPoint> out;
  for (const auto& p : samples) {
    if (!out.empty()) {
      const double best = out.back().objective;
      if (minimize ? p.objective >= best : p.objective <= best) continue;
    }
    out.push_back(p);
  }
  return ParetoFront(std::move(out), sense);
}

// Every (mode, batch) candidate of the problem evaluated on the ground truth.
inline std::vector<Observation> ground_truth_observations(const DeviceModel& dev, const ProblemConfig& pr) {
  std::vector<Observation> out;
  const auto batches = candidate_batches(dev, pr);
  const auto& grid = dev.grid();
  out.reserve(grid.size() * batches.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const PowerMode m = grid.mode_at(i);
    for (int b : batches) out.push_back(observe_truth(dev, pr, m, b));
  }
  return out;
}

// Constrained optimum over the full ground-truth candidate space.
inline std::optional<Solution> optimal_oracle(const DeviceModel& dev, const ProblemConfig& pr) {
  pr.validate();
  auto best = best_feasible(pr, ground_truth_observations(dev, pr));
  if (!best) return std::nullopt;
  return make_solution(pr, *best);
}

// Oracle over precomputed observations (reused across configs of one workload set).
inline std::optional<Solution> optimal_oracle(const ProblemConfig& pr, const std::vector<Observation>& truth) {
  auto best = best_feasible(pr, truth);
  if (!best) return std::nullopt;
  return make_solution(pr, *best);
}

// Training front (time vs power) of a set of observations.
inline ParetoFront training_front(const std::vector<Observation>& obs) {
  std::vector<ParetoPoint> pts;
  pts.reserve(obs.size());
  for (const auto& o : obs) pts.push_back({o.mode, o.batch_size, o.p_tr, o.t_tr, 0});
  return build_front(std::move(pts), Sense::Minimize);
}

// Front of feasible-except-power candidates for a given problem, in its objective's sense.
inline ParetoFront problem_front(const ProblemConfig& pr, const std::vector<Observation>& obs) {
  std::vector<ParetoPoint> pts;
  for (const auto& o : obs) {
    const Assessment a = assess(pr, o);
    if (!a.sustainable || !a.latency_ok) continue;
    pts.push_back({o.mode, o.batch_size, a.power, a.objective, a.tau});
  }
  if (pts.empty()) return ParetoFront({}, is_concurrent(pr.variant) ? Sense::Maximize : Sense::Minimize);
  return build_front(std::move(pts), is_concurrent(pr.variant) ? Sense::Maximize : Sense::Minimize);
}

}  // namespace fulcrum
