#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/interleave.hpp"
#include "fulcrum/power_mode.hpp"

namespace fulcrum {

enum class Variant { Train, Infer, Concurrent, ConcurrentInfer };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::Train: return "train";
    case Variant::Infer: return "infer";
    case Variant::Concurrent: return "concurrent";
    default: return "concurrent-infer";
  }
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "train") return Variant::Train;
  if (s == "infer") return Variant::Infer;
  if (s == "concurrent") return Variant::Concurrent;
  if (s == "concurrent-infer") return Variant::ConcurrentInfer;
  throw ConfigError("unknown variant: " + s);
}

inline bool is_concurrent(Variant v) { return v == Variant::Concurrent || v == Variant::ConcurrentInfer; }

// User budgets and the workloads involved.
//   train:            workload = training task
//   infer:            workload = inference task
//   concurrent:       workload = training task, infer_workload = latency-bound inference task
//   concurrent-infer: workload = non-urgent inference task run at background_batch,
//                     infer_workload = urgent inference task
struct ProblemConfig {
  Variant variant = Variant::Train;
  double power_budget = 0.0;    // W
  double latency_budget = 0.0;  // s
  double arrival_rate = 0.0;    // requests/s
  std::string workload;
  std::string infer_workload;
  int background_batch = 16;
  // Reserve one training minibatch of headroom against the latency budget.
  bool jitter_margin = false;

  void validate() const {
    if (!(power_budget >= 0.0) || !std::isfinite(power_budget)) throw ConfigError("power budget must be >= 0");
    if (workload.empty()) throw ConfigError("workload is required");
    if (variant != Variant::Train) {
      if (!(latency_budget > 0.0)) throw ConfigError("latency budget must be positive");
      if (!(arrival_rate > 0.0)) throw ConfigError("arrival rate must be positive");
    }
    if (is_concurrent(variant) && infer_workload.empty()) throw ConfigError("concurrent problems need infer_workload");
    if (background_batch < 1) throw ConfigError("background batch must be >= 1");
  }

  // Workload whose batch size is tuned.
  const std::string& tuned_workload() const { return variant == Variant::Infer ? workload : infer_workload; }
  // Batch size at which the background (training-like) workload runs.
  int background_bs() const { return variant == Variant::ConcurrentInfer ? background_batch : 1; }
};

inline void to_json(nlohmann::json& j, const ProblemConfig& p) {
  j = nlohmann::json{{"variant", to_string(p.variant)}, {"power_budget_w", p.power_budget},
                     {"workload", p.workload}};
  if (p.variant != Variant::Train) {
    j["latency_budget_s"] = p.latency_budget;
    j["arrival_rps"] = p.arrival_rate;
  }
  if (is_concurrent(p.variant)) j["infer_workload"] = p.infer_workload;
  if (p.variant == Variant::ConcurrentInfer) j["background_batch"] = p.background_batch;
}

// Measured (or predicted) quantities of one candidate (mode, batch).
struct Observation {
  PowerMode mode;
  int batch_size = 1;
  double t_tr = 0.0, p_tr = 0.0;  // training / background workload
  double t_in = 0.0, p_in = 0.0;  // (urgent) inference workload
};

struct Assessment {
  bool power_ok = false;
  bool sustainable = true;
  bool latency_ok = true;
  bool feasible = false;
  double power = 0.0;
  double latency = 0.0;
  int tau = 0;
  double theta = 0.0;
  double objective = 0.0;  // time (train), latency (infer), throughput (concurrent)
};

inline Assessment assess(const ProblemConfig& pr, const Observation& o) {
  Assessment a;
  switch (pr.variant) {
    case Variant::Train:
      a.power = o.p_tr;
      a.objective = o.t_tr;
      a.power_ok = a.power <= pr.power_budget;
      a.feasible = a.power_ok;
      break;
    case Variant::Infer:
      a.power = o.p_in;
      a.latency = batch_latency(o.batch_size, pr.arrival_rate, o.t_in);
      a.sustainable = sustainable(o.batch_size, pr.arrival_rate, o.t_in);
      a.latency_ok = a.latency <= pr.latency_budget;
      a.power_ok = a.power <= pr.power_budget;
      a.objective = a.latency;
      a.feasible = a.power_ok && a.sustainable && a.latency_ok;
      break;
    default: {
      const InterleavePlan p = plan_interleave(o.mode, o.batch_size, pr.arrival_rate, o.t_tr, o.t_in, o.p_tr, o.p_in);
      a.power = p.power;
      a.latency = p.latency;
      a.sustainable = p.feasible;
      const double limit = pr.latency_budget - (pr.jitter_margin ? o.t_tr : 0.0);
      a.latency_ok = a.latency <= limit;
      a.power_ok = a.power <= pr.power_budget;
      a.tau = p.tau;
      a.theta = p.theta;
      a.objective = p.theta;
      a.feasible = a.power_ok && a.sustainable && a.latency_ok;
      break;
    }
  }
  return a;
}

// Strict preference between two assessed candidates of the same problem, ignoring feasibility.
inline bool better(const ProblemConfig& pr, const Observation& x, const Assessment& ax, const Observation& y,
                   const Assessment& ay) {
  if (is_concurrent(pr.variant)) {
    const double tol = 1e-12 * std::max(std::abs(ax.theta), std::abs(ay.theta));
    if (ax.theta > ay.theta + tol) return true;
    if (ay.theta > ax.theta + tol) return false;
    if (ax.latency != ay.latency) return ax.latency < ay.latency;
  } else if (ax.objective != ay.objective) {
    return ax.objective < ay.objective;
  }
  if (ax.power != ay.power) return ax.power < ay.power;
  if (x.batch_size != y.batch_size) return x.batch_size < y.batch_size;
  return x.mode < y.mode;
}

inline std::optional<std::size_t> best_feasible_index(const ProblemConfig& pr, const std::vector<Observation>& obs) {
  std::optional<std::size_t> best;
  Assessment best_a;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Assessment a = assess(pr, obs[i]);
    if (!a.feasible) continue;
    if (!best || better(pr, obs[i], a, obs[*best], best_a)) {
      best = i;
      best_a = a;
    }
  }
  return best;
}

inline std::optional<Observation> best_feasible(const ProblemConfig& pr, const std::vector<Observation>& obs) {
  auto i = best_feasible_index(pr, obs);
  if (!i) return std::nullopt;
  return obs[*i];
}

// Selected operating point plus its observed metrics.
struct Solution {
  Observation obs;
  Assessment eval;
  int trials_used = 0;
  double profiling_seconds = 0.0;

  const PowerMode& mode() const { return obs.mode; }
  int batch_size() const { return obs.batch_size; }
};

inline Solution make_solution(const ProblemConfig& pr, const Observation& o, int trials = 0, double seconds = 0.0) {
  return Solution{o, assess(pr, o), trials, seconds};
}

inline void to_json(nlohmann::json& j, const Solution& s) {
  j = nlohmann::json{{"mode", s.obs.mode},
                     {"batch_size", s.obs.batch_size},
                     {"power_w", s.eval.power},
                     {"objective", s.eval.objective},
                     {"trials_used", s.trials_used}};
  if (s.obs.t_tr > 0.0) {
    j["t_tr_s"] = s.obs.t_tr;
    j["p_tr_w"] = s.obs.p_tr;
  }
  if (s.obs.t_in > 0.0) {
    j["t_in_s"] = s.obs.t_in;
    j["p_in_w"] = s.obs.p_in;
    j["latency_s"] = s.eval.latency;
  }
  if (s.eval.tau > 0 || s.eval.theta > 0.0) {
    j["tau"] = s.eval.tau;
    j["theta_per_s"] = s.eval.theta;
  }
}

// Ground-truth observation of one candidate.
inline Observation observe_truth(const DeviceModel& dev, const ProblemConfig& pr, const PowerMode& m, int beta) {
  Observation o;
  o.mode = m;
  o.batch_size = beta;
  switch (pr.variant) {
    case Variant::Train: {
      const auto r = dev.eval(m, 1, pr.workload);
      o.t_tr = r.time;
      o.p_tr = r.power;
      o.batch_size = 1;
      break;
    }
    case Variant::Infer: {
      const auto r = dev.eval(m, beta, pr.workload);
      o.t_in = r.time;
      o.p_in = r.power;
      break;
    }
    default: {
      const auto rt = dev.eval(m, pr.background_bs(), pr.workload);
      const auto ri = dev.eval(m, beta, pr.infer_workload);
      o.t_tr = rt.time;
      o.p_tr = rt.power;
      o.t_in = ri.time;
      o.p_in = ri.power;
      break;
    }
  }
  return o;
}

// Batch sizes explored for a problem.
inline std::vector<int> candidate_batches(const DeviceModel& dev, const ProblemConfig& pr) {
  if (pr.variant == Variant::Train) return {1};
  return dev.workload(pr.tuned_workload()).batch_sizes;
}

}  // namespace fulcrum
