#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fulcrum/power_mode.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/profiler.hpp"

namespace fulcrum {

// Profiles one candidate of a problem through the session.
inline Observation observe_profiled(ProfilingSession& s, const ProblemConfig& pr, const PowerMode& m, int beta) {
  Observation o;
  o.mode = m;
  o.batch_size = beta;
  switch (pr.variant) {
    case Variant::Train: {
      const auto r = s.profile(m, 1, pr.workload);
      o.batch_size = 1;
      o.t_tr = r.time;
      o.p_tr = r.power;
      break;
    }
    case Variant::Infer: {
      const auto r = s.profile(m, beta, pr.workload);
      o.t_in = r.time;
      o.p_in = r.power;
      break;
    }
    default: {
      const auto [rt, ri] = s.profile_pair(m, pr.background_bs(), pr.workload, beta, pr.infer_workload);
      o.t_tr = rt.time;
      o.p_tr = rt.power;
      o.t_in = ri.time;
      o.p_in = ri.power;
      break;
    }
  }
  return o;
}

// Surrogate input features of a mode, optionally with the batch size appended.
inline std::vector<double> mode_features(const PowerMode& m, int batch_size = 0) {
  std::vector<double> f{double(m.cores), double(m.cpu_freq), double(m.gpu_freq), double(m.mem_freq)};
  if (batch_size > 0) f.push_back(batch_size);
  return f;
}

inline bool observation_cached(const ProfilingSession& s, const ProblemConfig& pr, const PowerMode& m, int beta) {
  switch (pr.variant) {
    case Variant::Train: return s.cached(m, 1, pr.workload);
    case Variant::Infer: return s.cached(m, beta, pr.workload);
    default: return s.cached(m, pr.background_bs(), pr.workload) && s.cached(m, beta, pr.infer_workload);
  }
}

// One line of a search trace.
struct TraceEvent {
  int step = 0;
  std::string action;
  PowerMode mode;
  int beta = 1;
  double time = 0.0;
  double power = 0.0;
  std::array<double, kNumDims> rho{};
  int dim = -1;
  int lo = -1, hi = -1;  // open index interval still under consideration on `dim`
};

inline void to_json(nlohmann::json& j, const TraceEvent& e) {
  j = nlohmann::json{{"step", e.step}, {"action", e.action}, {"mode", e.mode},   {"beta", e.beta},
                     {"time_s", e.time}, {"power_w", e.power}, {"rho", e.rho}};
  if (e.dim >= 0) {
    j["dim"] = kDimNames[static_cast<std::size_t>(e.dim)];
    j["range"] = {e.lo, e.hi};
  }
}

struct StrategyResult {
  std::optional<Solution> solution;
  int trials_used = 0;
  double profiling_seconds = 0.0;
  std::vector<TraceEvent> trace;
  // Prediction-based strategies: the chosen point broke a budget when measured.
  bool power_violation = false;
  bool latency_violation = false;
};

}  // namespace fulcrum
