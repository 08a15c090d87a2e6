#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fulcrum/als.hpp"
#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/gmd.hpp"
#include "fulcrum/interleave.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/profiler.hpp"
#include "fulcrum/simulator.hpp"
#include "fulcrum/strategy.hpp"

namespace fulcrum {

enum class ReplayStrategy { Gmd, Als };

inline std::string to_string(ReplayStrategy s) { return s == ReplayStrategy::Gmd ? "gmd" : "als"; }

inline ReplayStrategy replay_strategy_from_string(const std::string& s) {
  if (s == "gmd") return ReplayStrategy::Gmd;
  if (s == "als" || s == "als-front") return ReplayStrategy::Als;
  throw ConfigError("unknown replay strategy: " + s);
}

struct ReplayOptions {
  SimOptions sim;
  GmdConfig gmd;
  AlsConfig als;
  std::uint64_t seed = 0;
  int extend_rounds = 1;  // ALS rounds added when a rate leaves the configured range
  double drop_factor = 10.0;  // unsolved segments drop requests older than this many budgets
};

struct SegmentLog {
  std::size_t index = 0;
  double start = 0.0;
  double duration = 0.0;
  double rate = 0.0;
  std::string source;  // history, backtrack, search, front, extend, none
  std::optional<Solution> solution;
  int new_trials = 0;
  double profiling_seconds = 0.0;
  SimResult sim;
};

inline void to_json(nlohmann::json& j, const SegmentLog& s) {
  j = nlohmann::json{{"segment", s.index},
                     {"t_start_s", s.start},
                     {"duration_s", s.duration},
                     {"rate_rps", s.rate},
                     {"solved", s.solution.has_value()},
                     {"source", s.source},
                     {"new_trials", s.new_trials},
                     {"profiling_s", s.profiling_seconds},
                     {"sim", s.sim}};
  if (s.solution) j["solution"] = *s.solution;
}

struct ReplayResult {
  std::string strategy;
  std::vector<SegmentLog> segments;
  SimResult total;
  int setup_trials = 0;  // profiles taken before the trace starts (ALS sampling)
  double setup_seconds = 0.0;
  int new_trials = 0;
  double profiling_seconds = 0.0;  // during the trace
  double horizon = 0.0;

  double profiling_share() const { return horizon > 0.0 ? profiling_seconds / horizon : 0.0; }
  std::size_t solved_segments() const {
    return static_cast<std::size_t>(
        std::count_if(segments.begin(), segments.end(), [](const SegmentLog& s) { return s.solution.has_value(); }));
  }
  // Latency violations counted over solved segments only.
  std::size_t solved_violations() const {
    std::size_t n = 0;
    for (const auto& s : segments)
      if (s.solution) n += s.sim.latency_violations + s.sim.dropped;
    return n;
  }
};

inline void to_json(nlohmann::json& j, const ReplayResult& r) {
  j = nlohmann::json{{"strategy", r.strategy},
                     {"horizon_s", r.horizon},
                     {"setup_trials", r.setup_trials},
                     {"setup_profiling_s", r.setup_seconds},
                     {"new_trials", r.new_trials},
                     {"profiling_s", r.profiling_seconds},
                     {"profiling_share", r.profiling_share()},
                     {"solved_segments", r.solved_segments()},
                     {"solved_violations", r.solved_violations()},
                     {"total", r.total},
                     {"segments", r.segments}};
}

namespace detail {

// Every complete candidate of the problem already stored in the history.
inline std::vector<Observation> history_observations(const ProfileHistory& h, const ProblemConfig& pr) {
  std::vector<Observation> out;
  for (const auto& k : h.insertion_order()) {
    if (k.workload != pr.tuned_workload()) continue;
    const auto* in = h.find(k);
    Observation o;
    o.mode = k.mode;
    o.batch_size = k.batch_size;
    o.t_in = in->time;
    o.p_in = in->power;
    if (is_concurrent(pr.variant)) {
      const auto* bg = h.find({k.mode, pr.background_bs(), pr.workload});
      if (!bg) continue;
      o.t_tr = bg->time;
      o.p_tr = bg->power;
    }
    out.push_back(o);
  }
  return out;
}

inline InterleavePlan plan_for(const ProblemConfig& pr, const Observation& o) {
  if (pr.variant == Variant::Infer)
    return plan_interleave(o.mode, o.batch_size, pr.arrival_rate, std::numeric_limits<double>::infinity(), o.t_in,
                           0.0, o.p_in);
  return plan_interleave(o.mode, o.batch_size, pr.arrival_rate, o.t_tr, o.t_in, o.p_tr, o.p_in);
}

// Larger batch sizes at the previous segment's mode, smallest first.
inline std::optional<Observation> backtrack_batches(const ProblemConfig& pr, ProfilingSession& session,
                                                    const Observation& prev) {
  const auto& batches = session.device().workload(pr.tuned_workload()).batch_sizes;
  try {
    for (int b : batches) {
      if (b <= prev.batch_size) continue;
      const Observation o = observe_profiled(session, pr, prev.mode, b);
      const Assessment a = assess(pr, o);
      if (a.feasible) return o;
      if (!a.power_ok) break;
    }
  } catch (const BudgetExhausted&) {
  }
  return std::nullopt;
}

}  // namespace detail

// Re-solves the problem template at every rate change of the trace and simulates each
// segment from an empty queue with the chosen plan. Unsolved segments keep the last plan
// (or MAXN at the largest batch) and drop requests that grow too old.
inline ReplayResult replay_dynamic(const DeviceModel& dev, ReplayStrategy strategy, const ArrivalTrace& trace,
                                   const ProblemConfig& problem, const ReplayOptions& opt = {}) {
  trace.validate();
  if (problem.variant == Variant::Train) throw ConfigError("replay needs an inference or concurrent problem");
  ProblemConfig probe = problem;
  probe.arrival_rate = trace.segments.front().rate;
  probe.validate();
  dev.workload(problem.workload);
  if (is_concurrent(problem.variant)) dev.workload(problem.infer_workload);

  ReplayResult out;
  out.strategy = to_string(strategy);
  out.horizon = trace.horizon();
  auto history = std::make_shared<ProfileHistory>();

  std::optional<AlsSampler> als;
  if (strategy == ReplayStrategy::Als) {
    als.emplace(dev, problem, opt.als, opt.seed, history);
    als->run();
    out.setup_trials = als->trials_used();
    out.setup_seconds = als->profiling_seconds();
  }

  std::optional<Observation> prev;
  const auto arrivals_all = arrival_times(trace, opt.sim.arrivals, opt.sim.seed);
  std::size_t cursor = 0;
  double start = 0.0;
  for (std::size_t i = 0; i < trace.segments.size(); ++i) {
    const auto& seg = trace.segments[i];
    SegmentLog log;
    log.index = i;
    log.start = start;
    log.duration = seg.duration;
    log.rate = seg.rate;
    ProblemConfig pr = problem;
    pr.arrival_rate = seg.rate;

    std::optional<Observation> pick;
    if (strategy == ReplayStrategy::Gmd) {
      ProfilingSession session(dev, gmd_budget(pr.variant, opt.gmd), history);
      if ((pick = best_feasible(pr, detail::history_observations(*history, pr)))) {
        log.source = "history";
      } else if (prev && (pick = detail::backtrack_batches(pr, session, *prev))) {
        log.source = "backtrack";
      } else {
        const StrategyResult r = gmd_solve(pr, session, opt.gmd);
        if (r.solution) pick = r.solution->obs;
        log.source = pick ? "search" : "none";
      }
      log.new_trials = session.trials_used();
      log.profiling_seconds = session.profiling_seconds();
    } else {
      const int trials0 = als->trials_used();
      const double seconds0 = als->profiling_seconds();
      const QuadrantSpec& q = als->config().quadrants;
      if (!q.covers_rate(seg.rate)) {
        QuadrantSpec wider = q;
        wider.rate_lo = std::min(q.rate_lo, seg.rate);
        wider.rate_hi = std::max(q.rate_hi, seg.rate);
        als->extend(wider, opt.extend_rounds);
        log.source = "extend";
      } else {
        log.source = "front";
      }
      if (auto r = als->solve(pr); r.solution) pick = r.solution->obs;
      if (!pick) log.source = "none";
      log.new_trials = als->trials_used() - trials0;
      log.profiling_seconds = als->profiling_seconds() - seconds0;
    }

    // Ground truth drives the simulation; profiled values coincide with it on this device.
    SimOptions so = opt.sim;
    so.latency_budget = pr.latency_budget;
    std::optional<Observation> run;
    if (pick) {
      log.solution = make_solution(pr, *pick, log.new_trials, log.profiling_seconds);
      run = observe_truth(dev, pr, pick->mode, pick->batch_size);
      prev = pick;
    } else {
      so.drop_after = opt.drop_factor * pr.latency_budget;
      const auto& batches = dev.workload(pr.tuned_workload()).batch_sizes;
      run = prev ? observe_truth(dev, pr, prev->mode, prev->batch_size)
                 : observe_truth(dev, pr, dev.grid().maxn(), *std::max_element(batches.begin(), batches.end()));
    }
    const double end = start + seg.duration;
    std::vector<double> local;
    while (cursor < arrivals_all.size() && arrivals_all[cursor] < end) local.push_back(arrivals_all[cursor++] - start);
    log.sim = simulate(detail::plan_for(pr, *run), local, seg.duration, so);

    out.new_trials += log.new_trials;
    out.profiling_seconds += log.profiling_seconds;
    out.total.merge(log.sim);
    out.segments.push_back(std::move(log));
    start = end;
  }
  return out;
}

}  // namespace fulcrum
