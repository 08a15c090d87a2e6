#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fulcrum/errors.hpp"
#include "fulcrum/power_mode.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/profiler.hpp"
#include "fulcrum/strategy.hpp"

namespace fulcrum {

struct GmdConfig {
  double eps_power = 0.5;      // W; smaller power steps give rho = 0
  double time_neutral = 1e-3;  // relative time change below which a step is free of speed
  int train_budget = 10;
  int infer_budget = 11;
  int infer_search_cap = 10;
  int concurrent_budget = 15;
  int concurrent_search_cap = 10;
};

// Index of the largest rho among dimensions not yet exhausted; zero ratios count only
// when nothing else is left. Ties go to the lower dimension.
inline std::optional<std::size_t> select_dimension(const std::array<double, kNumDims>& rho,
                                                   const std::array<bool, kNumDims>& exhausted) {
  std::optional<std::size_t> best;
  for (std::size_t d = 0; d < kNumDims; ++d) {
    if (exhausted[d]) continue;
    if (!best || rho[d] > rho[*best]) best = d;
  }
  return best;
}

inline double slope_ratio(double t_a, double p_a, double t_b, double p_b, double eps_power) {
  const double dp = std::abs(p_b - p_a);
  if (dp < eps_power) return 0.0;
  return std::abs(t_b - t_a) / dp;
}

namespace detail {

struct StopSearch {};

// Gradient-ratio search over the four mode dimensions at a fixed batch size.
class GmdSearch {
 public:
  using Observe = std::function<Observation(const PowerMode&)>;

  GmdSearch(const PowerModeGrid& grid, const ProblemConfig& pr, const GmdConfig& cfg, ProfilingSession& session,
            int trial_cap, int beta, std::vector<TraceEvent>* trace)
      : grid_(grid), pr_(pr), cfg_(cfg), session_(session), cap_(trial_cap), beta_(beta), trace_(trace) {}

  void add_known(const Observation& o) { store(grid_.index_of(o.mode), o); }

  void run() {
    try {
      const ModeIndex mid = grid_.mid_index();
      const Entry& m0 = visit(mid, "midpoint", -1, -1, -1);
      const bool up = m0.a.power_ok;
      for (std::size_t d = 0; d < kNumDims; ++d) {
        ModeIndex ext = mid;
        ext[d] = up ? grid_.dim_size(d) - 1 : 0;
        if (ext == mid) continue;
        const Entry& e = visit(ext, up ? "extreme-high" : "extreme-low", static_cast<int>(d), -1, -1);
        pairs_[d] = {m0.o, e.o};
      }
      while (true) {
        ModeIndex cur = current();
        // A dimension whose last step changed power but not time only costs power: hold it at
        // its lowest value from here on.
        for (std::size_t k = 0; k < kNumDims; ++k) {
          if (!pairs_[k]) continue;
          const auto& [a, b] = *pairs_[k];
          const auto [ta, pa] = metric(a, b);
          const auto [tb, pb] = metric(b, b);
          if (std::abs(tb - ta) <= cfg_.time_neutral * std::min(ta, tb) && std::abs(pb - pa) >= cfg_.eps_power)
            pinned_[k] = true;
        }
        for (std::size_t k = 0; k < kNumDims; ++k)
          if (pinned_[k]) cur[k] = 0;
        std::array<bool, kNumDims> exhausted{};
        std::array<std::pair<int, int>, kNumDims> range{};
        for (std::size_t d = 0; d < kNumDims; ++d) {
          range[d] = bracket(cur, d);
          exhausted[d] = range[d].second - range[d].first <= 1 || pinned_[d];
        }
        std::array<double, kNumDims> rho = rhos();
        for (std::size_t d = 0; d < kNumDims; ++d)
          if (exhausted[d]) rho[d] = 0.0;
        const auto d = select_dimension(rho, exhausted);
        if (!d) break;
        const auto [lo, hi] = range[*d];
        ModeIndex probe = cur;
        probe[*d] = (lo + hi) / 2;
        auto bit = seen_.find(cur);
        const Entry& e = visit(probe, "search", static_cast<int>(*d), lo, hi);
        if (bit != seen_.end()) pairs_[*d] = {bit->second.o, e.o};
      }
    } catch (const StopSearch&) {
    } catch (const BudgetExhausted&) {
    }
  }

  std::optional<Observation> best() const {
    std::optional<Observation> out;
    Assessment best_a;
    for (const auto& [idx, e] : seen_) {
      if (!e.a.feasible) continue;
      if (!out || better(pr_, e.o, e.a, *out, best_a)) {
        out = e.o;
        best_a = e.a;
      }
    }
    return out;
  }

  // Visited candidates that met the power budget but no other constraint.
  std::vector<Observation> power_ok_infeasible() const {
    std::vector<Observation> out;
    for (const auto& [idx, e] : seen_)
      if (e.a.power_ok && !e.a.feasible) out.push_back(e.o);
    return out;
  }

  std::array<double, kNumDims> rhos() const {
    std::array<double, kNumDims> r{};
    for (std::size_t d = 0; d < kNumDims; ++d) {
      if (!pairs_[d]) continue;
      const auto& [a, b] = *pairs_[d];
      const auto [ta, pa] = metric(a, b);
      const auto [tb, pb] = metric(b, b);
      r[d] = slope_ratio(ta, pa, tb, pb, cfg_.eps_power);
    }
    return r;
  }

 private:
  struct Entry {
    Observation o;
    Assessment a;
  };

  // (time, power) of the workload whose slopes steer the search; in concurrent problems the
  // workload drawing more power at `ref` (ties to training).
  std::pair<double, double> metric(const Observation& o, const Observation& ref) const {
    switch (pr_.variant) {
      case Variant::Train: return {o.t_tr, o.p_tr};
      case Variant::Infer: return {o.t_in, o.p_in};
      default: return ref.p_in > ref.p_tr ? std::pair{o.t_in, o.p_in} : std::pair{o.t_tr, o.p_tr};
    }
  }

  const Entry& store(const ModeIndex& idx, const Observation& o) {
    auto [it, fresh] = seen_.emplace(idx, Entry{o, assess(pr_, o)});
    return it->second;
  }

  const Entry& at(const ModeIndex& idx) const { return seen_.at(idx); }

  const Entry& visit(const ModeIndex& idx, const char* action, int dim, int lo, int hi) {
    if (auto it = seen_.find(idx); it != seen_.end()) return it->second;
    const PowerMode m = grid_.mode_at(idx);
    if (!observation_cached(session_, pr_, m, beta_) && session_.trials_used() >= cap_) throw StopSearch{};
    const Entry& e = store(idx, observe_profiled(session_, pr_, m, beta_));
    if (trace_) {
      TraceEvent ev;
      ev.step = static_cast<int>(trace_->size());
      ev.action = action;
      ev.mode = m;
      ev.beta = beta_;
      const auto [t, p] = metric(e.o, e.o);
      ev.time = t;
      ev.power = e.a.power;
      (void)p;
      ev.rho = rhos();
      ev.dim = dim;
      ev.lo = lo;
      ev.hi = hi;
      trace_->push_back(ev);
    }
    return e;
  }

  // Search origin: best feasible point, else best point within the power budget, else the
  // lowest-power point seen.
  ModeIndex current() const {
    const Entry* pick = nullptr;
    const ModeIndex* pick_idx = nullptr;
    auto rank = [](const Entry& e) { return e.a.feasible ? 2 : (e.a.power_ok ? 1 : 0); };
    for (const auto& [idx, e] : seen_) {
      if (!pick) {
        pick = &e;
        pick_idx = &idx;
        continue;
      }
      const int re = rank(e), rp = rank(*pick);
      bool take = false;
      if (re != rp) {
        take = re > rp;
      } else if (re > 0) {
        take = better(pr_, e.o, e.a, pick->o, pick->a);
      } else {
        take = e.a.power < pick->a.power || (e.a.power == pick->a.power && e.o.mode < pick->o.mode);
      }
      if (take) {
        pick = &e;
        pick_idx = &idx;
      }
    }
    return *pick_idx;
  }

  // Open index interval (lo, hi) along d, from cur, not settled by monotonicity of power
  // and speed over the modes seen so far.
  std::pair<int, int> bracket(const ModeIndex& cur, std::size_t d) const {
    int lo = -1, hi = grid_.dim_size(d);
    for (const auto& [x, e] : seen_) {
      bool ge = true, le = true;
      for (std::size_t k = 0; k < kNumDims; ++k) {
        if (k == d) continue;
        ge = ge && x[k] >= cur[k];
        le = le && x[k] <= cur[k];
      }
      if (e.a.power_ok && ge) lo = std::max(lo, x[d]);
      if (!e.a.power_ok && le) hi = std::min(hi, x[d]);
    }
    return {lo, hi};
  }

  const PowerModeGrid& grid_;
  const ProblemConfig& pr_;
  const GmdConfig& cfg_;
  ProfilingSession& session_;
  int cap_;
  int beta_;
  std::vector<TraceEvent>* trace_;
  std::map<ModeIndex, Entry> seen_;
  std::array<bool, kNumDims> pinned_{};
  std::array<std::optional<std::pair<Observation, Observation>>, kNumDims> pairs_{};
};

inline void push_event(std::vector<TraceEvent>* trace, const char* action, const Observation& o,
                       const Assessment& a) {
  if (!trace) return;
  TraceEvent ev;
  ev.step = static_cast<int>(trace->size());
  ev.action = action;
  ev.mode = o.mode;
  ev.beta = o.batch_size;
  ev.time = o.t_in > 0.0 ? o.t_in : o.t_tr;
  ev.power = a.power;
  trace->push_back(ev);
}

inline StrategyResult finish(const ProblemConfig& pr, const ProfilingSession& s, std::optional<Observation> best,
                             std::vector<TraceEvent> trace) {
  StrategyResult r;
  r.trials_used = s.trials_used();
  r.profiling_seconds = s.profiling_seconds();
  if (best) r.solution = make_solution(pr, *best, r.trials_used, r.profiling_seconds);
  r.trace = std::move(trace);
  return r;
}

}  // namespace detail

inline StrategyResult gmd_train(const ProblemConfig& pr, ProfilingSession& session, const GmdConfig& cfg = {}) {
  if (pr.variant != Variant::Train) throw ConfigError("gmd_train needs a train problem");
  pr.validate();
  std::vector<TraceEvent> trace;
  detail::GmdSearch search(session.device().grid(), pr, cfg, session, std::min(session.budget(), cfg.train_budget), 1,
                           &trace);
  search.run();
  return detail::finish(pr, session, search.best(), std::move(trace));
}

inline StrategyResult gmd_infer(const ProblemConfig& pr, ProfilingSession& session, const GmdConfig& cfg = {}) {
  if (pr.variant != Variant::Infer) throw ConfigError("gmd_infer needs an infer problem");
  pr.validate();
  const int budget = std::min(session.budget(), cfg.infer_budget);
  std::vector<TraceEvent> trace;
  detail::GmdSearch search(session.device().grid(), pr, cfg, session, std::min(budget, cfg.infer_search_cap), 1,
                           &trace);
  search.run();
  auto best = search.best();
  if (best) return detail::finish(pr, session, best, std::move(trace));

  // Backtracking: modes within power that could not keep up at batch size 1 get larger batches.
  auto cands = search.power_ok_infeasible();
  std::erase_if(cands, [&](const Observation& o) { return sustainable(1, pr.arrival_rate, o.t_in); });
  std::sort(cands.begin(), cands.end(), [](const Observation& a, const Observation& b) {
    return a.t_in != b.t_in ? a.t_in < b.t_in : a.mode < b.mode;
  });
  const auto& batches = session.device().workload(pr.workload).batch_sizes;
  try {
    for (const auto& c : cands) {
      for (int beta : batches) {
        if (beta <= 1) continue;
        if (beta < pr.arrival_rate * c.t_in) continue;
        if (batch_latency(beta, pr.arrival_rate, c.t_in) > pr.latency_budget) break;
        if (!observation_cached(session, pr, c.mode, beta) && session.trials_used() >= budget)
          throw detail::StopSearch{};
        const Observation o = observe_profiled(session, pr, c.mode, beta);
        const Assessment a = assess(pr, o);
        detail::push_event(&trace, "backtrack", o, a);
        if (a.feasible) return detail::finish(pr, session, o, std::move(trace));
        if (!a.power_ok || !a.latency_ok) break;
      }
    }
  } catch (const detail::StopSearch&) {
  } catch (const BudgetExhausted&) {
  }
  return detail::finish(pr, session, std::nullopt, std::move(trace));
}

inline StrategyResult gmd_concurrent(const ProblemConfig& pr, ProfilingSession& session, const GmdConfig& cfg = {}) {
  if (!is_concurrent(pr.variant)) throw ConfigError("gmd_concurrent needs a concurrent problem");
  pr.validate();
  const int budget = std::min(session.budget(), cfg.concurrent_budget);
  const auto& grid = session.device().grid();
  std::vector<int> batches = session.device().workload(pr.infer_workload).batch_sizes;
  std::sort(batches.rbegin(), batches.rend());
  std::vector<TraceEvent> trace;

  // Branch and bound on the batch size: the fastest mode bounds every other mode's latency.
  std::optional<Observation> top;
  std::size_t chosen = batches.size();
  try {
    for (std::size_t i = 0; i < batches.size(); ++i) {
      if (!observation_cached(session, pr, grid.maxn(), batches[i]) && session.trials_used() >= budget) break;
      const Observation o = observe_profiled(session, pr, grid.maxn(), batches[i]);
      const Assessment a = assess(pr, o);
      detail::push_event(&trace, "bound", o, a);
      if (!a.sustainable) break;
      if (a.latency_ok) {
        top = o;
        chosen = i;
        break;
      }
    }
  } catch (const BudgetExhausted&) {
  }
  if (!top) return detail::finish(pr, session, std::nullopt, std::move(trace));

  const int beta = batches[chosen];
  const int cap = std::min(budget, session.trials_used() + cfg.concurrent_search_cap);
  detail::GmdSearch search(grid, pr, cfg, session, cap, beta, &trace);
  search.add_known(*top);
  search.run();
  auto best = search.best();
  if (best) return detail::finish(pr, session, best, std::move(trace));

  // Backtracking: sustainable modes within power that missed the latency budget retry at
  // smaller batch sizes.
  auto cands = search.power_ok_infeasible();
  std::erase_if(cands, [&](const Observation& o) {
    const Assessment a = assess(pr, o);
    return !a.sustainable || a.latency_ok;
  });
  std::sort(cands.begin(), cands.end(), [&](const Observation& a, const Observation& b) {
    const double la = batch_latency(a.batch_size, pr.arrival_rate, a.t_in);
    const double lb = batch_latency(b.batch_size, pr.arrival_rate, b.t_in);
    return la != lb ? la < lb : a.mode < b.mode;
  });
  std::optional<Observation> found;
  Assessment found_a;
  try {
    for (std::size_t i = chosen + 1; i < batches.size() && !found; ++i) {
      const int b = batches[i];
      if ((b - 1) / pr.arrival_rate > pr.latency_budget) continue;
      for (const auto& c : cands) {
        if (!observation_cached(session, pr, c.mode, b) && session.trials_used() >= budget) throw detail::StopSearch{};
        const Observation o = observe_profiled(session, pr, c.mode, b);
        const Assessment a = assess(pr, o);
        detail::push_event(&trace, "backtrack", o, a);
        if (a.feasible && (!found || better(pr, o, a, *found, found_a))) {
          found = o;
          found_a = a;
        }
      }
    }
  } catch (const detail::StopSearch&) {
  } catch (const BudgetExhausted&) {
  }
  return detail::finish(pr, session, found, std::move(trace));
}

inline StrategyResult gmd_solve(const ProblemConfig& pr, ProfilingSession& session, const GmdConfig& cfg = {}) {
  switch (pr.variant) {
    case Variant::Train: return gmd_train(pr, session, cfg);
    case Variant::Infer: return gmd_infer(pr, session, cfg);
    default: return gmd_concurrent(pr, session, cfg);
  }
}

inline int gmd_budget(Variant v, const GmdConfig& cfg = {}) {
  switch (v) {
    case Variant::Train: return cfg.train_budget;
    case Variant::Infer: return cfg.infer_budget;
    default: return cfg.concurrent_budget;
  }
}

}  // namespace fulcrum
