#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/gmd.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/profiler.hpp"
#include "fulcrum/random.hpp"
#include "fulcrum/strategy.hpp"
#include "fulcrum/surrogate.hpp"

namespace fulcrum {

// Observations gathered by a random-profiling baseline. They depend on the workloads and the
// seed only, so one sample serves every budget configuration of those workloads.
struct RandomSample {
  std::vector<Observation> observations;
  int trials_used = 0;
  double profiling_seconds = 0.0;
};

// k random profiles without replacement. Training samples k modes; the other variants
// sample k / |batches| modes and profile each at every batch size.
inline RandomSample rnd_sample(const DeviceModel& dev, const ProblemConfig& pr, int k, std::uint64_t seed) {
  if (k < 1) throw ConfigError("rnd needs k >= 1");
  pr.validate();
  const auto& grid = dev.grid();
  const auto batches = candidate_batches(dev, pr);
  if (static_cast<std::size_t>(k) > grid.size() * batches.size())
    throw ConfigError("rnd k exceeds the candidate space");
  const std::size_t n_modes = std::max<std::size_t>(1, static_cast<std::size_t>(k) / batches.size());
  Rng rng(detail::splitmix64(seed ^ 0x726e64ULL));
  ProfilingSession session(dev, k);
  RandomSample out;
  for (std::size_t flat : rng.sample_without_replacement(grid.size(), n_modes)) {
    const PowerMode m = grid.mode_at(flat);
    for (int b : batches) {
      if (session.remaining() == 0 && !observation_cached(session, pr, m, b)) break;
      out.observations.push_back(observe_profiled(session, pr, m, b));
    }
  }
  out.trials_used = session.trials_used();
  out.profiling_seconds = session.profiling_seconds();
  return out;
}

inline StrategyResult solve_observed(const ProblemConfig& pr, const std::vector<Observation>& obs, int trials,
                                     double seconds) {
  StrategyResult r;
  r.trials_used = trials;
  r.profiling_seconds = seconds;
  if (auto best = best_feasible(pr, obs)) r.solution = make_solution(pr, *best, trials, seconds);
  return r;
}

inline StrategyResult rnd_k(const DeviceModel& dev, const ProblemConfig& pr, int k, std::uint64_t seed) {
  const RandomSample s = rnd_sample(dev, pr, k, seed);
  return solve_observed(pr, s.observations, s.trials_used, s.profiling_seconds);
}

// Surrogate predictions over the whole candidate space of a problem's workloads.
struct NnPrediction {
  std::vector<Observation> predicted;
  int trials_used = 0;
  double profiling_seconds = 0.0;
};

namespace detail {

template <typename Get>
Regressor<float> fit_target(const std::vector<std::vector<double>>& x, const std::vector<Observation>& obs, Get get,
                            const TrainConfig& cfg, std::uint64_t seed) {
  std::vector<double> y;
  y.reserve(obs.size());
  for (const auto& o : obs) y.push_back(get(o));
  return Regressor<float>::fit(x, y, cfg, seed);
}

inline Eigen::MatrixXd feature_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < rows[i].size(); ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
  return x;
}

}  // namespace detail

// Fits time and power surrogates on n random (mode, batch) profiles and predicts every
// candidate. Training and background workloads use the four mode features; the tuned
// inference workload adds the batch size.
inline NnPrediction nn_predict(const DeviceModel& dev, const ProblemConfig& pr, std::uint64_t seed, int n = 250,
                               const TrainConfig& cfg = {}) {
  pr.validate();
  const auto& grid = dev.grid();
  const auto batches = candidate_batches(dev, pr);
  const std::size_t space = grid.size() * batches.size();
  if (n < 10 || static_cast<std::size_t>(n) > space) throw ConfigError("nn sample count out of range");
  Rng rng(detail::splitmix64(seed ^ 0x6e6eULL));
  ProfilingSession session(dev, n);
  std::vector<Observation> obs;
  for (std::size_t c : rng.sample_without_replacement(space, static_cast<std::size_t>(n)))
    obs.push_back(observe_profiled(session, pr, grid.mode_at(c / batches.size()), batches[c % batches.size()]));

  std::vector<std::vector<double>> x_mode, x_batch;
  for (const auto& o : obs) {
    x_mode.push_back(mode_features(o.mode));
    x_batch.push_back(mode_features(o.mode, o.batch_size));
  }
  std::vector<std::vector<double>> all_mode, all_batch;
  NnPrediction out;
  for (std::size_t c = 0; c < space; ++c) {
    Observation o;
    o.mode = grid.mode_at(c / batches.size());
    o.batch_size = batches[c % batches.size()];
    all_mode.push_back(mode_features(o.mode));
    all_batch.push_back(mode_features(o.mode, o.batch_size));
    out.predicted.push_back(o);
  }
  const auto xm = detail::feature_matrix(all_mode);
  const auto xb = detail::feature_matrix(all_batch);
  const std::uint64_t s = detail::splitmix64(seed ^ 0x6669ULL);
  if (pr.variant != Variant::Infer) {
    const auto t = detail::fit_target(x_mode, obs, [](const Observation& o) { return o.t_tr; }, cfg, s ^ 1);
    const auto p = detail::fit_target(x_mode, obs, [](const Observation& o) { return o.p_tr; }, cfg, s ^ 2);
    const Eigen::VectorXd tp = t.predict_batch(xm), pp = p.predict_batch(xm);
    for (std::size_t i = 0; i < space; ++i) {
      out.predicted[i].t_tr = tp(static_cast<Eigen::Index>(i));
      out.predicted[i].p_tr = pp(static_cast<Eigen::Index>(i));
    }
  }
  if (pr.variant != Variant::Train) {
    const auto t = detail::fit_target(x_batch, obs, [](const Observation& o) { return o.t_in; }, cfg, s ^ 3);
    const auto p = detail::fit_target(x_batch, obs, [](const Observation& o) { return o.p_in; }, cfg, s ^ 4);
    const Eigen::VectorXd tp = t.predict_batch(xb), pp = p.predict_batch(xb);
    for (std::size_t i = 0; i < space; ++i) {
      out.predicted[i].t_in = tp(static_cast<Eigen::Index>(i));
      out.predicted[i].p_in = pp(static_cast<Eigen::Index>(i));
    }
  }
  // Non-positive predicted times cannot be planned; treat them as unusable.
  std::erase_if(out.predicted, [&](const Observation& o) {
    return (pr.variant != Variant::Infer && !(o.t_tr > 0.0)) || (pr.variant != Variant::Train && !(o.t_in > 0.0));
  });
  out.trials_used = session.trials_used();
  out.profiling_seconds = session.profiling_seconds();
  return out;
}

// Best predicted-feasible candidate, re-measured on the device. A budget broken in the
// measurement is flagged and the result counts as unsolved.
inline StrategyResult nn_solve(const DeviceModel& dev, const ProblemConfig& pr, const NnPrediction& pred) {
  StrategyResult r;
  r.trials_used = pred.trials_used;
  r.profiling_seconds = pred.profiling_seconds;
  const auto pick = best_feasible(pr, pred.predicted);
  if (!pick) return r;
  const Observation truth = observe_truth(dev, pr, pick->mode, pick->batch_size);
  const Assessment a = assess(pr, truth);
  r.power_violation = !a.power_ok;
  r.latency_violation = !a.latency_ok || !a.sustainable;
  if (a.feasible) r.solution = make_solution(pr, truth, r.trials_used, r.profiling_seconds);
  return r;
}

inline StrategyResult nn_250(const DeviceModel& dev, const ProblemConfig& pr, std::uint64_t seed,
                             const TrainConfig& cfg = {}) {
  return nn_solve(dev, pr, nn_predict(dev, pr, seed, 250, cfg));
}

// Round-robin halving from the grid midpoint: each step moves the active dimension to the
// middle of the half its overall power allows (upper half when within budget).
// Inference runs at batch size 1; concurrent problems at the largest batch whose queueing
// delay alone stays within the latency budget.
inline StrategyResult binary_search(const ProblemConfig& pr, ProfilingSession& session, int budget = -1) {
  pr.validate();
  const auto& grid = session.device().grid();
  if (budget < 0) budget = gmd_budget(pr.variant);
  budget = std::min(budget, session.budget());
  int beta = 1;
  if (is_concurrent(pr.variant)) {
    beta = 0;
    for (int b : session.device().workload(pr.infer_workload).batch_sizes)
      if ((b - 1) / pr.arrival_rate < pr.latency_budget) beta = std::max(beta, b);
    if (beta == 0) return detail::finish(pr, session, std::nullopt, {});
  }
  std::vector<TraceEvent> trace;
  std::vector<Observation> seen;
  ModeIndex cur = grid.mid_index();
  std::array<int, kNumDims> lo{}, hi{};
  for (std::size_t d = 0; d < kNumDims; ++d) hi[d] = grid.dim_size(d) - 1;
  try {
    auto probe = [&](const ModeIndex& idx) {
      const PowerMode m = grid.mode_at(idx);
      if (!observation_cached(session, pr, m, beta) && session.trials_used() >= budget) throw detail::StopSearch{};
      const Observation o = observe_profiled(session, pr, m, beta);
      seen.push_back(o);
      const Assessment a = assess(pr, o);
      detail::push_event(&trace, "binary", o, a);
      return a;
    };
    Assessment a = probe(cur);
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::size_t d = 0; d < kNumDims; ++d) {
        if (a.power_ok)
          lo[d] = cur[d] + 1;
        else
          hi[d] = cur[d] - 1;
        if (lo[d] > hi[d]) continue;
        cur[d] = (lo[d] + hi[d]) / 2;
        a = probe(cur);
        moved = true;
      }
    }
  } catch (const detail::StopSearch&) {
  } catch (const BudgetExhausted&) {
  }
  return detail::finish(pr, session, best_feasible(pr, seen), std::move(trace));
}

}  // namespace fulcrum
