#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fulcrum/baselines.hpp"
#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/interleave.hpp"
#include "fulcrum/pareto.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/profiler.hpp"
#include "fulcrum/random.hpp"
#include "fulcrum/strategy.hpp"
#include "fulcrum/surrogate.hpp"

namespace fulcrum {

struct Quadrant {
  int id = 0;
  double lat_lo = 0.0, lat_hi = 0.0;    // s
  double rate_lo = 0.0, rate_hi = 0.0;  // requests/s
};

// Latency and arrival-rate ranges, each split into two equal halves.
struct QuadrantSpec {
  double lat_lo = 0.05, lat_hi = 1.0;
  double rate_lo = 30.0, rate_hi = 90.0;

  void validate() const {
    if (!(lat_lo > 0.0 && lat_hi > lat_lo)) throw ConfigError("latency range must be positive and non-empty");
    if (!(rate_lo > 0.0 && rate_hi > rate_lo)) throw ConfigError("rate range must be positive and non-empty");
  }

  double lat_mid() const { return 0.5 * (lat_lo + lat_hi); }
  double rate_mid() const { return 0.5 * (rate_lo + rate_hi); }

  // Visit order: (low latency, low rate), (low, high), (high, low), (high, high).
  std::array<Quadrant, 4> quadrants() const {
    return {Quadrant{0, lat_lo, lat_mid(), rate_lo, rate_mid()}, Quadrant{1, lat_lo, lat_mid(), rate_mid(), rate_hi},
            Quadrant{2, lat_mid(), lat_hi, rate_lo, rate_mid()}, Quadrant{3, lat_mid(), lat_hi, rate_mid(), rate_hi}};
  }

  bool covers_rate(double r) const { return r >= rate_lo && r <= rate_hi; }
  bool covers_latency(double l) const { return l >= lat_lo && l <= lat_hi; }
};

struct AlsConfig {
  int train_initial = 10;
  int train_rounds = 8;
  int train_per_round = 5;
  int infer_initial_per_batch = 5;
  int infer_rounds = 6;
  int infer_per_quadrant = 5;
  int concurrent_rounds = 3;
  int concurrent_per_quadrant = 10;
  QuadrantSpec quadrants;
  TrainConfig surrogate;

  int budget(Variant v, std::size_t n_batches) const {
    if (v == Variant::Train) return train_initial + train_rounds * train_per_round;
    const int init = infer_initial_per_batch * static_cast<int>(n_batches);
    if (v == Variant::Infer) return init + infer_rounds * 4 * infer_per_quadrant;
    return init + concurrent_rounds * 4 * concurrent_per_quadrant;
  }
};

// Greedy output-space sampling: repeatedly take the candidate whose predicted power lies
// farthest from every observed power and every earlier pick. Ties go to the lower index.
inline std::vector<std::size_t> greedy_pick(const std::vector<double>& cand_power, std::vector<double> ref, int k) {
  std::vector<std::size_t> picked;
  std::vector<bool> used(cand_power.size(), false);
  while (static_cast<int>(picked.size()) < k && picked.size() < cand_power.size()) {
    std::size_t best = cand_power.size();
    double best_d = -1.0;
    for (std::size_t i = 0; i < cand_power.size(); ++i) {
      if (used[i]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (double r : ref) d = std::min(d, std::abs(cand_power[i] - r));
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    used[best] = true;
    picked.push_back(best);
    ref.push_back(cand_power[best]);
  }
  return picked;
}

struct AlsPick {
  PowerMode mode;
  int batch_size = 1;
  double pred_time = 0.0, pred_power = 0.0;
  double obs_time = 0.0, obs_power = 0.0;
};

struct AlsRound {
  int round = 0;
  int quadrant = -1;  // -1 for training rounds
  std::vector<AlsPick> picks;
  std::size_t predicted_front = 0;
  std::size_t observed_front = 0;
};

inline void to_json(nlohmann::json& j, const AlsRound& r) {
  auto picks = nlohmann::json::array();
  for (const auto& p : r.picks)
    picks.push_back({{"mode", p.mode},
                     {"batch_size", p.batch_size},
                     {"predicted", {{"time_s", p.pred_time}, {"power_w", p.pred_power}}},
                     {"observed", {{"time_s", p.obs_time}, {"power_w", p.obs_power}}}});
  j = nlohmann::json{{"round", r.round},
                     {"picked", picks},
                     {"predicted_front_size", r.predicted_front},
                     {"front_size", r.observed_front}};
  if (r.quadrant >= 0) j["quadrant"] = r.quadrant;
}

// Active-learning sampler for one workload (or workload pair). Every profile goes through a
// budgeted session; predictions only choose what to profile next.
class AlsSampler {
 public:
  AlsSampler(const DeviceModel& dev, ProblemConfig problem, AlsConfig cfg, std::uint64_t seed,
             std::shared_ptr<ProfileHistory> history = nullptr)
      : dev_(&dev),
        pr_(std::move(problem)),
        cfg_(std::move(cfg)),
        seed_(seed),
        rng_(detail::splitmix64(seed ^ 0x616c73ULL)),
        batches_(candidate_batches(dev, pr_)),
        session_(dev, cfg_.budget(pr_.variant, batches_.size()), std::move(history)) {
    if (pr_.workload.empty()) throw ConfigError("ALS needs a workload");
    if (is_concurrent(pr_.variant) && pr_.infer_workload.empty()) throw ConfigError("ALS needs an inference workload");
    if (pr_.variant != Variant::Train) cfg_.quadrants.validate();
    dev.workload(pr_.workload);
    if (is_concurrent(pr_.variant)) dev.workload(pr_.infer_workload);
  }

  const ProblemConfig& problem() const { return pr_; }
  const AlsConfig& config() const { return cfg_; }
  const std::vector<Observation>& observations() const { return obs_; }
  const std::vector<AlsRound>& rounds() const { return rounds_; }
  const ProfilingSession& session() const { return session_; }
  int rounds_done() const { return round_; }

  void initialize() {
    if (initialized_) return;
    initialized_ = true;
    const auto& grid = dev_->grid();
    if (pr_.variant == Variant::Train) {
      for (std::size_t f : rng_.sample_without_replacement(grid.size(), static_cast<std::size_t>(cfg_.train_initial)))
        record(grid.mode_at(f), 1);
      return;
    }
    for (int b : batches_)
      for (std::size_t f :
           rng_.sample_without_replacement(grid.size(), static_cast<std::size_t>(cfg_.infer_initial_per_batch)))
        record(grid.mode_at(f), b);
  }

  int planned_rounds() const {
    switch (pr_.variant) {
      case Variant::Train: return cfg_.train_rounds;
      case Variant::Infer: return cfg_.infer_rounds;
      default: return cfg_.concurrent_rounds;
    }
  }

  // One sampling round, skipped silently if the budget cannot fit it.
  void run_round() {
    initialize();
    ++round_;
    const Models m = fit_models();
    if (pr_.variant == Variant::Train) {
      train_round(m);
      return;
    }
    for (const Quadrant& q : cfg_.quadrants.quadrants()) quadrant_round(m, q);
  }

  void run() {
    initialize();
    while (round_ < planned_rounds()) run_round();
  }

  // Extra rounds after the quadrant ranges grow (e.g. a new arrival rate), with the budget
  // raised to fit them.
  void extend(const QuadrantSpec& wider, int rounds) {
    wider.validate();
    cfg_.quadrants = wider;
    const int per = pr_.variant == Variant::Train ? cfg_.train_per_round
                                                  : 4 * (pr_.variant == Variant::Infer ? cfg_.infer_per_quadrant
                                                                                       : cfg_.concurrent_per_quadrant);
    ProfilingSession grown(*dev_, session_.budget() + rounds * per, session_.shared_history());
    extra_trials_ += session_.trials_used();
    extra_seconds_ += session_.profiling_seconds();
    session_ = std::move(grown);
    for (int i = 0; i < rounds; ++i) run_round();
  }

  int trials_used() const { return extra_trials_ + session_.trials_used(); }
  double profiling_seconds() const { return extra_seconds_ + session_.profiling_seconds(); }

  StrategyResult solve(const ProblemConfig& pr) const {
    return solve_observed(pr, obs_, trials_used(), profiling_seconds());
  }

  // Observed front in the variant's own terms: training time, inference time, or training
  // throughput at the middle of the configured rate range.
  ParetoFront front() const {
    if (pr_.variant == Variant::Train) return training_front(obs_);
    std::vector<ParetoPoint> pts;
    if (pr_.variant == Variant::Infer) {
      for (const auto& o : obs_) pts.push_back({o.mode, o.batch_size, o.p_in, o.t_in, 0});
      return build_front(std::move(pts), Sense::Minimize);
    }
    ProblemConfig ref = pr_;
    ref.arrival_rate = cfg_.quadrants.rate_mid();
    ref.latency_budget = cfg_.quadrants.lat_hi;
    ref.power_budget = std::numeric_limits<double>::max();
    return problem_front(ref, obs_);
  }

  nlohmann::json rounds_json() const {
    auto j = nlohmann::json::array();
    for (const auto& r : rounds_) j.push_back(r);
    return j;
  }

 private:
  struct Models {
    std::vector<Observation> predicted;  // unprofiled candidates
  };

  void record(const PowerMode& m, int b) {
    if (!seen_.insert({m, b}).second) return;
    obs_.push_back(observe_profiled(session_, pr_, m, b));
  }

  std::uint64_t fit_seed(int target) const {
    return detail::splitmix64(seed_ ^ (static_cast<std::uint64_t>(round_) << 8) ^ static_cast<std::uint64_t>(target));
  }

  Models fit_models() const {
    const auto& grid = dev_->grid();
    Models out;
    for (std::size_t f = 0; f < grid.size(); ++f) {
      const PowerMode m = grid.mode_at(f);
      for (int b : batches_) {
        if (seen_.count({m, b})) continue;
        Observation o;
        o.mode = m;
        o.batch_size = b;
        out.predicted.push_back(o);
      }
    }
    if (out.predicted.empty()) return out;
    std::vector<std::vector<double>> cand_mode, cand_batch;
    for (const auto& o : out.predicted) {
      cand_mode.push_back(mode_features(o.mode));
      cand_batch.push_back(mode_features(o.mode, o.batch_size));
    }
    if (pr_.variant != Variant::Infer) {
      // The background workload does not depend on the batch size: one sample per mode.
      std::vector<std::vector<double>> x;
      std::vector<Observation> rows;
      std::set<PowerMode> modes;
      for (const auto& o : obs_)
        if (modes.insert(o.mode).second) {
          x.push_back(mode_features(o.mode));
          rows.push_back(o);
        }
      const auto t = detail::fit_target(x, rows, [](const Observation& o) { return o.t_tr; }, cfg_.surrogate, fit_seed(1));
      const auto p = detail::fit_target(x, rows, [](const Observation& o) { return o.p_tr; }, cfg_.surrogate, fit_seed(2));
      const auto xm = detail::feature_matrix(cand_mode);
      const Eigen::VectorXd tp = t.predict_batch(xm), pp = p.predict_batch(xm);
      for (std::size_t i = 0; i < out.predicted.size(); ++i) {
        out.predicted[i].t_tr = tp(static_cast<Eigen::Index>(i));
        out.predicted[i].p_tr = pp(static_cast<Eigen::Index>(i));
      }
    }
    if (pr_.variant != Variant::Train) {
      std::vector<std::vector<double>> x;
      for (const auto& o : obs_) x.push_back(mode_features(o.mode, o.batch_size));
      const auto t = detail::fit_target(x, obs_, [](const Observation& o) { return o.t_in; }, cfg_.surrogate, fit_seed(3));
      const auto p = detail::fit_target(x, obs_, [](const Observation& o) { return o.p_in; }, cfg_.surrogate, fit_seed(4));
      const auto xb = detail::feature_matrix(cand_batch);
      const Eigen::VectorXd tp = t.predict_batch(xb), pp = p.predict_batch(xb);
      for (std::size_t i = 0; i < out.predicted.size(); ++i) {
        out.predicted[i].t_in = tp(static_cast<Eigen::Index>(i));
        out.predicted[i].p_in = pp(static_cast<Eigen::Index>(i));
      }
    }
    return out;
  }

  std::size_t observed_front_size() const { return front().size(); }

  void profile_picks(const std::vector<ParetoPoint>& front, const std::vector<double>& pred_time, int k,
                     AlsRound& log) {
    std::vector<double> cand;
    for (const auto& p : front) cand.push_back(p.power);
    std::vector<double> ref;
    for (const auto& o : obs_) ref.push_back(observed_power(o));
    for (std::size_t i : greedy_pick(cand, ref, k)) {
      if (session_.remaining() == 0 && !observation_cached(session_, pr_, front[i].mode, front[i].batch_size)) break;
      record(front[i].mode, front[i].batch_size);
      const Observation& o = obs_.back();
      log.picks.push_back({front[i].mode, front[i].batch_size, pred_time[i], front[i].power, observed_time(o),
                           observed_power(o)});
    }
  }

  double observed_power(const Observation& o) const {
    switch (pr_.variant) {
      case Variant::Train: return o.p_tr;
      case Variant::Infer: return o.p_in;
      default: return std::max(o.p_tr, o.p_in);
    }
  }

  double observed_time(const Observation& o) const { return pr_.variant == Variant::Train ? o.t_tr : o.t_in; }

  void train_round(const Models& m) {
    AlsRound log;
    log.round = round_;
    std::vector<ParetoPoint> pts;
    for (const auto& o : m.predicted) pts.push_back({o.mode, 1, o.p_tr, o.t_tr, 0});
    if (!pts.empty()) {
      const ParetoFront f = build_front(std::move(pts), Sense::Minimize);
      log.predicted_front = f.size();
      std::vector<double> t;
      for (const auto& p : f.points()) t.push_back(p.objective);
      profile_picks(f.points(), t, cfg_.train_per_round, log);
    }
    log.observed_front = observed_front_size();
    rounds_.push_back(std::move(log));
  }

  // Conservative pruning keeps candidates that could serve some point of the quadrant: those
  // meeting the peak latency at the lowest rate.
  void quadrant_round(const Models& m, const Quadrant& q) {
    AlsRound log;
    log.round = round_;
    log.quadrant = q.id;
    std::vector<ParetoPoint> pts;
    std::vector<double> times;
    const bool conc = is_concurrent(pr_.variant);
    for (const auto& o : m.predicted) {
      if (seen_.count({o.mode, o.batch_size})) continue;
      if (!(o.t_in > 0.0) || (conc && !(o.t_tr > 0.0))) continue;
      if (!sustainable(o.batch_size, q.rate_lo, o.t_in)) continue;
      if (batch_latency(o.batch_size, q.rate_lo, o.t_in) > q.lat_hi) continue;
      if (conc) {
        const InterleavePlan p =
            plan_interleave(o.mode, o.batch_size, q.rate_lo, o.t_tr, o.t_in, std::max(0.0, o.p_tr), std::max(0.0, o.p_in));
        pts.push_back({o.mode, o.batch_size, p.power, p.theta, p.tau});
      } else {
        pts.push_back({o.mode, o.batch_size, o.p_in, batch_latency(o.batch_size, q.rate_lo, o.t_in), 0});
      }
    }
    if (!pts.empty()) {
      const ParetoFront f = build_front(std::move(pts), conc ? Sense::Maximize : Sense::Minimize);
      log.predicted_front = f.size();
      for (const auto& p : f.points()) {
        const auto it = std::find_if(m.predicted.begin(), m.predicted.end(), [&](const Observation& o) {
          return o.mode == p.mode && o.batch_size == p.batch_size;
        });
        times.push_back(it->t_in);
      }
      profile_picks(f.points(), times, conc ? cfg_.concurrent_per_quadrant : cfg_.infer_per_quadrant, log);
    }
    log.observed_front = observed_front_size();
    rounds_.push_back(std::move(log));
  }

  const DeviceModel* dev_;
  ProblemConfig pr_;
  AlsConfig cfg_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<int> batches_;
  ProfilingSession session_;
  std::vector<Observation> obs_;
  std::set<std::pair<PowerMode, int>> seen_;
  std::vector<AlsRound> rounds_;
  int round_ = 0;
  bool initialized_ = false;
  int extra_trials_ = 0;
  double extra_seconds_ = 0.0;
};

inline AlsSampler als_train(const DeviceModel& dev, const std::string& workload, std::uint64_t seed,
                            const AlsConfig& cfg = {}) {
  ProblemConfig pr;
  pr.variant = Variant::Train;
  pr.workload = workload;
  AlsSampler s(dev, pr, cfg, seed);
  s.run();
  return s;
}

inline AlsSampler als_infer(const DeviceModel& dev, const std::string& workload, std::uint64_t seed,
                            const AlsConfig& cfg = {}) {
  ProblemConfig pr;
  pr.variant = Variant::Infer;
  pr.workload = workload;
  AlsSampler s(dev, pr, cfg, seed);
  s.run();
  return s;
}

// Training (or non-urgent inference when `background` names an inference workload run at
// `background_batch`) interleaved with a latency-bound inference workload.
inline AlsSampler als_concurrent(const DeviceModel& dev, const std::string& background, const std::string& infer,
                                 std::uint64_t seed, const AlsConfig& cfg = {}, int background_batch = 16) {
  ProblemConfig pr;
  pr.workload = background;
  pr.infer_workload = infer;
  pr.variant = dev.workload(background).kind == WorkloadKind::Train ? Variant::Concurrent : Variant::ConcurrentInfer;
  pr.background_batch = background_batch;
  AlsSampler s(dev, pr, cfg, seed);
  s.run();
  return s;
}

}  // namespace fulcrum
