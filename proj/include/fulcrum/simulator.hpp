#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/interleave.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/random.hpp"

namespace fulcrum {

enum class ArrivalKind { Deterministic, Poisson };

// Piecewise-constant request arrival rate.
struct ArrivalTrace {
  struct Segment {
    double duration = 0.0;  // s
    double rate = 0.0;      // requests/s
  };
  std::vector<Segment> segments;

  void validate() const {
    if (segments.empty()) throw ConfigError("arrival trace has no segments");
    for (const auto& s : segments)
      if (!(s.duration > 0.0) || !(s.rate > 0.0)) throw ConfigError("trace segments need positive duration and rate");
  }

  double horizon() const {
    double h = 0.0;
    for (const auto& s : segments) h += s.duration;
    return h;
  }

  double start_of(std::size_t i) const {
    double t = 0.0;
    for (std::size_t k = 0; k < i; ++k) t += segments[k].duration;
    return t;
  }

  void write_csv(std::ostream& os) const {
    os << "t_start_s,rate_rps\n";
    double t = 0.0;
    for (const auto& s : segments) {
      os << t << ',' << s.rate << '\n';
      t += s.duration;
    }
  }
};

// Rows of (t_start_s, rate_rps); each segment lasts until the next start, the last one for
// `last_duration` seconds.
inline ArrivalTrace read_trace_csv(std::istream& is, double last_duration = 300.0) {
  std::vector<std::pair<double, double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string a, b;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b)) throw ConfigError("bad trace row: " + line);
    try {
      rows.emplace_back(std::stod(a), std::stod(b));
    } catch (const std::exception&) {
      if (rows.empty()) continue;  // header
      throw ConfigError("bad trace row: " + line);
    }
  }
  if (rows.empty()) throw ConfigError("trace file has no rows");
  ArrivalTrace t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double end = i + 1 < rows.size() ? rows[i + 1].first : rows[i].first + last_duration;
    if (!(end > rows[i].first)) throw ConfigError("trace start times must increase");
    t.segments.push_back({end - rows[i].first, rows[i].second});
  }
  t.validate();
  return t;
}

inline ArrivalTrace read_trace_file(const std::string& path, double last_duration = 300.0) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file " + path);
  return read_trace_csv(in, last_duration);
}

// Linear map of the trace's rate range onto [lo, hi].
inline ArrivalTrace rescale_trace(ArrivalTrace t, double lo, double hi) {
  t.validate();
  if (!(lo > 0.0 && hi >= lo)) throw ConfigError("rescale range must be positive");
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (const auto& s : t.segments) {
    mn = std::min(mn, s.rate);
    mx = std::max(mx, s.rate);
  }
  for (auto& s : t.segments) s.rate = mx > mn ? lo + (s.rate - mn) * (hi - lo) / (mx - mn) : 0.5 * (lo + hi);
  return t;
}

// Segment rates drawn from a Poisson distribution with the given mean.
inline ArrivalTrace poisson_trace(double mean, std::uint64_t seed, double horizon = 7200.0, double segment = 300.0) {
  if (!(mean > 0.0) || !(horizon > 0.0) || !(segment > 0.0)) throw ConfigError("poisson trace needs positive params");
  Rng rng(detail::splitmix64(seed ^ 0x747263ULL));
  ArrivalTrace t;
  const auto n = static_cast<std::size_t>(std::ceil(horizon / segment - 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::min(segment, horizon - static_cast<double>(i) * segment);
    t.segments.push_back({d, static_cast<double>(std::max(1L, rng.poisson(mean)))});
  }
  return t;
}

// Request arrival instants over the trace.
inline std::vector<double> arrival_times(const ArrivalTrace& t, ArrivalKind kind, std::uint64_t seed = 0) {
  t.validate();
  std::vector<double> out;
  Rng rng(detail::splitmix64(seed ^ 0x617272ULL));
  double start = 0.0;
  for (const auto& s : t.segments) {
    const double end = start + s.duration;
    if (kind == ArrivalKind::Deterministic) {
      for (long k = 0;; ++k) {
        const double a = start + static_cast<double>(k) / s.rate;
        if (a >= end) break;
        out.push_back(a);
      }
    } else {
      for (double a = start + rng.exponential(s.rate); a < end; a += rng.exponential(s.rate)) out.push_back(a);
    }
    start = end;
  }
  return out;
}

struct SimOptions {
  ArrivalKind arrivals = ArrivalKind::Deterministic;
  std::uint64_t seed = 0;
  double latency_budget = std::numeric_limits<double>::infinity();  // for violation counts
  // Queued requests older than this are dropped; infinite keeps all.
  double drop_after = std::numeric_limits<double>::infinity();
  bool record_requests = true;
};

struct SimResult {
  std::vector<double> latencies;  // completed requests, in completion order
  std::size_t arrived = 0;
  std::size_t dropped = 0;
  std::size_t pending = 0;  // still queued at the end
  long train_minibatches = 0;
  long infer_batches = 0;
  double peak_power = 0.0;
  std::size_t latency_violations = 0;
  std::size_t max_queue = 0;
  double horizon = 0.0;
  double max_latency = 0.0;
  // Training minibatches between the first and the last inference dispatch, and the cycles
  // spanned; free of start-up and tail effects.
  long steady_train_minibatches = 0;
  long steady_cycles = 0;

  double percentile(double q) const {
    if (latencies.empty()) return 0.0;
    std::vector<double> v = latencies;
    std::sort(v.begin(), v.end());
    const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(v.size() - 1, lo + 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  }

  void merge(const SimResult& o) {
    latencies.insert(latencies.end(), o.latencies.begin(), o.latencies.end());
    arrived += o.arrived;
    dropped += o.dropped;
    pending += o.pending;
    train_minibatches += o.train_minibatches;
    infer_batches += o.infer_batches;
    peak_power = std::max(peak_power, o.peak_power);
    latency_violations += o.latency_violations;
    max_queue = std::max(max_queue, o.max_queue);
    horizon += o.horizon;
    max_latency = std::max(max_latency, o.max_latency);
    steady_train_minibatches += o.steady_train_minibatches;
    steady_cycles += o.steady_cycles;
  }
};

inline void to_json(nlohmann::json& j, const SimResult& r) {
  j = nlohmann::json{{"arrived", r.arrived},
                     {"completed", r.latencies.size()},
                     {"dropped", r.dropped},
                     {"pending", r.pending},
                     {"train_minibatches", r.train_minibatches},
                     {"infer_batches", r.infer_batches},
                     {"peak_power_w", r.peak_power},
                     {"latency_violations", r.latency_violations},
                     {"max_queue", r.max_queue},
                     {"horizon_s", r.horizon},
                     {"max_latency_s", r.max_latency},
                     {"p50_latency_s", r.percentile(50)},
                     {"p99_latency_s", r.percentile(99)}};
}

// Managed interleaving on one device in virtual time. An inference minibatch starts once
// `beta` requests are queued; otherwise a training minibatch runs if it ends before the
// batch is expected to fill (at the planned rate). Minibatches are never preempted.
inline SimResult simulate(const InterleavePlan& plan, const std::vector<double>& arrivals, double horizon,
                          const SimOptions& opt = {}) {
  if (plan.beta < 1 || !(plan.t_in > 0.0) || !(plan.t_tr > 0.0) || !(plan.alpha > 0.0))
    throw ConfigError("simulation needs a complete plan");
  SimResult r;
  r.horizon = horizon;
  r.arrived = arrivals.size();
  std::deque<std::size_t> queue;
  std::size_t next = 0;
  double now = 0.0;
  double last_arrival = 0.0;
  bool any_arrived = false;
  const auto beta = static_cast<std::size_t>(plan.beta);
  long trains_at_first = 0;
  auto admit = [&]() {
    while (next < arrivals.size() && arrivals[next] <= now) {
      last_arrival = arrivals[next];
      any_arrived = true;
      queue.push_back(next++);
    }
    r.max_queue = std::max(r.max_queue, queue.size());
    while (!queue.empty() && now - arrivals[queue.front()] > opt.drop_after) {
      queue.pop_front();
      ++r.dropped;
    }
  };
  while (true) {
    admit();
    if (queue.size() >= beta) {
      const double done = now + plan.t_in;
      for (std::size_t k = 0; k < beta; ++k) {
        const double lat = done - arrivals[queue.front()];
        queue.pop_front();
        if (opt.record_requests) r.latencies.push_back(lat);
        r.max_latency = std::max(r.max_latency, lat);
        if (lat > opt.latency_budget) ++r.latency_violations;
      }
      if (r.infer_batches == 0) trains_at_first = r.train_minibatches;
      r.steady_train_minibatches = r.train_minibatches - trains_at_first;
      r.steady_cycles = r.infer_batches;
      ++r.infer_batches;
      r.peak_power = std::max(r.peak_power, plan.power);
      now = done;
      continue;
    }
    // Expected instant the batch fills; before any request, expect the first one on time.
    const double ready = any_arrived ? last_arrival + static_cast<double>(beta - queue.size()) / plan.alpha
                         : next < arrivals.size() ? arrivals[next] + static_cast<double>(beta - 1) / plan.alpha
                                                  : now;
    if (now + plan.t_tr <= horizon && now + plan.t_tr <= ready + 1e-9 * plan.t_tr) {
      now += plan.t_tr;
      ++r.train_minibatches;
      r.peak_power = std::max(r.peak_power, plan.power);
      continue;
    }
    if (next >= arrivals.size()) break;
    now = std::max(now, arrivals[next]);
  }
  r.pending = queue.size();
  return r;
}

inline SimResult simulate(const InterleavePlan& plan, const ArrivalTrace& trace, const SimOptions& opt = {}) {
  return simulate(plan, arrival_times(trace, opt.arrivals, opt.seed), trace.horizon(), opt);
}

// Urgent inference interleaved with a non-urgent inference workload run at the background
// batch size in place of training.
inline InterleavePlan plan_concurrent_infer(const DeviceModel& dev, const ProblemConfig& pr, const PowerMode& mode,
                                            int beta) {
  if (pr.variant != Variant::ConcurrentInfer) throw ConfigError("plan_concurrent_infer needs a concurrent-infer problem");
  pr.validate();
  const Observation o = observe_truth(dev, pr, mode, beta);
  return plan_interleave(mode, beta, pr.arrival_rate, o.t_tr, o.t_in, o.p_tr, o.p_in);
}

// Non-urgent items served per second under a concurrent-infer plan.
inline double background_throughput(const InterleavePlan& p, int background_batch) {
  return p.theta * background_batch;
}

}  // namespace fulcrum
