#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "fulcrum/als.hpp"
#include "fulcrum/baselines.hpp"
#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/gmd.hpp"
#include "fulcrum/pareto.hpp"
#include "fulcrum/problem.hpp"
#include "fulcrum/profiler.hpp"
#include "fulcrum/strategy.hpp"

namespace fulcrum {

// ---- strategies ----

struct StrategySpec {
  enum class Kind { Gmd, Als, Rnd, Nn, Binary, Optimal };
  Kind kind = Kind::Gmd;
  int k = 0;  // profile count for rnd / nn
  std::string name;

  // Result depends on the seed.
  bool seeded() const { return kind == Kind::Als || kind == Kind::Rnd || kind == Kind::Nn; }
};

inline StrategySpec parse_strategy(const std::string& s) {
  StrategySpec out;
  out.name = s;
  auto count = [&](std::size_t prefix, int fallback) {
    const std::string tail = s.substr(prefix);
    if (tail.empty()) {
      if (fallback > 0) return fallback;
      throw ConfigError("strategy " + s + " needs a profile count");
    }
    if (!std::all_of(tail.begin(), tail.end(), [](char c) { return c >= '0' && c <= '9'; }) || tail.size() > 6)
      throw ConfigError("unknown strategy: " + s);
    return std::stoi(tail);
  };
  if (s == "gmd") {
    out.kind = StrategySpec::Kind::Gmd;
  } else if (s == "als") {
    out.kind = StrategySpec::Kind::Als;
  } else if (s == "binary") {
    out.kind = StrategySpec::Kind::Binary;
  } else if (s == "optimal" || s == "oracle") {
    out.kind = StrategySpec::Kind::Optimal;
    out.name = "optimal";
  } else if (s.rfind("rnd", 0) == 0) {
    out.kind = StrategySpec::Kind::Rnd;
    out.k = count(3, 0);
  } else if (s.rfind("nn", 0) == 0) {
    out.kind = StrategySpec::Kind::Nn;
    out.k = count(2, 250);
    out.name = "nn" + std::to_string(out.k);
  } else {
    throw ConfigError("unknown strategy: " + s);
  }
  if ((out.kind == StrategySpec::Kind::Rnd || out.kind == StrategySpec::Kind::Nn) && out.k < 1)
    throw ConfigError("strategy " + s + " needs a positive profile count");
  return out;
}

// ---- sweep specification ----

struct Range {
  double lo = 0.0, hi = 0.0, step = 1.0;

  void validate(const char* what) const {
    if (!(step > 0.0)) throw ConfigError(std::string(what) + " step must be positive");
    if (!(hi >= lo)) throw ConfigError(std::string(what) + " range is empty");
  }

  std::vector<double> values() const {
    std::vector<double> v;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) v.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
    return v;
  }
};

inline void to_json(nlohmann::json& j, const Range& r) { j = {{"lo", r.lo}, {"hi", r.hi}, {"step", r.step}}; }

inline void from_json(const nlohmann::json& j, Range& r) {
  r.lo = j.at("lo").get<double>();
  r.hi = j.at("hi").get<double>();
  r.step = j.at("step").get<double>();
}

// One workload (or "background+inference" pair), optionally with its own power range.
struct WorkloadEntry {
  std::string name;
  std::optional<Range> power;
  std::optional<Range> latency;
  std::optional<Range> arrival;
};

struct SweepSpec {
  Variant variant = Variant::Train;
  Range power{10, 50, 1};
  Range latency{0.05, 1.0, 0.01};
  Range arrival{30, 90, 5};
  std::vector<WorkloadEntry> workloads;
  std::vector<std::string> strategies;
  std::vector<std::uint64_t> seeds{0};
  bool full_fidelity = false;
  int jobs = 1;  // 0 = all hardware threads
  int background_batch = 16;

  static SweepSpec defaults(Variant v) {
    SweepSpec s;
    s.variant = v;
    if (is_concurrent(v)) {
      s.latency = {0.5, 2.0, 0.1};
      s.arrival = {30, 120, 10};
    }
    return s;
  }

  static SweepSpec from_json(const nlohmann::json& j) {
    SweepSpec s = defaults(variant_from_string(j.at("variant").get<std::string>()));
    if (j.contains("power")) s.power = j.at("power").get<Range>();
    if (j.contains("latency")) s.latency = j.at("latency").get<Range>();
    if (j.contains("arrival")) s.arrival = j.at("arrival").get<Range>();
    for (const auto& w : j.at("workloads")) {
      WorkloadEntry e;
      if (w.is_string()) {
        e.name = w.get<std::string>();
      } else {
        e.name = w.at("name").get<std::string>();
        if (w.contains("power")) e.power = w.at("power").get<Range>();
        if (w.contains("latency")) e.latency = w.at("latency").get<Range>();
        if (w.contains("arrival")) e.arrival = w.at("arrival").get<Range>();
      }
      s.workloads.push_back(e);
    }
    s.strategies = j.at("strategies").get<std::vector<std::string>>();
    if (j.contains("seeds")) {
      const auto& sj = j.at("seeds");
      if (sj.is_number_integer()) {
        s.seeds.clear();
        for (std::uint64_t i = 0; i < sj.get<std::uint64_t>(); ++i) s.seeds.push_back(i);
      } else {
        s.seeds = sj.get<std::vector<std::uint64_t>>();
      }
    }
    s.full_fidelity = j.value("full_fidelity", false);
    s.jobs = j.value("jobs", 1);
    s.background_batch = j.value("background_batch", 16);
    return s;
  }

  nlohmann::json to_json() const {
    auto wl = nlohmann::json::array();
    for (const auto& w : workloads) {
      if (!w.power && !w.latency && !w.arrival) {
        wl.push_back(w.name);
        continue;
      }
      nlohmann::json e{{"name", w.name}};
      if (w.power) e["power"] = *w.power;
      if (w.latency) e["latency"] = *w.latency;
      if (w.arrival) e["arrival"] = *w.arrival;
      wl.push_back(e);
    }
    return {{"variant", to_string(variant)}, {"power", power},       {"latency", latency},
            {"arrival", arrival},           {"workloads", wl},      {"strategies", strategies},
            {"seeds", seeds},               {"full_fidelity", full_fidelity}, {"jobs", jobs},
            {"background_batch", background_batch}};
  }

  // Problem template of a workload entry, budgets unset.
  ProblemConfig base_problem(const WorkloadEntry& e) const {
    ProblemConfig pr;
    pr.variant = variant;
    pr.background_batch = background_batch;
    if (is_concurrent(variant)) {
      const auto plus = e.name.find('+');
      if (plus == std::string::npos) throw ConfigError("concurrent workloads are written background+inference");
      pr.workload = e.name.substr(0, plus);
      pr.infer_workload = e.name.substr(plus + 1);
    } else {
      pr.workload = e.name;
    }
    return pr;
  }

  // Every strategy, workload and range is checked before anything runs.
  void validate(const DeviceModel& dev) const {
    if (workloads.empty()) throw ConfigError("sweep needs at least one workload");
    if (strategies.empty()) throw ConfigError("sweep needs at least one strategy");
    if (seeds.empty()) throw ConfigError("sweep needs at least one seed");
    if (jobs < 0) throw ConfigError("jobs must be >= 0");
    if (background_batch < 1) throw ConfigError("background batch must be >= 1");
    power.validate("power");
    if (variant != Variant::Train) {
      latency.validate("latency");
      arrival.validate("arrival");
      if (!(latency.lo > 0.0) || !(arrival.lo > 0.0)) throw ConfigError("latency and arrival ranges must be positive");
    }
    std::vector<StrategySpec> strats;
    for (const auto& s : strategies) strats.push_back(parse_strategy(s));
    for (const auto& e : workloads) {
      if (e.power) e.power->validate("power");
      if (e.latency) e.latency->validate("latency");
      if (e.arrival) e.arrival->validate("arrival");
      const ProblemConfig pr = base_problem(e);
      const auto& bg = dev.workload(pr.workload);
      const WorkloadKind want = variant == Variant::Train || variant == Variant::Concurrent ? WorkloadKind::Train
                                                                                           : WorkloadKind::Infer;
      if (bg.kind != want) throw ConfigError("workload " + pr.workload + " does not fit variant " + to_string(variant));
      if (is_concurrent(variant) && dev.workload(pr.infer_workload).kind != WorkloadKind::Infer)
        throw ConfigError("workload " + pr.infer_workload + " is not an inference workload");
      const std::size_t space = dev.grid().size() * candidate_batches(dev, pr).size();
      for (const auto& s : strats) {
        if (s.kind == StrategySpec::Kind::Rnd && static_cast<std::size_t>(s.k) > space)
          throw ConfigError(s.name + " exceeds the candidate space of " + e.name);
        if (s.kind == StrategySpec::Kind::Nn && (s.k < 10 || static_cast<std::size_t>(s.k) > space))
          throw ConfigError(s.name + " sample count is out of range for " + e.name);
      }
    }
  }

  // Problem configurations of one entry. Non-training sweeps keep every fifth power and
  // latency value unless full fidelity is requested.
  std::vector<ProblemConfig> configs(const WorkloadEntry& e) const {
    const ProblemConfig base = base_problem(e);
    auto thin = [&](std::vector<double> v) {
      if (variant == Variant::Train || full_fidelity) return v;
      std::vector<double> out;
      for (std::size_t i = 0; i < v.size(); i += 5) out.push_back(v[i]);
      return out;
    };
    const auto pw = thin(e.power.value_or(power).values());
    std::vector<ProblemConfig> out;
    if (variant == Variant::Train) {
      for (double p : pw) {
        ProblemConfig pr = base;
        pr.power_budget = p;
        out.push_back(pr);
      }
      return out;
    }
    const auto lat = thin(e.latency.value_or(latency).values());
    const auto arr = e.arrival.value_or(arrival).values();
    for (double p : pw)
      for (double l : lat)
        for (double a : arr) {
          ProblemConfig pr = base;
          pr.power_budget = p;
          pr.latency_budget = l;
          pr.arrival_rate = a;
          out.push_back(pr);
        }
    return out;
  }

  std::size_t config_count() const {
    std::size_t n = 0;
    for (const auto& e : workloads) n += configs(e).size();
    return n;
  }
};

// ---- metrics ----

struct MetricRow {
  std::string strategy;
  Variant variant = Variant::Train;
  double p_budget = 0.0;
  double lat_budget = 0.0;
  double arrival = 0.0;
  std::string workload;
  bool solved = false;
  std::optional<double> excess_time_pct;
  std::optional<double> tput_loss_pct;
  std::optional<double> power_delta_w;
  int trials = 0;
  std::optional<std::uint64_t> seed;
  bool oracle_solved = false;
  bool violation = false;

  // Headline metric: throughput loss for concurrent problems, excess time otherwise.
  // Unsolved configurations count as infinitely bad.
  double metric() const {
    if (!solved) return std::numeric_limits<double>::infinity();
    const auto& v = is_concurrent(variant) ? tput_loss_pct : excess_time_pct;
    return v ? *v : std::numeric_limits<double>::infinity();
  }
};

// Compares a strategy's result with the oracle under ground truth.
inline MetricRow make_row(const DeviceModel& dev, const ProblemConfig& pr, const std::string& workload,
                          const std::string& strategy, const StrategyResult& r, const std::optional<Solution>& oracle,
                          std::optional<std::uint64_t> seed) {
  MetricRow row;
  row.strategy = strategy;
  row.variant = pr.variant;
  row.p_budget = pr.power_budget;
  row.lat_budget = pr.variant == Variant::Train ? 0.0 : pr.latency_budget;
  row.arrival = pr.variant == Variant::Train ? 0.0 : pr.arrival_rate;
  row.workload = workload;
  row.trials = r.trials_used;
  row.seed = seed;
  row.oracle_solved = oracle.has_value();
  row.violation = r.power_violation || r.latency_violation;
  if (!r.solution) return row;
  const Observation truth = observe_truth(dev, pr, r.solution->mode(), r.solution->batch_size());
  const Assessment a = assess(pr, truth);
  if (!a.feasible) {
    row.violation = true;
    return row;
  }
  row.solved = true;
  row.power_delta_w = pr.power_budget - a.power;
  if (!oracle) return row;
  const Assessment& o = oracle->eval;
  if (is_concurrent(pr.variant))
    row.tput_loss_pct = o.theta > 0.0 ? (1.0 - a.theta / o.theta) * 100.0 : 0.0;
  else
    row.excess_time_pct = (a.objective - o.objective) / o.objective * 100.0;
  return row;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void write_csv_header(std::ostream& os) {
  os << "strategy,variant,p_budget_w,lat_budget_s,arrival_rps,workload,solved,excess_time_pct,tput_loss_pct,"
        "power_delta_w,trials,seed,oracle_solved,violation\n";
}

inline void write_csv_row(std::ostream& os, const MetricRow& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  os << r.strategy << ',' << to_string(r.variant) << ',' << format_number(r.p_budget) << ','
     << (r.variant == Variant::Train ? "" : format_number(r.lat_budget)) << ','
     << (r.variant == Variant::Train ? "" : format_number(r.arrival)) << ',' << r.workload << ',' << (r.solved ? 1 : 0)
     << ',' << opt(r.excess_time_pct) << ',' << opt(r.tput_loss_pct) << ',' << opt(r.power_delta_w) << ',' << r.trials
     << ',' << (r.seed ? std::to_string(*r.seed) : std::string()) << ',' << (r.oracle_solved ? 1 : 0) << ','
     << (r.violation ? 1 : 0) << '\n';
}

inline void write_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  write_csv_header(os);
  for (const auto& r : rows) write_csv_row(os, r);
}

// Linear-interpolated quantile; infinite entries are allowed.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(v.size() - 1, lo + 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || v[lo] == v[hi]) return v[lo];
  return v[lo] + frac * (v[hi] - v[lo]);
}

struct SummaryRow {
  std::string strategy;
  std::string workload;  // "*" for all workloads
  std::size_t rows = 0;
  std::size_t oracle_solved = 0;
  std::size_t solved = 0;  // among oracle-solved
  std::size_t violations = 0;
  double pct_solved = 0.0;
  double median = 0.0;  // headline metric over oracle-solved rows
  double q1 = 0.0, q3 = 0.0;
  double median_power_delta = 0.0;
  int max_trials = 0;
};

inline void to_json(nlohmann::json& j, const SummaryRow& s) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(std::isnan(v) ? "nan" : "inf"); };
  j = nlohmann::json{{"strategy", s.strategy},
                     {"workload", s.workload},
                     {"rows", s.rows},
                     {"oracle_solved", s.oracle_solved},
                     {"solved", s.solved},
                     {"violations", s.violations},
                     {"pct_solved", s.pct_solved},
                     {"median", num(s.median)},
                     {"q1", num(s.q1)},
                     {"q3", num(s.q3)},
                     {"median_power_delta_w", num(s.median_power_delta)},
                     {"max_trials", s.max_trials}};
}

// Medians, quartiles and solve rates per (strategy, workload) and per strategy overall, in
// order of first appearance.
inline std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows) {
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<const MetricRow*>> groups;
  auto add = [&](const std::string& s, const std::string& w, const MetricRow* r) {
    auto k = std::make_pair(s, w);
    auto [it, fresh] = groups.try_emplace(k);
    if (fresh) keys.push_back(k);
    it->second.push_back(r);
  };
  for (const auto& r : rows) add(r.strategy, r.workload, &r);
  for (const auto& r : rows) add(r.strategy, "*", &r);
  std::vector<SummaryRow> out;
  for (const auto& k : keys) {
    SummaryRow s;
    s.strategy = k.first;
    s.workload = k.second;
    std::vector<double> metric, delta;
    for (const MetricRow* r : groups[k]) {
      ++s.rows;
      s.max_trials = std::max(s.max_trials, r->trials);
      if (r->violation) ++s.violations;
      if (r->power_delta_w) delta.push_back(*r->power_delta_w);
      if (!r->oracle_solved) continue;
      ++s.oracle_solved;
      if (r->solved) ++s.solved;
      metric.push_back(r->metric());
    }
    s.pct_solved = s.oracle_solved ? 100.0 * static_cast<double>(s.solved) / static_cast<double>(s.oracle_solved) : 0.0;
    s.median = quantile(metric, 0.5);
    s.q1 = quantile(metric, 0.25);
    s.q3 = quantile(metric, 0.75);
    s.median_power_delta = quantile(delta, 0.5);
    out.push_back(s);
  }
  return out;
}

inline const SummaryRow* find_summary(const std::vector<SummaryRow>& s, const std::string& strategy,
                                      const std::string& workload = "*") {
  for (const auto& r : s)
    if (r.strategy == strategy && r.workload == workload) return &r;
  return nullptr;
}

// Raw solved-row values for violin plots.
inline void write_violin_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "strategy,workload,variant,metric,value\n";
  for (const auto& r : rows) {
    if (!r.solved || !r.oracle_solved) continue;
    const bool conc = is_concurrent(r.variant);
    os << r.strategy << ',' << r.workload << ',' << to_string(r.variant) << ','
       << (conc ? "tput_loss_pct" : "excess_time_pct") << ',' << format_number(r.metric()) << '\n';
    if (r.power_delta_w)
      os << r.strategy << ',' << r.workload << ',' << to_string(r.variant) << ",power_delta_w,"
         << format_number(*r.power_delta_w) << '\n';
  }
}

// ---- execution ----

namespace detail {

// Sampling state of one seeded strategy for one workload entry; reused for all its configs.
struct SeededState {
  std::optional<AlsSampler> als;
  std::optional<RandomSample> rnd;
  std::optional<NnPrediction> nn;
};

inline SeededState prepare_seeded(const DeviceModel& dev, const ProblemConfig& base, const StrategySpec& s,
                                  std::uint64_t seed, const AlsConfig& als_cfg) {
  SeededState st;
  ProblemConfig pr = base;
  if (pr.variant != Variant::Train) {
    pr.latency_budget = 1.0;
    pr.arrival_rate = 1.0;
  }
  switch (s.kind) {
    case StrategySpec::Kind::Als:
      st.als.emplace(dev, base, als_cfg, seed);
      st.als->run();
      break;
    case StrategySpec::Kind::Rnd: st.rnd = rnd_sample(dev, pr, s.k, seed); break;
    case StrategySpec::Kind::Nn: st.nn = nn_predict(dev, pr, seed, s.k); break;
    default: break;
  }
  return st;
}

inline StrategyResult run_seeded(const DeviceModel& dev, const ProblemConfig& pr, const SeededState& st) {
  if (st.als) return st.als->solve(pr);
  if (st.rnd) return solve_observed(pr, st.rnd->observations, st.rnd->trials_used, st.rnd->profiling_seconds);
  return nn_solve(dev, pr, *st.nn);
}

inline StrategyResult run_plain(const ProblemConfig& pr, const StrategySpec& s, const DeviceModel& dev,
                                const std::vector<Observation>& truth, const GmdConfig& gmd) {
  if (s.kind == StrategySpec::Kind::Optimal) {
    StrategyResult r;
    r.solution = optimal_oracle(pr, truth);
    r.trials_used = static_cast<int>(truth.size());
    return r;
  }
  ProfilingSession session(dev, gmd_budget(pr.variant, gmd));
  if (s.kind == StrategySpec::Kind::Gmd) return gmd_solve(pr, session, gmd);
  return binary_search(pr, session);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, jobs > 0 ? static_cast<std::size_t>(jobs) : std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&]() {
      for (std::size_t i; !failed && (i = next++) < n;) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

struct SweepOptions {
  GmdConfig gmd;
  AlsConfig als;
};

// Every config x strategy (x seed for seeded strategies). Rows come out in a fixed order:
// workload entries as listed, then strategies as listed, then seeds, then configs.
inline std::vector<MetricRow> run_sweep(const DeviceModel& dev, const SweepSpec& spec, const SweepOptions& opt = {}) {
  spec.validate(dev);
  std::vector<StrategySpec> strats;
  for (const auto& s : spec.strategies) strats.push_back(parse_strategy(s));

  struct Task {
    std::size_t entry;
    std::size_t strategy;
    std::optional<std::uint64_t> seed;
  };
  std::vector<Task> tasks;
  for (std::size_t e = 0; e < spec.workloads.size(); ++e)
    for (std::size_t s = 0; s < strats.size(); ++s) {
      if (!strats[s].seeded()) {
        tasks.push_back({e, s, std::nullopt});
        continue;
      }
      for (auto seed : spec.seeds) tasks.push_back({e, s, seed});
    }

  std::vector<std::vector<ProblemConfig>> configs;
  std::vector<std::vector<Observation>> truth;
  std::vector<std::vector<std::optional<Solution>>> oracle;
  for (const auto& e : spec.workloads) {
    configs.push_back(spec.configs(e));
    ProblemConfig base = spec.base_problem(e);
    truth.push_back(ground_truth_observations(dev, base));
    std::vector<std::optional<Solution>> o;
    for (const auto& pr : configs.back()) o.push_back(optimal_oracle(pr, truth.back()));
    oracle.push_back(std::move(o));
  }

  std::vector<std::vector<MetricRow>> out(tasks.size());
  detail::parallel_for(tasks.size(), spec.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    const auto& entry = spec.workloads[task.entry];
    const auto& cfgs = configs[task.entry];
    const StrategySpec& s = strats[task.strategy];
    std::vector<MetricRow>& rows = out[t];
    rows.reserve(cfgs.size());
    if (task.seed) {
      const auto st = detail::prepare_seeded(dev, spec.base_problem(entry), s, *task.seed, opt.als);
      for (std::size_t c = 0; c < cfgs.size(); ++c)
        rows.push_back(make_row(dev, cfgs[c], entry.name, s.name, detail::run_seeded(dev, cfgs[c], st),
                                oracle[task.entry][c], task.seed));
      return;
    }
    for (std::size_t c = 0; c < cfgs.size(); ++c)
      rows.push_back(make_row(dev, cfgs[c], entry.name, s.name,
                              detail::run_plain(cfgs[c], s, dev, truth[task.entry], opt.gmd), oracle[task.entry][c],
                              std::nullopt));
  });
  std::vector<MetricRow> rows;
  for (auto& r : out) rows.insert(rows.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
  return rows;
}

inline nlohmann::json summary_json(const SweepSpec& spec, const std::vector<MetricRow>& rows) {
  auto groups = nlohmann::json::array();
  for (const auto& s : summarize(rows)) groups.push_back(s);
  return {{"spec", spec.to_json()}, {"configs", spec.config_count()}, {"rows", rows.size()}, {"groups", groups}};
}

// metrics.csv, summary.json and violin.csv under `dir` (which must exist).
inline void write_reports(const std::string& dir, const SweepSpec& spec, const std::vector<MetricRow>& rows) {
  auto open = [&](const std::string& name) {
    std::ofstream f(dir + "/" + name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + dir + "/" + name);
    return f;
  };
  {
    auto f = open("metrics.csv");
    write_csv(f, rows);
  }
  {
    auto f = open("summary.json");
    f << summary_json(spec, rows).dump(2) << '\n';
  }
  {
    auto f = open("violin.csv");
    write_violin_csv(f, rows);
  }
}

// ---- single problems ----

struct SolveReport {
  std::string strategy;
  ProblemConfig problem;
  StrategyResult result;
  std::optional<Solution> oracle;
  MetricRow row;
};

inline SolveReport solve_one(const DeviceModel& dev, const ProblemConfig& pr, const std::string& strategy,
                             std::uint64_t seed = 0, const SweepOptions& opt = {}) {
  pr.validate();
  const StrategySpec s = parse_strategy(strategy);
  const auto truth = ground_truth_observations(dev, pr);
  SolveReport rep;
  rep.strategy = s.name;
  rep.problem = pr;
  rep.oracle = optimal_oracle(pr, truth);
  if (s.seeded()) {
    ProblemConfig base = pr;
    const auto st = detail::prepare_seeded(dev, base, s, seed, opt.als);
    rep.result = detail::run_seeded(dev, pr, st);
  } else {
    rep.result = detail::run_plain(pr, s, dev, truth, opt.gmd);
  }
  const std::string name = is_concurrent(pr.variant) ? pr.workload + "+" + pr.infer_workload : pr.workload;
  rep.row = make_row(dev, pr, name, s.name, rep.result,
                     rep.oracle, s.seeded() ? std::optional<std::uint64_t>(seed) : std::nullopt);
  return rep;
}

inline nlohmann::json to_json(const SolveReport& r) {
  nlohmann::json j{{"strategy", r.strategy}, {"problem", r.problem}, {"solved", r.row.solved},
                   {"trials_used", r.result.trials_used}, {"profiling_s", r.result.profiling_seconds},
                   {"ground_truth_violation", r.row.violation}};
  j["solution"] = r.result.solution ? nlohmann::json(*r.result.solution) : nlohmann::json(nullptr);
  j["oracle"] = r.oracle ? nlohmann::json(*r.oracle) : nlohmann::json(nullptr);
  if (r.row.excess_time_pct) j["excess_time_pct"] = *r.row.excess_time_pct;
  if (r.row.tput_loss_pct) j["tput_loss_pct"] = *r.row.tput_loss_pct;
  if (r.row.power_delta_w) j["power_delta_w"] = *r.row.power_delta_w;
  auto trace = nlohmann::json::array();
  for (const auto& e : r.result.trace) trace.push_back(e);
  j["trace"] = trace;
  return j;
}

}  // namespace fulcrum
