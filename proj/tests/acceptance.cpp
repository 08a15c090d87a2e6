// Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.
//   acceptance [--only C4,C5] [--write-pilot path] [--allow-slow-host]
// --allow-slow-host keeps a C4 wall-clock overrun out of the exit code when every ordering
// holds; the line still reads FAIL.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "brute_force.hpp"
#include "fulcrum.hpp"

using namespace fulcrum;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  bool runtime_only = false;  // failed on the time limit alone
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

const DeviceModel& device() {
  static const DeviceModel dev = DeviceModel::with_presets();
  return dev;
}

const std::vector<std::string> kTrain{"resnet-train", "mobilenet-train", "yolo-train", "lstm-train", "bert-train"};
const std::vector<std::string> kInfer{"resnet-infer", "mobilenet-infer", "yolo-infer", "lstm-infer", "bert-infer"};

// ---- shared sweeps ----

constexpr int kOrderingSeeds = 20;

SweepSpec training_spec() {
  SweepSpec s = SweepSpec::defaults(Variant::Train);
  for (const auto& w : kTrain) {
    WorkloadEntry e{w, {}, {}, {}};
    if (w == "bert-train") e.power = Range{10, 60, 1};
    s.workloads.push_back(e);
  }
  s.strategies = {"optimal", "gmd", "binary", "als", "rnd50", "rnd250", "nn250"};
  s.seeds.clear();
  for (int i = 0; i < kOrderingSeeds; ++i) s.seeds.push_back(static_cast<std::uint64_t>(i));
  s.jobs = 0;
  return s;
}

struct TrainingRun {
  std::vector<MetricRow> rows;
  double seconds = 0.0;
};

const TrainingRun& training_run() {
  static const TrainingRun run = [] {
    TrainingRun r;
    const auto t0 = Clock::now();
    r.rows = run_sweep(device(), training_spec());
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

// 100 configs per infer workload (5 x 4 x 5) and per concurrent pair.
SweepSpec infer_spec(Variant v) {
  SweepSpec s = SweepSpec::defaults(v);
  s.full_fidelity = true;
  if (v == Variant::Infer) {
    for (const auto& w : kInfer) {
      WorkloadEntry e{w, Range{10, 50, 10}, Range{0.05, 0.8, 0.25}, Range{30, 90, 15}};
      if (w == "bert-infer") {
        e.latency = Range{1.0, 7.0, 2.0};
        e.arrival = Range{1, 5, 1};
      }
      s.workloads.push_back(e);
    }
  } else {
    for (std::size_t i = 0; i < kTrain.size(); ++i) {
      WorkloadEntry e{kTrain[i] + "+" + kInfer[i], Range{10, 50, 10}, Range{0.5, 2.0, 0.5}, Range{30, 90, 15}};
      if (kInfer[i] == "bert-infer") {
        e.latency = Range{2.0, 8.0, 2.0};
        e.arrival = Range{1, 5, 1};
      }
      s.workloads.push_back(e);
    }
  }
  s.strategies = {"gmd", "binary", "als", "rnd50"};
  s.seeds = {0, 1, 2, 3, 4};
  s.jobs = 0;
  return s;
}

const std::map<Variant, std::vector<MetricRow>>& inference_runs() {
  static const auto runs = [] {
    std::map<Variant, std::vector<MetricRow>> m;
    for (Variant v : {Variant::Infer, Variant::Concurrent}) m[v] = run_sweep(device(), infer_spec(v));
    return m;
  }();
  return runs;
}

double median_metric(const std::vector<MetricRow>& rows, const std::string& strategy, const std::string& workload) {
  const auto s = summarize(rows);
  const auto* g = find_summary(s, strategy, workload);
  return g ? g->median : std::nan("");
}

// ---- criteria ----

Outcome c1() {
  const auto t0 = Clock::now();
  const auto grid = brute::reduced_grid();
  const DeviceModel dev(grid, preset_workloads(grid));
  Rng rng(2024);
  int checked = 0, mismatches = 0, solved = 0;
  for (Variant v : {Variant::Train, Variant::Infer, Variant::Concurrent}) {
    for (int i = 0; i < 60; ++i) {
      ProblemConfig pr;
      pr.variant = v;
      pr.power_budget = rng.uniform(8, 55);
      pr.latency_budget = rng.uniform(0.02, 1.5);
      pr.arrival_rate = rng.uniform(10, 120);
      pr.workload = v == Variant::Infer ? kInfer[rng.below(4)] : kTrain[rng.below(4)];
      pr.infer_workload = kInfer[rng.below(4)];
      const auto got = optimal_oracle(dev, pr);
      const auto want = brute::solve(dev, pr);
      ++checked;
      bool same = got.has_value() == want.has_value();
      if (same && got) {
        ++solved;
        same = got->mode() == want->mode && got->batch_size() == want->beta && got->eval.objective == want->objective &&
               got->eval.power == want->power;
      }
      if (!same) ++mismatches;
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0,
          fmt("%d problems (%d solvable), %d mismatches, %.2f s (limit 10 s)", checked, solved, mismatches, secs)};
}

Outcome c2() {
  std::map<std::string, std::size_t> viol;
  std::size_t rows = 0, train_cfg = training_spec().config_count();
  const std::set<std::string> checked{"gmd", "als", "rnd50", "rnd250", "binary"};
  auto count = [&](const std::vector<MetricRow>& rs) {
    for (const auto& r : rs) {
      if (!checked.count(r.strategy)) continue;
      ++rows;
      if (r.violation) ++viol[r.strategy];
    }
  };
  count(training_run().rows);
  std::size_t inf_cfg = 0;
  for (const auto& [v, rs] : inference_runs()) {
    count(rs);
    inf_cfg += infer_spec(v).config_count();
  }
  std::size_t total = 0;
  std::string per;
  for (const auto& s : checked) {
    total += viol[s];
    per += fmt(" %s=%zu", s.c_str(), viol[s]);
  }
  return {total == 0 && train_cfg >= 200 && inf_cfg >= 1000,
          fmt("%zu solutions over %zu train + %zu infer/concurrent configs, violations:%s", rows, train_cfg, inf_cfg,
              per.c_str())};
}

Outcome c3() {
  std::size_t gmd = 0, gmd_bad = 0, als = 0, als_bad = 0;
  auto check = [&](const std::vector<MetricRow>& rs) {
    for (const auto& r : rs) {
      if (r.strategy == "gmd") {
        ++gmd;
        if (r.trials > gmd_budget(r.variant)) ++gmd_bad;
      } else if (r.strategy == "als") {
        ++als;
        if (r.trials > (r.variant == Variant::Train ? 50 : 145)) ++als_bad;
      }
    }
  };
  check(training_run().rows);
  for (const auto& [v, rs] : inference_runs()) check(rs);
  return {gmd_bad == 0 && als_bad == 0 && gmd > 0 && als > 0,
          fmt("gmd %zu/%zu within 10/11/15, als %zu/%zu within 50/145", gmd - gmd_bad, gmd, als - als_bad, als)};
}

Outcome c4() {
  const auto& run = training_run();
  struct Ordering {
    const char* name;
    const char* lhs;
    const char* rhs;
    bool lhs_not_worse;  // lhs <= rhs, otherwise lhs >= rhs
  };
  const Ordering orders[] = {{"als<=rnd50", "als", "rnd50", true},
                             {"gmd<=rnd50", "gmd", "rnd50", true},
                             {"gmd<=binary", "gmd", "binary", true},
                             {"nn250>=rnd250", "nn250", "rnd250", false}};
  bool orders_hold = true;
  std::string detail;
  for (const auto& o : orders) {
    int hold = 0;
    std::string fails;
    for (const auto& w : kTrain) {
      const double a = median_metric(run.rows, o.lhs, w), b = median_metric(run.rows, o.rhs, w);
      const bool ok = o.lhs_not_worse ? a <= b : a >= b;
      if (ok) {
        ++hold;
      } else {
        fails += fmt(" [%s %.3g vs %.3g]", w.c_str(), a, b);
      }
    }
    orders_hold = orders_hold && hold >= 4;
    detail += fmt("%s %d/5%s; ", o.name, hold, fails.c_str());
  }
  const bool fast = run.seconds < 300.0;
  detail += fmt("%d seeds, %.1f s (limit 300 s)", kOrderingSeeds, run.seconds);
  return {orders_hold && fast, detail, orders_hold && !fast};
}

constexpr double kAlsLimit = 10.0, kGmdLimit = 15.0;

nlohmann::json pilot_json() {
  const auto& rows = training_run().rows;
  nlohmann::json j{{"seeds", kOrderingSeeds}, {"thresholds_pct", {{"als", kAlsLimit}, {"gmd", kGmdLimit}}}};
  for (const char* s : {"als", "gmd"}) {
    nlohmann::json m;
    m["all"] = median_metric(rows, s, "*");
    for (const auto& w : kTrain) m[w] = median_metric(rows, s, w);
    j["median_excess_pct"][s] = m;
  }
  return j;
}

Outcome c5() {
  const auto& rows = training_run().rows;
  const double als = median_metric(rows, "als", "*"), gmd = median_metric(rows, "gmd", "*");
  std::string pilot = "no pilot file";
  std::ifstream in(FULCRUM_SOURCE_DIR "/tests/data/pilot_c5.json");
  if (in) {
    const auto p = nlohmann::json::parse(in);
    const double pa = p["median_excess_pct"]["als"]["all"].get<double>();
    const double pg = p["median_excess_pct"]["gmd"]["all"].get<double>();
    const bool same = std::abs(pa - als) <= 1e-9 && std::abs(pg - gmd) <= 1e-9;
    pilot = fmt("pilot als %.3f%% gmd %.3f%% (%s)", pa, pg, same ? "reproduced" : "differs");
  }
  return {als <= kAlsLimit && gmd <= kGmdLimit,
          fmt("training median excess: als %.3f%% (limit %.0f%%), gmd %.3f%% (limit %.0f%%); %s", als, kAlsLimit, gmd,
              kGmdLimit, pilot.c_str())};
}

Outcome c6() {
  Rng rng(66);
  const auto& dev = device();
  int plans = 0, lat_bad = 0, tput_bad = 0;
  double worst_lat = 0.0, worst_tput = 0.0;
  while (plans < 1000) {
    const std::size_t k = rng.below(kTrain.size());
    ProblemConfig pr;
    pr.variant = Variant::Concurrent;
    pr.workload = kTrain[k];
    pr.infer_workload = kInfer[rng.below(4)];
    pr.power_budget = 100;
    pr.latency_budget = 100;
    pr.arrival_rate = rng.uniform(5, 120);
    const auto mode = dev.grid().mode_at(rng.below(dev.grid().size()));
    const auto& bs = dev.workload(pr.infer_workload).batch_sizes;
    const int beta = bs[rng.below(bs.size())];
    const Observation o = observe_truth(dev, pr, mode, beta);
    const auto plan = plan_interleave(mode, beta, pr.arrival_rate, o.t_tr, o.t_in, o.p_tr, o.p_in);
    if (!plan.feasible) continue;
    ++plans;
    ArrivalTrace t;
    t.segments.push_back({std::max(60.0, 40.0 * plan.cycle_time), pr.arrival_rate});
    SimOptions so;
    so.record_requests = false;
    const auto r = simulate(plan, t, so);
    const double err = std::abs(r.max_latency - plan.latency);
    worst_lat = std::max(worst_lat, err);
    if (!(err <= 1e-9)) ++lat_bad;
    // Allowed drift: 1 minibatch per 100 cycles.
    const double drift = std::abs(static_cast<double>(r.steady_train_minibatches) -
                                  plan.theta * plan.cycle_time * static_cast<double>(r.steady_cycles));
    const double per100 = r.steady_cycles > 0 ? drift / static_cast<double>(r.steady_cycles) * 100.0 : 1e9;
    worst_tput = std::max(worst_tput, per100);
    if (!(per100 <= 1.0)) ++tput_bad;
  }
  return {lat_bad == 0 && tput_bad == 0,
          fmt("%d plans: latency max error %.2e s (limit 1e-9), %d bad; training drift max %.3f per 100 cycles "
              "(limit 1), %d bad",
              plans, worst_lat, lat_bad, worst_tput, tput_bad)};
}

double gradient_error(LossKind kind, std::uint64_t seed) {
  using Net = Network<double>;
  Rng rng(seed);
  Net net({5, 16, 8, 1});
  net.init(rng);
  Net::Mat x(5, 8);
  Net::Row y(1, 8);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = rng.uniform(-2, 2);
    y(0, c) = rng.uniform(0.5, 3.0);
  }
  Net::Workspace ws;
  Net::Vec grad, scratch;
  const Net::Vec p = net.params();
  net.loss_grad(p, x, y, kind, 4.0, 1e-6, grad, ws);
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Net::Vec a = p, b = p;
    a[i] += h;
    b[i] -= h;
    const double fd = (net.loss_grad(a, x, y, kind, 4.0, 1e-6, scratch, ws) -
                       net.loss_grad(b, x, y, kind, 4.0, 1e-6, scratch, ws)) /
                      (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-3}));
  }
  return worst;
}

Outcome c7() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    worst = std::max(worst, gradient_error(LossKind::SquaredError, s));
    worst = std::max(worst, gradient_error(LossKind::AsymmetricMape, 1000 + s));
  }
  const bool ratio = asymmetric_mape_loss(8.0, 10.0) == 4.0 * asymmetric_mape_loss(12.0, 10.0) &&
                     asymmetric_mape_loss(5.0, 10.0) == 4.0 * asymmetric_mape_loss(15.0, 10.0) &&
                     asymmetric_mape_loss(10.0, 10.0) == 0.0;
  return {worst < 1e-4 && ratio,
          fmt("100 points, worst relative gradient error %.2e (limit 1e-4); 4x under-prediction cases %s", worst,
              ratio ? "exact" : "wrong")};
}

Outcome c8() {
  const auto trace = poisson_trace(60, 2024);
  ProblemConfig pr;
  pr.variant = Variant::Concurrent;
  pr.workload = "resnet-train";
  pr.infer_workload = "resnet-infer";
  pr.power_budget = 40;
  pr.latency_budget = 0.1;
  pr.arrival_rate = 60;
  const auto gmd = replay_dynamic(device(), ReplayStrategy::Gmd, trace, pr);
  ReplayOptions opt;
  opt.seed = 1;
  const auto als = replay_dynamic(device(), ReplayStrategy::Als, trace, pr, opt);
  const QuadrantSpec q;
  int in_range = 0, in_range_new = 0;
  for (const auto& s : als.segments)
    if (q.covers_rate(s.rate)) {
      ++in_range;
      in_range_new += s.new_trials;
    }
  const std::size_t viol = gmd.solved_violations() + als.solved_violations();
  return {trace.segments.size() == 24 && gmd.profiling_share() < 0.02 && in_range_new == 0 && viol == 0,
          fmt("24 segments; gmd profiling %.3f%% of horizon (limit 2%%), solved %zu/24; als %d new profiles over %d "
              "in-range segments; solved-segment violations %zu",
              100.0 * gmd.profiling_share(), gmd.solved_segments(), in_range_new, in_range, viol)};
}

Outcome c9() {
  SweepSpec s = SweepSpec::defaults(Variant::Concurrent);
  s.workloads = {{"mobilenet-train+mobilenet-infer", Range{20, 50, 10}, Range{0.5, 2.0, 0.5}, Range{30, 90, 30}}};
  s.strategies = {"optimal", "gmd", "binary", "als", "rnd50"};
  s.seeds = {3, 4};
  s.full_fidelity = true;
  auto csv = [&](int jobs) {
    s.jobs = jobs;
    const auto rows = run_sweep(device(), s);
    std::ostringstream a, b;
    write_csv(a, rows);
    write_violin_csv(b, rows);
    SweepSpec same = s;
    same.jobs = 1;  // the summary echoes the spec; thread count is not part of the result
    return a.str() + b.str() + summary_json(same, rows).dump();
  };
  const std::string first = csv(1), second = csv(1), third = csv(0);
  return {first == second && first == third,
          fmt("%zu bytes, rerun %s, parallel rerun %s", first.size(), first == second ? "identical" : "differs",
              first == third ? "identical" : "differs")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  std::string pilot_out;
  bool allow_slow = false;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string t; std::getline(ss, t, ',');) only.insert(t);
    } else if (!std::strcmp(argv[i], "--write-pilot") && i + 1 < argc) {
      pilot_out = argv[++i];
    } else if (!std::strcmp(argv[i], "--allow-slow-host")) {
      allow_slow = true;
    } else {
      std::fprintf(stderr, "usage: acceptance [--only C1,C2,...] [--write-pilot path] [--allow-slow-host]\n");
      return 1;
    }
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"C1", c1}, {"C2", c2}, {"C3", c3}, {"C4", c4}, {"C5", c5}, {"C6", c6}, {"C7", c7}, {"C8", c8}, {"C9", c9}};
  // The training sweep is shared by C2-C5 and timed on its own for C4, so it runs first.
  if (only.empty() || only.count("C2") || only.count("C3") || only.count("C4") || only.count("C5") || !pilot_out.empty())
    training_run();
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.count(name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool tolerated = !o.pass && o.runtime_only && allow_slow;
    if (!o.pass && !tolerated) ++failed;
    std::printf("%s %s  %s  (%.1f s)%s\n", name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0),
                tolerated ? "  [runtime limit not met on this host; tolerated by --allow-slow-host]" : "");
    std::fflush(stdout);
  }
  if (!pilot_out.empty()) {
    std::ofstream f(pilot_out);
    f << pilot_json().dump(2) << '\n';
  }
  return failed == 0 ? 0 : 1;
}
