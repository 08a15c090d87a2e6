// fulcrum: power-mode and batch-size tuning on a synthetic edge device.
//
//   fulcrum solve --variant train --power 30 --workload resnet-train --strategy gmd
//   fulcrum sweep --config samples/sweep_train.json --out reports/
//   fulcrum oracle --variant infer --power 25 --latency 0.2 --arrival 60 --workload resnet-infer
//   fulcrum trace-replay --poisson 60 --strategy gmd --workload resnet-train --infer-workload resnet-infer
//   fulcrum gen-trace --kind poisson --mean 60 --out trace.csv
//   fulcrum calibrate --anchors samples/mobilenet_anchors.json --shape mobilenet-infer

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fulcrum.hpp"

namespace {

using namespace fulcrum;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoSolution = 2;

struct DeviceArgs {
  std::string workloads_file;
  double noise = 0.0;
  std::uint64_t noise_seed = 0;

  void add(CLI::App* app) {
    app->add_option("--workloads-file", workloads_file, "JSON array of extra workload specs (replace presets by name)");
    app->add_option("--noise", noise, "measurement noise amplitude in [0, 0.05]");
    app->add_option("--noise-seed", noise_seed, "noise seed");
  }

  DeviceModel build() const {
    auto grid = PowerModeGrid::orin_default();
    auto wl = preset_workloads(grid);
    if (!workloads_file.empty()) {
      std::ifstream in(workloads_file);
      if (!in) throw ConfigError("cannot open " + workloads_file);
      const json j = json::parse(in);
      for (const auto& e : j) {
        WorkloadSpec w = e.get<WorkloadSpec>();
        std::erase_if(wl, [&](const WorkloadSpec& p) { return p.name == w.name; });
        wl.push_back(std::move(w));
      }
    }
    return DeviceModel(std::move(grid), std::move(wl), {noise, noise_seed});
  }
};

struct ProblemArgs {
  std::string variant = "train";
  double power = 30.0;
  double latency = 0.1;
  double arrival = 60.0;
  std::string workload;
  std::string infer_workload;
  int background_batch = 16;
  bool jitter_margin = false;

  void add(CLI::App* app, bool require_workload = true) {
    app->add_option("--variant", variant, "train | infer | concurrent | concurrent-infer")->capture_default_str();
    app->add_option("--power", power, "power budget (W)")->capture_default_str();
    app->add_option("--latency", latency, "latency budget (s)")->capture_default_str();
    app->add_option("--arrival", arrival, "arrival rate (requests/s)")->capture_default_str();
    auto* w = app->add_option("--workload", workload, "training, inference or background workload");
    if (require_workload) w->required();
    app->add_option("--infer-workload", infer_workload, "latency-bound inference workload (concurrent variants)");
    app->add_option("--background-batch", background_batch, "non-urgent batch size")->capture_default_str();
    app->add_flag("--jitter-margin", jitter_margin, "reserve one training minibatch of latency headroom");
  }

  ProblemConfig build() const {
    ProblemConfig pr;
    pr.variant = variant_from_string(variant);
    pr.power_budget = power;
    pr.latency_budget = latency;
    pr.arrival_rate = arrival;
    pr.workload = workload;
    pr.infer_workload = infer_workload;
    pr.background_batch = background_batch;
    pr.jitter_margin = jitter_margin;
    pr.validate();
    return pr;
  }
};

std::uint64_t default_seed() {
  if (const char* s = std::getenv("FULCRUM_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigError(std::string("FULCRUM_SEED is not an unsigned integer: ") + s);
    }
  }
  return 0;
}

void emit(const json& j, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path);
  f << j.dump(2) << '\n';
}

std::vector<Anchor> read_anchors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  const json j = json::parse(in);
  std::vector<Anchor> out;
  for (const auto& a : j.is_object() ? j.at("anchors") : j) {
    Anchor x;
    x.mode = a.at("mode").get<PowerMode>();
    x.batch_size = a.value("batch_size", 1);
    x.time = a.at("time_s").get<double>();
    x.power = a.at("power_w").get<double>();
    out.push_back(x);
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"Power-mode and batch-size tuning on a synthetic edge device"};
  app.require_subcommand(1);
  DeviceArgs dev_args;

  // solve
  auto* solve = app.add_subcommand("solve", "solve one problem with one strategy");
  ProblemArgs solve_pr;
  std::string solve_strategy = "gmd";
  std::uint64_t solve_seed = 0;
  std::string solve_out;
  bool solve_trace = false;
  solve_pr.add(solve);
  dev_args.add(solve);
  solve->add_option("--strategy", solve_strategy, "gmd | als | binary | optimal | rnd<k> | nn<k>")->capture_default_str();
  auto* solve_seed_opt = solve->add_option("--seed", solve_seed, "seed for sampled strategies (default FULCRUM_SEED or 0)");
  solve->add_option("--out", solve_out, "write JSON here instead of stdout");
  solve->add_flag("--trace", solve_trace, "include the search trace");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run a configuration sweep and write reports");
  std::string sweep_config, sweep_out = "reports";
  int sweep_jobs = -1;
  bool sweep_full = false;
  sweep->add_option("--config", sweep_config, "sweep spec JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sweep_out, "output directory")->capture_default_str();
  sweep->add_option("--jobs", sweep_jobs, "worker threads (0 = all cores)");
  sweep->add_flag("--full-fidelity", sweep_full, "keep every power and latency value");
  dev_args.add(sweep);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "exhaustive ground-truth optimum of one problem");
  ProblemArgs oracle_pr;
  std::string oracle_out;
  bool oracle_front = false;
  oracle_pr.add(oracle);
  dev_args.add(oracle);
  oracle->add_option("--out", oracle_out, "write JSON here instead of stdout");
  oracle->add_flag("--front", oracle_front, "include the ground-truth Pareto front");

  // trace-replay
  auto* replay = app.add_subcommand("trace-replay", "re-solve and simulate along an arrival-rate trace");
  ProblemArgs replay_pr;
  replay_pr.variant = "concurrent";
  replay_pr.power = 40.0;
  replay_pr.latency = 0.1;
  std::string replay_strategy = "gmd", replay_trace, replay_out, replay_arrivals = "deterministic";
  double replay_poisson = 0.0;
  std::vector<double> replay_rescale;
  std::uint64_t replay_seed = 0;
  bool replay_requests = false;
  replay_pr.add(replay);
  dev_args.add(replay);
  replay->add_option("--strategy", replay_strategy, "gmd | als")->capture_default_str();
  replay->add_option("--trace", replay_trace, "trace CSV (t_start_s,rate_rps)")->check(CLI::ExistingFile);
  replay->add_option("--poisson", replay_poisson, "generate a Poisson trace with this mean rate instead");
  replay->add_option("--rescale", replay_rescale, "map the trace rates onto [lo hi]")->expected(2);
  replay->add_option("--arrivals", replay_arrivals, "deterministic | poisson arrivals within segments")
      ->capture_default_str();
  auto* replay_seed_opt = replay->add_option("--seed", replay_seed, "seed (default FULCRUM_SEED or 0)");
  replay->add_option("--out", replay_out, "write JSON here instead of stdout");
  replay->add_flag("--latencies", replay_requests, "include per-request latencies");

  // gen-trace
  auto* gen = app.add_subcommand("gen-trace", "write an arrival-rate trace CSV");
  std::string gen_kind = "poisson", gen_file, gen_out;
  double gen_mean = 60.0, gen_horizon = 7200.0, gen_segment = 300.0;
  std::vector<double> gen_rescale;
  std::uint64_t gen_seed = 0;
  gen->add_option("--kind", gen_kind, "poisson | file")->capture_default_str();
  gen->add_option("--mean", gen_mean, "Poisson mean rate")->capture_default_str();
  gen->add_option("--horizon", gen_horizon, "trace length (s)")->capture_default_str();
  gen->add_option("--segment", gen_segment, "segment length (s)")->capture_default_str();
  gen->add_option("--file", gen_file, "input trace CSV for --kind file")->check(CLI::ExistingFile);
  gen->add_option("--rescale", gen_rescale, "map rates onto [lo hi]")->expected(2);
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "seed (default FULCRUM_SEED or 0)");
  gen->add_option("--out", gen_out, "output CSV (default stdout)");

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "fit a workload spec to measured anchors");
  std::string cal_anchors, cal_shape, cal_name, cal_out;
  cal->add_option("--anchors", cal_anchors, "JSON list of {mode, batch_size, time_s, power_w}")
      ->required()
      ->check(CLI::ExistingFile);
  cal->add_option("--shape", cal_shape, "preset supplying the per-dimension profile")->required();
  cal->add_option("--name", cal_name, "name of the fitted workload (default: shape name)");
  cal->add_option("--out", cal_out, "write JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  if (solve->parsed()) {
    const DeviceModel dev = dev_args.build();
    const ProblemConfig pr = solve_pr.build();
    const std::uint64_t seed = solve_seed_opt->count() ? solve_seed : default_seed();
    SolveReport rep = solve_one(dev, pr, solve_strategy, seed);
    if (!solve_trace) rep.result.trace.clear();
    json j = to_json(rep);
    if (!solve_trace) j.erase("trace");
    emit(j, solve_out);
    return rep.row.solved ? kExitOk : kExitNoSolution;
  }

  if (sweep->parsed()) {
    const DeviceModel dev = dev_args.build();
    std::ifstream in(sweep_config);
    SweepSpec spec = SweepSpec::from_json(json::parse(in));
    if (sweep_jobs >= 0) spec.jobs = sweep_jobs;
    if (sweep_full) spec.full_fidelity = true;
    spec.validate(dev);
    std::filesystem::create_directories(sweep_out);
    const auto rows = run_sweep(dev, spec);
    write_reports(sweep_out, spec, rows);
    std::cerr << "sweep: " << spec.config_count() << " configs, " << rows.size() << " rows -> " << sweep_out << '\n';
    for (const auto& s : summarize(rows))
      if (s.workload == "*")
        std::cerr << "  " << s.strategy << ": median " << s.median << ", solved " << s.pct_solved << "%, violations "
                  << s.violations << '\n';
    return kExitOk;
  }

  if (oracle->parsed()) {
    const DeviceModel dev = dev_args.build();
    const ProblemConfig pr = oracle_pr.build();
    const auto truth = ground_truth_observations(dev, pr);
    const auto best = optimal_oracle(pr, truth);
    json j{{"problem", pr}, {"candidates", truth.size()}};
    j["solution"] = best ? json(*best) : json(nullptr);
    if (oracle_front) {
      auto pts = json::array();
      for (const auto& p : problem_front(pr, truth).points())
        pts.push_back({{"mode", p.mode}, {"batch_size", p.batch_size}, {"power_w", p.power}, {"objective", p.objective}});
      j["front"] = pts;
    }
    emit(j, oracle_out);
    return best ? kExitOk : kExitNoSolution;
  }

  if (replay->parsed()) {
    const DeviceModel dev = dev_args.build();
    const ProblemConfig pr = replay_pr.build();
    const std::uint64_t seed = replay_seed_opt->count() ? replay_seed : default_seed();
    ArrivalTrace trace;
    if (!replay_trace.empty())
      trace = read_trace_file(replay_trace);
    else if (replay_poisson > 0.0)
      trace = poisson_trace(replay_poisson, seed);
    else
      throw ConfigError("trace-replay needs --trace or --poisson");
    if (!replay_rescale.empty()) trace = rescale_trace(trace, replay_rescale[0], replay_rescale[1]);
    ReplayOptions opt;
    opt.seed = seed;
    opt.sim.seed = seed;
    opt.sim.record_requests = true;
    if (replay_arrivals == "poisson")
      opt.sim.arrivals = ArrivalKind::Poisson;
    else if (replay_arrivals != "deterministic")
      throw ConfigError("unknown arrival kind: " + replay_arrivals);
    const ReplayResult r = replay_dynamic(dev, replay_strategy_from_string(replay_strategy), trace, pr, opt);
    json j = r;
    j["problem"] = pr;
    if (replay_requests) {
      auto lat = json::array();
      for (const auto& s : r.segments) lat.push_back(s.sim.latencies);
      j["latencies_s"] = lat;
    }
    emit(j, replay_out);
    return kExitOk;
  }

  if (gen->parsed()) {
    const std::uint64_t seed = gen_seed_opt->count() ? gen_seed : default_seed();
    ArrivalTrace t;
    if (gen_kind == "poisson") {
      t = poisson_trace(gen_mean, seed, gen_horizon, gen_segment);
    } else if (gen_kind == "file") {
      if (gen_file.empty()) throw ConfigError("--kind file needs --file");
      t = read_trace_file(gen_file, gen_segment);
    } else {
      throw ConfigError("unknown trace kind: " + gen_kind);
    }
    if (!gen_rescale.empty()) t = rescale_trace(t, gen_rescale[0], gen_rescale[1]);
    if (gen_out.empty()) {
      t.write_csv(std::cout);
    } else {
      std::ofstream f(gen_out);
      if (!f) throw ConfigError("cannot write " + gen_out);
      t.write_csv(f);
    }
    return kExitOk;
  }

  if (cal->parsed()) {
    const auto grid = PowerModeGrid::orin_default();
    const WorkloadSpec shape = find_preset(cal_shape, grid);
    const auto rep = calibrate_report(cal_name.empty() ? cal_shape : cal_name, read_anchors(cal_anchors), shape, grid);
    json j{{"workload", rep.spec},
           {"serial_scale", rep.serial_scale},
           {"time_rel_error", rep.time_rel_error},
           {"power_rel_error", rep.power_rel_error}};
    emit(j, cal_out);
    return kExitOk;
  }
  return kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
