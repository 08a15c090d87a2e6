#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fulcrum/errors.hpp"
#include "fulcrum/power_mode.hpp"

namespace fulcrum {

enum class WorkloadKind { Train, Infer };

inline std::string to_string(WorkloadKind k) { return k == WorkloadKind::Train ? "train" : "infer"; }

inline WorkloadKind workload_kind_from_string(const std::string& s) {
  if (s == "train") return WorkloadKind::Train;
  if (s == "infer") return WorkloadKind::Infer;
  throw ConfigError("unknown workload kind: " + s);
}

// Affine batch-size scaling of minibatch time: proportional to a + b * bs.
struct BatchAffine {
  double a = 1.0;
  double b = 0.0;
};

// Saturating growth of dynamic power with batch size:
// W(bs) = 1 + h * (bs - 1) / (bs - 1 + k), so W(1) = 1 and W grows towards 1 + h.
struct BatchPower {
  double h = 0.0;
  double k = 1.0;

  double factor(int bs) const {
    const double x = static_cast<double>(bs - 1);
    return 1.0 + h * x / (x + k);
  }
};

// Synthetic cost-surface parameters for one DNN task.
struct WorkloadSpec {
  std::string name;
  WorkloadKind kind = WorkloadKind::Train;
  double base_time = 1.0;  // seconds at MAXN for batch size 1
  std::array<double, kNumDims> serial_fractions{};
  double power_static = 0.0;                    // W
  std::array<double, kNumDims> power_coeffs{};  // W per core / per MHz
  BatchAffine batch_affine{};
  BatchPower batch_power{};
  int train_batch_size = 16;
  std::vector<int> batch_sizes{1};  // admissible batch sizes, ascending

  bool is_train() const { return kind == WorkloadKind::Train; }

  void validate() const {
    auto fail = [&](const std::string& what) { throw ConfigError("workload '" + name + "': " + what); };
    if (name.empty()) throw ConfigError("workload name is empty");
    if (!(base_time > 0.0) || !std::isfinite(base_time)) fail("base_time must be positive");
    double sum = 0.0;
    for (double s : serial_fractions) {
      if (!(s >= 0.0 && s <= 1.0)) fail("serial fractions must lie in [0, 1]");
      sum += s;
    }
    if (sum > 1.0 + 1e-12) fail("serial fractions must sum to at most 1");
    if (!(power_static >= 0.0)) fail("power_static must be non-negative");
    for (double c : power_coeffs)
      if (!(c >= 0.0) || !std::isfinite(c)) fail("power coefficients must be non-negative");
    if (!(batch_affine.a >= 0.0) || !(batch_affine.b >= 0.0)) fail("batch_affine coefficients must be non-negative");
    if (!(batch_affine.a + batch_affine.b > 0.0)) fail("batch_affine a + b must be positive");
    if (!(batch_power.h >= 0.0) || !(batch_power.k > 0.0)) fail("batch_power requires h >= 0 and k > 0");
    if (train_batch_size < 1) fail("train_batch_size must be >= 1");
    if (batch_sizes.empty()) fail("batch_sizes is empty");
    for (std::size_t i = 0; i < batch_sizes.size(); ++i) {
      if (batch_sizes[i] < 1) fail("batch sizes must be >= 1");
      if (i > 0 && batch_sizes[i] <= batch_sizes[i - 1]) fail("batch sizes must be strictly increasing");
    }
    if (kind == WorkloadKind::Train && batch_sizes != std::vector<int>{1})
      fail("training workloads are profiled at batch size 1 only");
    if (kind == WorkloadKind::Infer && !(batch_affine.b > 0.0)) fail("inference workloads need b > 0");
  }
};

inline void to_json(nlohmann::json& j, const WorkloadSpec& w) {
  j = nlohmann::json{{"name", w.name},
                     {"kind", to_string(w.kind)},
                     {"base_time", w.base_time},
                     {"serial_fractions", w.serial_fractions},
                     {"power_static", w.power_static},
                     {"power_coeffs", w.power_coeffs},
                     {"batch_affine", {{"a", w.batch_affine.a}, {"b", w.batch_affine.b}}},
                     {"batch_power", {{"h", w.batch_power.h}, {"k", w.batch_power.k}}},
                     {"train_batch_size", w.train_batch_size},
                     {"batch_sizes", w.batch_sizes}};
}

inline void from_json(const nlohmann::json& j, WorkloadSpec& w) {
  w = WorkloadSpec{};
  j.at("name").get_to(w.name);
  w.kind = workload_kind_from_string(j.at("kind").get<std::string>());
  j.at("base_time").get_to(w.base_time);
  j.at("serial_fractions").get_to(w.serial_fractions);
  j.at("power_static").get_to(w.power_static);
  j.at("power_coeffs").get_to(w.power_coeffs);
  if (j.contains("batch_affine")) {
    j["batch_affine"].at("a").get_to(w.batch_affine.a);
    j["batch_affine"].at("b").get_to(w.batch_affine.b);
  }
  if (j.contains("batch_power")) {
    j["batch_power"].at("h").get_to(w.batch_power.h);
    j["batch_power"].at("k").get_to(w.batch_power.k);
  }
  w.train_batch_size = j.value("train_batch_size", 16);
  if (j.contains("batch_sizes")) {
    j["batch_sizes"].get_to(w.batch_sizes);
  } else {
    w.batch_sizes = w.kind == WorkloadKind::Train ? std::vector<int>{1} : std::vector<int>{1, 4, 16, 32, 64};
  }
  w.validate();
}

namespace detail {

struct PresetShape {
  const char* name;
  WorkloadKind kind;
  double a, b;  // for training presets a is the MAXN minibatch time and b = 0
  std::array<double, kNumDims> serial;
  double p_static;
  double p_dynamic;  // dynamic power at MAXN, batch size 1
  std::array<double, kNumDims> shares;
  double h, k;
  std::vector<int> batches;
};

inline WorkloadSpec build_preset(const PresetShape& s, const PowerModeGrid& grid) {
  WorkloadSpec w;
  w.name = s.name;
  w.kind = s.kind;
  w.batch_affine = {s.a, s.b};
  w.base_time = s.a + s.b;
  if (s.kind == WorkloadKind::Train) w.batch_affine = {1.0, 0.0};
  w.serial_fractions = s.serial;
  w.power_static = s.p_static;
  const PowerMode top = grid.maxn();
  for (std::size_t d = 0; d < kNumDims; ++d) w.power_coeffs[d] = s.p_dynamic * s.shares[d] / top[d];
  w.batch_power = {s.h, s.k};
  w.batch_sizes = s.batches;
  w.validate();
  return w;
}

}  // namespace detail

// Ten synthetic presets, one training and one inference task per DNN family.
inline std::vector<WorkloadSpec> preset_workloads(const PowerModeGrid& grid = PowerModeGrid::orin_default()) {
  using detail::PresetShape;
  const std::vector<int> tr{1};
  const std::vector<int> in{1, 4, 16, 32, 64};
  const WorkloadKind T = WorkloadKind::Train;
  const WorkloadKind I = WorkloadKind::Infer;
  const std::vector<PresetShape> shapes = {
      {"resnet-train", T, 0.060, 0.0, {0.00, 0.06, 0.18, 0.35}, 7.8, 43.3, {0.12, 0.18, 0.50, 0.20}, 0.0, 1.0, tr},
      {"mobilenet-train", T, 0.045, 0.0, {0.02, 0.10, 0.30, 0.20}, 8.0, 35.0, {0.15, 0.15, 0.50, 0.20}, 0.0, 1.0, tr},
      {"yolo-train", T, 0.090, 0.0, {0.05, 0.15, 0.35, 0.15}, 8.0, 36.0, {0.20, 0.20, 0.40, 0.20}, 0.0, 1.0, tr},
      {"bert-train", T, 0.500, 0.0, {0.00, 0.02, 0.55, 0.15}, 8.0, 51.0, {0.08, 0.10, 0.60, 0.22}, 0.0, 1.0, tr},
      {"lstm-train", T, 0.030, 0.0, {0.08, 0.25, 0.15, 0.20}, 8.0, 30.0, {0.25, 0.30, 0.25, 0.20}, 0.0, 1.0, tr},
      {"resnet-infer", I, 0.009, 0.0030, {0.03, 0.06, 0.35, 0.15}, 8.0, 14.0, {0.15, 0.15, 0.50, 0.20}, 1.40, 6.0, in},
      {"mobilenet-infer", I, 0.01486, 0.001334, {0.03, 0.08, 0.40, 0.10}, 8.0, 12.9, {0.20, 0.15, 0.45, 0.20}, 1.555, 4.96, in},
      {"yolo-infer", I, 0.020, 0.0040, {0.05, 0.12, 0.35, 0.12}, 8.0, 20.0, {0.20, 0.15, 0.45, 0.20}, 0.90, 8.0, in},
      {"bert-infer", I, 0.00555, 0.06045, {0.00, 0.03, 0.50, 0.20}, 11.0, 45.0, {0.08, 0.10, 0.60, 0.22}, 0.150, 5.0, {1, 4, 16, 32}},
      {"lstm-infer", I, 0.008, 0.0008, {0.10, 0.30, 0.10, 0.15}, 8.0, 12.0, {0.25, 0.30, 0.25, 0.20}, 0.80, 4.0, in},
  };
  std::vector<WorkloadSpec> out;
  out.reserve(shapes.size());
  for (const auto& s : shapes) out.push_back(detail::build_preset(s, grid));
  return out;
}

inline WorkloadSpec find_preset(const std::string& name, const PowerModeGrid& grid = PowerModeGrid::orin_default()) {
  for (auto& w : preset_workloads(grid))
    if (w.name == name) return w;
  throw ConfigError("unknown workload: " + name);
}

}  // namespace fulcrum
