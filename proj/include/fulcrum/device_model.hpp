#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fulcrum/errors.hpp"
#include "fulcrum/power_mode.hpp"
#include "fulcrum/workload.hpp"

namespace fulcrum {

// Minibatch time (s) and power (W) at one operating point.
struct Measurement {
  double time = 0.0;
  double power = 0.0;
};

// Optional multiplicative noise, a pure function of (mode, batch, workload, seed).
struct NoiseConfig {
  double amplitude = 0.0;  // uniform in [-amplitude, +amplitude]
  std::uint64_t seed = 0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t hash_string(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
  return h;
}

inline double unit_from_hash(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

}  // namespace detail

// Cost surface without grid lookup; `top` is the MAXN mode of the owning grid.
inline Measurement evaluate_surface(const WorkloadSpec& w, const PowerMode& top, const PowerMode& m, int bs) {
  double slow = 1.0;
  double dyn = 0.0;
  for (std::size_t d = 0; d < kNumDims; ++d) {
    const double s = w.serial_fractions[d];
    slow *= (1.0 - s) + s * (static_cast<double>(top[d]) / m[d]);
    dyn += w.power_coeffs[d] * m[d];
  }
  const auto& ab = w.batch_affine;
  const double batch = (ab.a + ab.b * bs) / (ab.a + ab.b);
  return {batch * w.base_time * slow, w.power_static + w.batch_power.factor(bs) * dyn};
}

// Deterministic ground-truth device. Immutable after construction.
class DeviceModel {
 public:
  DeviceModel(PowerModeGrid grid, std::vector<WorkloadSpec> workloads, NoiseConfig noise = {})
      : grid_(std::move(grid)), workloads_(std::move(workloads)), noise_(noise) {
    if (noise_.amplitude < 0.0 || noise_.amplitude > 0.05)
      throw ConfigError("noise amplitude must lie in [0, 0.05]");
    for (std::size_t i = 0; i < workloads_.size(); ++i) {
      workloads_[i].validate();
      if (!index_.emplace(workloads_[i].name, i).second)
        throw ConfigError("duplicate workload: " + workloads_[i].name);
      check_monotone(workloads_[i]);
    }
  }

  static DeviceModel with_presets(NoiseConfig noise = {}) {
    auto grid = PowerModeGrid::orin_default();
    auto wl = preset_workloads(grid);
    return DeviceModel(std::move(grid), std::move(wl), noise);
  }

  const PowerModeGrid& grid() const { return grid_; }
  const std::vector<WorkloadSpec>& workloads() const { return workloads_; }
  const NoiseConfig& noise() const { return noise_; }

  bool has_workload(const std::string& name) const { return index_.count(name) > 0; }

  const WorkloadSpec& workload(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown workload: " + name);
    return workloads_[it->second];
  }

  Measurement eval(const PowerMode& m, int batch_size, const WorkloadSpec& w) const {
    if (!grid_.contains(m)) throw InvalidModeError("mode " + m.str() + " is not on the grid");
    if (batch_size < 1) throw InvalidModeError("batch size must be >= 1");
    Measurement r = evaluate_surface(w, grid_.maxn(), m, batch_size);
    if (noise_.amplitude > 0.0) {
      std::uint64_t h = detail::hash_string(w.name) ^ detail::splitmix64(noise_.seed);
      for (std::size_t d = 0; d < kNumDims; ++d) h = detail::splitmix64(h ^ static_cast<std::uint64_t>(m[d]));
      h = detail::splitmix64(h ^ static_cast<std::uint64_t>(batch_size));
      const double u1 = 2.0 * detail::unit_from_hash(h) - 1.0;
      const double u2 = 2.0 * detail::unit_from_hash(detail::splitmix64(h)) - 1.0;
      r.time *= 1.0 + noise_.amplitude * u1;
      r.power *= 1.0 + noise_.amplitude * u2;
    }
    return r;
  }

  Measurement eval(const PowerMode& m, int batch_size, const std::string& workload_name) const {
    return eval(m, batch_size, workload(workload_name));
  }

 private:
  void check_monotone(const WorkloadSpec& w) const {
    const PowerMode top = grid_.maxn();
    for (std::size_t flat = 0; flat < grid_.size(); ++flat) {
      const ModeIndex idx = grid_.unflatten(flat);
      const PowerMode m = grid_.mode_at(idx);
      for (int bs : w.batch_sizes) {
        const Measurement base = evaluate_surface(w, top, m, bs);
        if (!(base.time > 0.0) || !(base.power > 0.0))
          throw ConfigError("workload '" + w.name + "' yields non-positive time or power at " + m.str());
        for (std::size_t d = 0; d < kNumDims; ++d) {
          if (idx[d] + 1 >= grid_.dim_size(d)) continue;
          ModeIndex up = idx;
          ++up[d];
          const Measurement next = evaluate_surface(w, top, grid_.mode_at(up), bs);
          if (next.time > base.time || next.power < base.power)
            throw ConfigError("workload '" + w.name + "' is not monotone along " + kDimNames[d] + " at " +
                              m.str());
        }
      }
    }
  }

  PowerModeGrid grid_;
  std::vector<WorkloadSpec> workloads_;
  std::map<std::string, std::size_t> index_;
  NoiseConfig noise_;
};

}  // namespace fulcrum
