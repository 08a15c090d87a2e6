#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "fulcrum/errors.hpp"

namespace fulcrum {

inline constexpr std::size_t kNumDims = 4;

// Power-mode dimensions in their canonical order.
enum class Dim : std::size_t { Cores = 0, CpuFreq = 1, GpuFreq = 2, MemFreq = 3 };

inline constexpr std::array<const char*, kNumDims> kDimNames = {"cores", "cpu_freq", "gpu_freq",
                                                                "mem_freq"};

// One device configuration: active CPU cores plus CPU/GPU/memory frequencies in MHz.
struct PowerMode {
  int cores = 0;
  int cpu_freq = 0;
  int gpu_freq = 0;
  int mem_freq = 0;

  int operator[](std::size_t d) const {
    switch (d) {
      case 0: return cores;
      case 1: return cpu_freq;
      case 2: return gpu_freq;
      default: return mem_freq;
    }
  }
  int& operator[](std::size_t d) {
    switch (d) {
      case 0: return cores;
      case 1: return cpu_freq;
      case 2: return gpu_freq;
      default: return mem_freq;
    }
  }

  auto operator<=>(const PowerMode&) const = default;

  // Elementwise partial order: every dimension of *this is <= other's.
  bool dominated_by(const PowerMode& other) const {
    return cores <= other.cores && cpu_freq <= other.cpu_freq && gpu_freq <= other.gpu_freq &&
           mem_freq <= other.mem_freq;
  }

  std::string str() const {
    return std::to_string(cores) + "c/" + std::to_string(cpu_freq) + "/" + std::to_string(gpu_freq) +
           "/" + std::to_string(mem_freq);
  }
};

inline void to_json(nlohmann::json& j, const PowerMode& m) {
  j = nlohmann::json{{"cores", m.cores}, {"cpu_freq", m.cpu_freq}, {"gpu_freq", m.gpu_freq},
                     {"mem_freq", m.mem_freq}};
}

inline void from_json(const nlohmann::json& j, PowerMode& m) {
  j.at("cores").get_to(m.cores);
  j.at("cpu_freq").get_to(m.cpu_freq);
  j.at("gpu_freq").get_to(m.gpu_freq);
  j.at("mem_freq").get_to(m.mem_freq);
}

// Index of a mode inside a grid, one entry per dimension.
using ModeIndex = std::array<int, kNumDims>;

// Cartesian grid of admissible power-mode values.
class PowerModeGrid {
 public:
  PowerModeGrid() = default;

  PowerModeGrid(std::vector<int> cores, std::vector<int> cpu, std::vector<int> gpu,
                std::vector<int> mem)
      : values_{std::move(cores), std::move(cpu), std::move(gpu), std::move(mem)} {
    for (std::size_t d = 0; d < kNumDims; ++d) {
      const auto& v = values_[d];
      if (v.empty()) throw ConfigError(std::string("grid dimension ") + kDimNames[d] + " is empty");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] <= 0) throw ConfigError(std::string("grid values must be positive in ") + kDimNames[d]);
        if (i > 0 && v[i] <= v[i - 1])
          throw ConfigError(std::string("grid values must be strictly increasing in ") + kDimNames[d]);
      }
    }
  }

  // 3 core counts x 7 CPU x 7 GPU x 3 memory frequencies = 441 modes.
  static PowerModeGrid orin_default() {
    return PowerModeGrid({4, 8, 12}, {422, 729, 1036, 1344, 1651, 1958, 2200},
                         {115, 318, 522, 727, 930, 1134, 1300}, {665, 2133, 3200});
  }

  const std::vector<int>& values(std::size_t d) const { return values_[d]; }
  int dim_size(std::size_t d) const { return static_cast<int>(values_[d].size()); }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& v : values_) n *= v.size();
    return n;
  }

  PowerMode mode_at(const ModeIndex& idx) const {
    PowerMode m;
    for (std::size_t d = 0; d < kNumDims; ++d) m[d] = values_[d].at(static_cast<std::size_t>(idx[d]));
    return m;
  }

  // Row-major flat enumeration; the last dimension varies fastest.
  PowerMode mode_at(std::size_t flat) const { return mode_at(unflatten(flat)); }

  ModeIndex unflatten(std::size_t flat) const {
    ModeIndex idx{};
    for (std::size_t d = kNumDims; d-- > 0;) {
      const auto n = values_[d].size();
      idx[d] = static_cast<int>(flat % n);
      flat /= n;
    }
    return idx;
  }

  std::size_t flatten(const ModeIndex& idx) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < kNumDims; ++d) flat = flat * values_[d].size() + static_cast<std::size_t>(idx[d]);
    return flat;
  }

  bool contains(const PowerMode& m) const {
    for (std::size_t d = 0; d < kNumDims; ++d)
      if (!std::binary_search(values_[d].begin(), values_[d].end(), m[d])) return false;
    return true;
  }

  ModeIndex index_of(const PowerMode& m) const {
    ModeIndex idx{};
    for (std::size_t d = 0; d < kNumDims; ++d) {
      const auto& v = values_[d];
      auto it = std::lower_bound(v.begin(), v.end(), m[d]);
      if (it == v.end() || *it != m[d])
        throw InvalidModeError("mode " + m.str() + " is not on the grid (" + kDimNames[d] + ")");
      idx[d] = static_cast<int>(it - v.begin());
    }
    return idx;
  }

  PowerMode maxn() const {
    return {values_[0].back(), values_[1].back(), values_[2].back(), values_[3].back()};
  }
  PowerMode minimum() const {
    return {values_[0].front(), values_[1].front(), values_[2].front(), values_[3].front()};
  }

  // Middle index per dimension; lower middle for even-length lists.
  ModeIndex mid_index() const {
    ModeIndex idx{};
    for (std::size_t d = 0; d < kNumDims; ++d) idx[d] = (dim_size(d) - 1) / 2;
    return idx;
  }
  PowerMode mid() const { return mode_at(mid_index()); }

  std::vector<PowerMode> all_modes() const {
    std::vector<PowerMode> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(mode_at(i));
    return out;
  }

  bool operator==(const PowerModeGrid&) const = default;

 private:
  std::array<std::vector<int>, kNumDims> values_;
};

inline void to_json(nlohmann::json& j, const PowerModeGrid& g) {
  j = nlohmann::json{{"cores", g.values(0)}, {"cpu_freq", g.values(1)}, {"gpu_freq", g.values(2)},
                     {"mem_freq", g.values(3)}};
}

inline void from_json(const nlohmann::json& j, PowerModeGrid& g) {
  g = PowerModeGrid(j.at("cores").get<std::vector<int>>(), j.at("cpu_freq").get<std::vector<int>>(),
                    j.at("gpu_freq").get<std::vector<int>>(), j.at("mem_freq").get<std::vector<int>>());
}

}  // namespace fulcrum
