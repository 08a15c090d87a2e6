#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/power_mode.hpp"

namespace fulcrum {

struct ProfileSample {
  PowerMode mode;
  int batch_size = 1;
  double time = 0.0;   // s per minibatch
  double power = 0.0;  // W
};

struct ProfileKey {
  PowerMode mode;
  int batch_size = 1;
  std::string workload;
  auto operator<=>(const ProfileKey&) const = default;
};

// Append-only store of observed samples, shareable between sessions of one device.
class ProfileHistory {
 public:
  const ProfileSample* find(const ProfileKey& key) const {
    auto it = samples_.find(key);
    return it == samples_.end() ? nullptr : &it->second;
  }

  bool contains(const ProfileKey& key) const { return samples_.count(key) > 0; }

  void insert(const ProfileKey& key, const ProfileSample& s) {
    auto [it, fresh] = samples_.emplace(key, s);
    if (fresh) {
      order_.push_back(key);
    } else if (it->second.time != s.time || it->second.power != s.power) {
      throw ConfigError("history entry for " + key.mode.str() + " is immutable");
    }
  }

  std::size_t size() const { return samples_.size(); }
  const std::vector<ProfileKey>& insertion_order() const { return order_; }

  nlohmann::json to_json() const {
    auto rows = nlohmann::json::array();
    for (const auto& k : order_) {
      const auto& s = samples_.at(k);
      rows.push_back({{"cores", k.mode.cores},
                      {"cpu_freq", k.mode.cpu_freq},
                      {"gpu_freq", k.mode.gpu_freq},
                      {"mem_freq", k.mode.mem_freq},
                      {"batch_size", k.batch_size},
                      {"workload", k.workload},
                      {"time_s", s.time},
                      {"power_w", s.power}});
    }
    return rows;
  }

  static ProfileHistory from_json(const nlohmann::json& rows) {
    ProfileHistory h;
    for (const auto& r : rows) {
      ProfileKey k;
      k.mode = {r.at("cores").get<int>(), r.at("cpu_freq").get<int>(), r.at("gpu_freq").get<int>(),
                r.at("mem_freq").get<int>()};
      k.batch_size = r.at("batch_size").get<int>();
      k.workload = r.at("workload").get<std::string>();
      h.insert(k, {k.mode, k.batch_size, r.at("time_s").get<double>(), r.at("power_w").get<double>()});
    }
    return h;
  }

 private:
  std::map<ProfileKey, ProfileSample> samples_;
  std::vector<ProfileKey> order_;
};

// Wall-clock cost of one profiling run: fixed settle time plus a fixed number of minibatches.
struct ProfileCostModel {
  double settle_s = 2.5;
  int minibatches = 40;
  double cost(double minibatch_time) const { return settle_s + minibatches * minibatch_time; }
};

// A budgeted gateway to the device model. Single owner, single thread.
class ProfilingSession {
 public:
  ProfilingSession(const DeviceModel& device, int budget, std::shared_ptr<ProfileHistory> history = nullptr,
                   ProfileCostModel cost = {})
      : device_(&device),
        budget_(budget),
        history_(history ? std::move(history) : std::make_shared<ProfileHistory>()),
        cost_(cost) {
    if (budget < 0) throw ConfigError("profiling budget must be non-negative");
  }

  int budget() const { return budget_; }
  int trials_used() const { return trials_; }
  int remaining() const { return budget_ - trials_; }
  double profiling_seconds() const { return seconds_; }
  const DeviceModel& device() const { return *device_; }
  const ProfileHistory& history() const { return *history_; }
  std::shared_ptr<ProfileHistory> shared_history() const { return history_; }
  // Keys that cost a trial, in the order they were charged.
  const std::vector<std::vector<ProfileKey>>& trial_log() const { return log_; }

  bool cached(const PowerMode& m, int bs, const std::string& workload) const {
    return history_->contains({m, bs, workload});
  }

  ProfileSample profile(const PowerMode& m, int bs, const std::string& workload) {
    ProfileKey key{m, bs, workload};
    check(key);
    if (const auto* hit = history_->find(key)) return *hit;
    charge({key});
    return measure(key);
  }

  // Both workloads at one mode; one trial if either is missing from history.
  std::pair<ProfileSample, ProfileSample> profile_pair(const PowerMode& m, int train_bs, const std::string& train_wl,
                                                       int infer_bs, const std::string& infer_wl) {
    ProfileKey kt{m, train_bs, train_wl};
    ProfileKey ki{m, infer_bs, infer_wl};
    check(kt);
    check(ki);
    const auto* ht = history_->find(kt);
    const auto* hi = history_->find(ki);
    if (ht && hi) return {*ht, *hi};
    std::vector<ProfileKey> missing;
    if (!ht) missing.push_back(kt);
    if (!hi) missing.push_back(ki);
    charge(missing);
    ProfileSample st = ht ? *ht : measure(kt);
    ProfileSample si = hi ? *hi : measure(ki);
    return {st, si};
  }

 private:
  void check(const ProfileKey& key) const {
    if (!device_->grid().contains(key.mode)) throw InvalidModeError("mode " + key.mode.str() + " is not on the grid");
    if (key.batch_size < 1) throw InvalidModeError("batch size must be >= 1");
    device_->workload(key.workload);
  }

  void charge(std::vector<ProfileKey> keys) {
    if (trials_ >= budget_) throw BudgetExhausted("profiling budget of " + std::to_string(budget_) + " exhausted");
    ++trials_;
    seconds_ += cost_.settle_s;
    log_.push_back(std::move(keys));
  }

  ProfileSample measure(const ProfileKey& key) {
    const Measurement r = device_->eval(key.mode, key.batch_size, key.workload);
    ProfileSample s{key.mode, key.batch_size, r.time, r.power};
    history_->insert(key, s);
    seconds_ += cost_.minibatches * r.time;
    return s;
  }

  const DeviceModel* device_;
  int budget_;
  int trials_ = 0;
  double seconds_ = 0.0;
  std::shared_ptr<ProfileHistory> history_;
  ProfileCostModel cost_;
  std::vector<std::vector<ProfileKey>> log_;
};

// 0 = training (first) workload, 1 = inference; ties go to training.
inline int dominant_workload(const ProfileSample& train, const ProfileSample& infer) {
  return infer.power > train.power ? 1 : 0;
}

}  // namespace fulcrum
