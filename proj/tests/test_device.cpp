#include <gtest/gtest.h>

#include <set>

#include "fulcrum/calibrate.hpp"
#include "fulcrum/device_model.hpp"
#include "fulcrum/power_mode.hpp"
#include "fulcrum/workload.hpp"

using namespace fulcrum;

TEST(PowerModeGrid, DefaultHas441Modes) {
  const auto g = PowerModeGrid::orin_default();
  EXPECT_EQ(g.size(), 441u);
  EXPECT_EQ(g.maxn(), (PowerMode{12, 2200, 1300, 3200}));
  EXPECT_EQ(g.minimum(), (PowerMode{4, 422, 115, 665}));
}

TEST(PowerModeGrid, FlattenRoundTrips) {
  const auto g = PowerModeGrid::orin_default();
  std::set<PowerMode> seen;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto idx = g.unflatten(i);
    EXPECT_EQ(g.flatten(idx), i);
    const PowerMode m = g.mode_at(i);
    EXPECT_TRUE(g.contains(m));
    EXPECT_EQ(g.index_of(m), idx);
    seen.insert(m);
  }
  EXPECT_EQ(seen.size(), g.size());
}

TEST(PowerModeGrid, RejectsUnsortedValues) {
  EXPECT_THROW(PowerModeGrid({4, 4}, {1}, {1}, {1}), ConfigError);
  EXPECT_THROW(PowerModeGrid({}, {1}, {1}, {1}), ConfigError);
  EXPECT_THROW(PowerModeGrid({0}, {1}, {1}, {1}), ConfigError);
}

TEST(PowerModeGrid, MidpointIsCentral) {
  const auto g = PowerModeGrid::orin_default();
  const auto mid = g.mid_index();
  EXPECT_EQ(mid, (ModeIndex{1, 3, 3, 1}));
}

TEST(DeviceModel, PresetsAreMonotone) {
  const auto dev = DeviceModel::with_presets();
  const auto& g = dev.grid();
  EXPECT_EQ(dev.workloads().size(), 10u);
  for (const auto& w : dev.workloads()) {
    for (std::size_t f = 0; f < g.size(); ++f) {
      const auto idx = g.unflatten(f);
      for (int bs : w.batch_sizes) {
        const auto base = dev.eval(g.mode_at(idx), bs, w);
        for (std::size_t d = 0; d < kNumDims; ++d) {
          if (idx[d] + 1 >= g.dim_size(d)) continue;
          auto up = idx;
          ++up[d];
          const auto next = dev.eval(g.mode_at(up), bs, w);
          ASSERT_LE(next.time, base.time) << w.name;
          ASSERT_GE(next.power, base.power) << w.name;
        }
      }
    }
  }
}

TEST(DeviceModel, BatchGrowsTimeAndPower) {
  const auto dev = DeviceModel::with_presets();
  const auto m = dev.grid().maxn();
  for (const auto& w : dev.workloads()) {
    if (w.is_train()) continue;
    for (std::size_t i = 1; i < w.batch_sizes.size(); ++i) {
      const auto a = dev.eval(m, w.batch_sizes[i - 1], w);
      const auto b = dev.eval(m, w.batch_sizes[i], w);
      EXPECT_GT(b.time, a.time) << w.name;
      EXPECT_GE(b.power, a.power) << w.name;
    }
  }
}

TEST(DeviceModel, NoiseIsBoundedAndDeterministic) {
  const auto clean = DeviceModel::with_presets();
  const auto noisy = DeviceModel::with_presets({0.05, 11});
  const auto again = DeviceModel::with_presets({0.05, 11});
  const auto& g = clean.grid();
  for (std::size_t f = 0; f < g.size(); f += 7) {
    const auto m = g.mode_at(f);
    const auto a = clean.eval(m, 1, "resnet-train");
    const auto b = noisy.eval(m, 1, "resnet-train");
    const auto c = again.eval(m, 1, "resnet-train");
    EXPECT_LE(std::abs(b.time / a.time - 1.0), 0.05 + 1e-12);
    EXPECT_LE(std::abs(b.power / a.power - 1.0), 0.05 + 1e-12);
    EXPECT_EQ(b.time, c.time);
    EXPECT_EQ(b.power, c.power);
  }
  EXPECT_THROW(DeviceModel::with_presets({0.2, 0}), ConfigError);
}

TEST(DeviceModel, RejectsUnknownWorkloadAndOffGridMode) {
  const auto dev = DeviceModel::with_presets();
  EXPECT_THROW(dev.workload("nope"), ConfigError);
  EXPECT_THROW(dev.eval(PowerMode{5, 422, 115, 665}, 1, "resnet-train"), InvalidModeError);
  EXPECT_THROW(dev.eval(dev.grid().maxn(), 0, "resnet-train"), InvalidModeError);
}

TEST(DeviceModel, WorkloadJsonRoundTrip) {
  const auto w = find_preset("yolo-infer");
  nlohmann::json j = w;
  const auto back = j.get<WorkloadSpec>();
  const auto g = PowerModeGrid::orin_default();
  for (int bs : w.batch_sizes) {
    const auto a = evaluate_surface(w, g.maxn(), g.mode_at(100), bs);
    const auto b = evaluate_surface(back, g.maxn(), g.mode_at(100), bs);
    EXPECT_DOUBLE_EQ(a.time, b.time);
    EXPECT_DOUBLE_EQ(a.power, b.power);
  }
}

// Anchors taken from the preset at MAXN across batch sizes recover the per-item affine time
// model: 14.86 ms + 1.334 ms per item.
TEST(Calibrate, RecoversAffineBatchModelAtMaxn) {
  const auto g = PowerModeGrid::orin_default();
  const auto shape = find_preset("mobilenet-infer", g);
  std::vector<Anchor> anchors;
  for (int bs : {1, 4, 16, 32, 64}) {
    const double t = 0.01486 + 0.001334 * bs;
    const auto truth = evaluate_surface(shape, g.maxn(), g.maxn(), bs);
    EXPECT_NEAR(truth.time, t, 1e-12);
    anchors.push_back({g.maxn(), bs, t, truth.power});
  }
  const auto rep = calibrate_report("fit", anchors, shape, g);
  EXPECT_NEAR(rep.spec.batch_affine.a, 0.01486, 1e-9);
  EXPECT_NEAR(rep.spec.batch_affine.b, 0.001334, 1e-9);
  for (double e : rep.time_rel_error) EXPECT_LT(e, 1e-9);
  for (double e : rep.power_rel_error) EXPECT_LT(e, 1e-3);
}

TEST(Calibrate, RecoversPresetFromScatteredAnchors) {
  const auto g = PowerModeGrid::orin_default();
  const auto shape = find_preset("resnet-infer", g);
  std::vector<Anchor> anchors;
  for (std::size_t f : {0u, 60u, 150u, 222u, 333u, 440u})
    for (int bs : {1, 16, 64}) {
      const auto r = evaluate_surface(shape, g.maxn(), g.mode_at(f), bs);
      anchors.push_back({g.mode_at(f), bs, r.time, r.power});
    }
  const auto rep = calibrate_report("fit", anchors, shape, g);
  EXPECT_NEAR(rep.serial_scale, 1.0, 1e-3);
  for (double e : rep.time_rel_error) EXPECT_LT(e, 1e-3);
  for (double e : rep.power_rel_error) EXPECT_LT(e, 1e-3);
}

TEST(Calibrate, RejectsInconsistentAnchors) {
  const auto g = PowerModeGrid::orin_default();
  const auto shape = find_preset("resnet-infer", g);
  // Slower at the faster mode.
  std::vector<Anchor> bad{{g.minimum(), 1, 0.01, 10.0}, {g.maxn(), 1, 0.02, 20.0}};
  EXPECT_THROW(calibrate_report("bad", bad, shape, g), CalibrationError);
  std::vector<Anchor> one{{g.maxn(), 1, 0.01, 20.0}};
  EXPECT_THROW(calibrate_report("one", one, shape, g), CalibrationError);
  std::vector<Anchor> neg{{g.maxn(), 1, -0.01, 20.0}, {g.minimum(), 1, 0.1, 10.0}};
  EXPECT_THROW(calibrate_report("neg", neg, shape, g), CalibrationError);
}
