#include <gtest/gtest.h>

#include <cmath>

#include "fulcrum/random.hpp"
#include "fulcrum/surrogate.hpp"

using namespace fulcrum;

namespace {

using NetD = Network<double>;

// Central finite differences of the network loss; relative agreement with the analytic
// gradient over all parameters.
double worst_gradient_error(LossKind kind, std::uint64_t seed) {
  Rng rng(seed);
  NetD net({5, 12, 8, 1});
  net.init(rng);
  NetD::Mat x(5, 9);
  NetD::Row y(1, 9);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = rng.uniform(-2, 2);
    y(0, c) = rng.uniform(0.5, 3.0);
  }
  NetD::Workspace ws;
  NetD::Vec grad;
  NetD::Vec p = net.params();
  net.loss_grad(p, x, y, kind, 4.0, 1e-6, grad, ws);
  NetD::Vec scratch;
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    NetD::Vec a = p, b = p;
    a[i] += h;
    b[i] -= h;
    const double fa = net.loss_grad(a, x, y, kind, 4.0, 1e-6, scratch, ws);
    const double fb = net.loss_grad(b, x, y, kind, 4.0, 1e-6, scratch, ws);
    const double fd = (fa - fb) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST(Surrogate, GradientMatchesFiniteDifferencesSquared) {
  for (std::uint64_t s = 0; s < 10; ++s) EXPECT_LT(worst_gradient_error(LossKind::SquaredError, s), 1e-4) << s;
}

TEST(Surrogate, GradientMatchesFiniteDifferencesAsymmetric) {
  for (std::uint64_t s = 0; s < 10; ++s) EXPECT_LT(worst_gradient_error(LossKind::AsymmetricMape, s), 1e-4) << s;
}

TEST(Surrogate, UnderPredictionCostsFourTimesAsMuch) {
  const double under = asymmetric_mape_loss(8.0, 10.0);
  const double over = asymmetric_mape_loss(12.0, 10.0);
  EXPECT_EQ(under, 4.0 * over);
  EXPECT_NEAR(over, 0.2, 1e-6);
  EXPECT_EQ(asymmetric_mape_loss(10.0, 10.0), 0.0);
  EXPECT_THROW(asymmetric_mape_loss(std::vector<double>{1.0}, std::vector<double>{}), DimensionMismatch);
}

TEST(Surrogate, LearnsSmoothFunction) {
  Rng rng(9);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 200; ++i) {
    const double a = rng.uniform(1, 4), b = rng.uniform(100, 2000);
    x.push_back({a, b});
    y.push_back(1.0 + 2.0 / a + 500.0 / b);
  }
  TrainConfig cfg;
  cfg.epochs = 600;
  const auto reg = Regressor<float>::fit(x, y, cfg, 1);
  double err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double a = rng.uniform(1, 4), b = rng.uniform(100, 2000);
    const double t = 1.0 + 2.0 / a + 500.0 / b;
    err += std::abs(reg.predict({a, b}) - t) / t;
  }
  EXPECT_LT(err / 50, 0.05);
  EXPECT_TRUE(std::isfinite(reg.history().best_val_loss));
}

TEST(Surrogate, DeterministicGivenSeed) {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 40; ++i) {
    x.push_back({double(i % 7), double(i % 5)});
    y.push_back(1.0 + (i % 7) * 0.3 + (i % 5) * 0.1);
  }
  TrainConfig cfg;
  cfg.epochs = 50;
  const auto a = Regressor<float>::fit(x, y, cfg, 5);
  const auto b = Regressor<float>::fit(x, y, cfg, 5);
  EXPECT_EQ(a.predict({3, 2}), b.predict({3, 2}));
  const auto back = Regressor<float>::from_json(a.to_json());
  EXPECT_EQ(back.predict({3, 2}), a.predict({3, 2}));
}

TEST(Surrogate, RejectsBadConfigAndShapes) {
  TrainConfig cfg;
  cfg.under_penalty = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(NetD({3, 4}), ConfigError);
  NetD net({3, 4, 1});
  NetD::Workspace ws;
  EXPECT_THROW(net.forward(NetD::Mat::Zero(2, 1), ws), DimensionMismatch);
}
