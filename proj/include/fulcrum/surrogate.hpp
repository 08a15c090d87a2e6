#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>
#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#endif
#include <json.hpp>

#include "fulcrum/errors.hpp"
#include "fulcrum/random.hpp"

namespace fulcrum {

struct TrainConfig {
  int epochs = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double val_fraction = 0.2;
  double under_penalty = 4.0;
  double mape_eps = 1e-6;
  int batch_size = 0;  // 0 = full batch
  std::vector<int> hidden{256, 128, 64};

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(under_penalty > 1.0)) throw ConfigError("under-prediction penalty must exceed 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
    if (batch_size < 0) throw ConfigError("batch size must be >= 0");
    for (int h : hidden)
      if (h < 1) throw ConfigError("hidden widths must be positive");
  }
};

// Mean of |pred - truth| / (|truth| + eps), with under-predictions weighted by `penalty`.
inline double asymmetric_mape_loss(const std::vector<double>& pred, const std::vector<double>& truth,
                                   double penalty = 4.0, double eps = 1e-6) {
  if (pred.size() != truth.size() || pred.empty()) throw DimensionMismatch("loss inputs must be equal-length and non-empty");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = std::abs(pred[i] - truth[i]) / (std::abs(truth[i]) + eps);
    s += pred[i] < truth[i] ? penalty * e : e;
  }
  return s / static_cast<double>(pred.size());
}

inline double asymmetric_mape_loss(double pred, double truth, double penalty = 4.0, double eps = 1e-6) {
  return asymmetric_mape_loss(std::vector<double>{pred}, std::vector<double>{truth}, penalty, eps);
}

enum class LossKind { AsymmetricMape, SquaredError };

// Dense ReLU network with a scalar linear output and all parameters in one flat vector.
template <typename Scalar>
class Network {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  struct Workspace {
    std::vector<Mat> act;    // act[0] = input, act[l] = layer l output
    std::vector<Mat> delta;  // delta[l] = dLoss/dz for layer l
  };

  Network() = default;

  explicit Network(std::vector<int> widths) : widths_(std::move(widths)) {
    if (widths_.size() < 2 || widths_.back() != 1) throw ConfigError("network needs an input width and a scalar output");
    std::size_t off = 0;
    for (std::size_t l = 1; l < widths_.size(); ++l) {
      w_off_.push_back(off);
      off += static_cast<std::size_t>(widths_[l]) * widths_[l - 1];
      b_off_.push_back(off);
      off += static_cast<std::size_t>(widths_[l]);
    }
    params_ = Vec::Zero(static_cast<Eigen::Index>(off));
  }

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  std::size_t layers() const { return widths_.size() - 1; }
  Eigen::Index num_params() const { return params_.size(); }
  Vec& params() { return params_; }
  const Vec& params() const { return params_; }

  // Weights and biases uniform in +-1/sqrt(fan_in).
  void init(Rng& rng) {
    for (std::size_t l = 0; l < layers(); ++l) {
      const double lim = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      const std::size_t n = static_cast<std::size_t>(widths_[l + 1]) * widths_[l];
      for (std::size_t i = 0; i < n; ++i)
        params_[static_cast<Eigen::Index>(w_off_[l] + i)] = static_cast<Scalar>(rng.uniform(-lim, lim));
      for (int i = 0; i < widths_[l + 1]; ++i)
        params_[static_cast<Eigen::Index>(b_off_[l] + static_cast<std::size_t>(i))] =
            static_cast<Scalar>(rng.uniform(-lim, lim));
    }
  }

  // x: input_dim x n, returns 1 x n.
  Row forward(const Mat& x, Workspace& ws) const { return forward_with(params_, x, ws); }

  const Mat& forward_ref(const Mat& x, Workspace& ws) const {
    run_forward(params_, x, ws);
    return ws.act.back();
  }

  Row forward_with(const Vec& p, const Mat& x, Workspace& ws) const {
    run_forward(p, x, ws);
    return ws.act.back();
  }

  // Loss and its gradient with respect to the flat parameter vector.
  // Only the first `n_loss` columns of x enter the loss (all when negative); the rest are
  // forwarded so their outputs can be read from the workspace.
  Scalar loss_grad(const Vec& p, const Mat& x, const Row& y, LossKind kind, Scalar penalty, Scalar eps, Vec& grad,
                   Workspace& ws, Eigen::Index n_loss = -1) const {
    run_forward(p, x, ws);
    const Eigen::Index n = n_loss < 0 ? x.cols() : n_loss;
    const Mat& out = ws.act.back();
    auto& d_out = ws.delta.back();
    d_out.resize(1, n);
    Scalar loss = 0;
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar r = out(0, i) - y(0, i);
      if (kind == LossKind::SquaredError) {
        loss += r * r;
        d_out(0, i) = 2 * r * inv_n;
      } else {
        const Scalar den = std::abs(y(0, i)) + eps;
        const Scalar w = r < 0 ? penalty : Scalar(1);
        loss += w * std::abs(r) / den;
        const Scalar sg = r > 0 ? Scalar(1) : (r < 0 ? Scalar(-1) : Scalar(0));
        d_out(0, i) = w * sg / den * inv_n;
      }
    }
    loss *= inv_n;
    grad.resize(p.size());
    for (std::size_t l = layers(); l-- > 0;) {
      const Eigen::Map<const Mat> W(p.data() + w_off_[l], widths_[l + 1], widths_[l]);
      Eigen::Map<Mat> gW(grad.data() + w_off_[l], widths_[l + 1], widths_[l]);
      Eigen::Map<Vec> gb(grad.data() + b_off_[l], widths_[l + 1]);
      const Mat& dl = ws.delta[l];
      gW.noalias() = dl * ws.act[l].leftCols(n).transpose();
      gb = dl.rowwise().sum();
      if (l > 0) {
        Mat& prev = ws.delta[l - 1];
        prev.noalias() = W.transpose() * dl;
        prev.array() *= (ws.act[l].leftCols(n).array() > Scalar(0)).template cast<Scalar>();
      }
    }
    return loss;
  }

  nlohmann::json to_json() const {
    std::vector<double> flat(static_cast<std::size_t>(params_.size()));
    for (Eigen::Index i = 0; i < params_.size(); ++i) flat[static_cast<std::size_t>(i)] = static_cast<double>(params_[i]);
    return {{"layers", widths_}, {"params", flat}};
  }

  static Network from_json(const nlohmann::json& j) {
    Network n(j.at("layers").get<std::vector<int>>());
    const auto flat = j.at("params").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(flat.size()) != n.num_params())
      throw DimensionMismatch("parameter count does not match layer shapes");
    for (std::size_t i = 0; i < flat.size(); ++i) n.params_[static_cast<Eigen::Index>(i)] = static_cast<Scalar>(flat[i]);
    return n;
  }

 private:
  void run_forward(const Vec& p, const Mat& x, Workspace& ws) const {
    if (x.rows() != widths_.front()) throw DimensionMismatch("network input has the wrong feature count");
    const std::size_t L = layers();
    ws.act.resize(L + 1);
    ws.delta.resize(L);
    ws.act[0] = x;
    for (std::size_t l = 0; l < L; ++l) {
      const Eigen::Map<const Mat> W(p.data() + w_off_[l], widths_[l + 1], widths_[l]);
      const Eigen::Map<const Vec> b(p.data() + b_off_[l], widths_[l + 1]);
      Mat& z = ws.act[l + 1];
      z.noalias() = W * ws.act[l];
      z.colwise() += b;
      if (l + 1 < L) z = z.cwiseMax(Scalar(0));
    }
  }

  std::vector<int> widths_;
  std::vector<std::size_t> w_off_, b_off_;
  Vec params_;
};

namespace detail {

// Flushes denormal floats to zero for the lifetime of the guard. Adam moments of inactive
// units decay geometrically into the denormal range, which is very slow on x86.
class FlushDenormals {
 public:
#if defined(__SSE__) || defined(_M_X64)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040u); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

}  // namespace detail

struct FitHistory {
  std::vector<double> train_loss;  // per epoch, mean over its minibatches
  std::vector<double> val_loss;    // per epoch, after the update; entry 0 is the initial model
  std::size_t best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
};

// Standardised-feature regressor predicting one positive target.
template <typename Scalar = float>
class Regressor {
 public:
  using Net = Network<Scalar>;
  using Mat = typename Net::Mat;
  using Row = typename Net::Row;
  using Vec = typename Net::Vec;

  Regressor() = default;

  int input_dim() const { return static_cast<int>(mean_.size()); }
  const Net& network() const { return net_; }
  const FitHistory& history() const { return history_; }
  const std::vector<double>& feature_mean() const { return mean_; }
  const std::vector<double>& feature_std() const { return std_; }
  double target_scale() const { return target_scale_; }

  // x: n x d samples (rows), y: n targets.
  static Regressor fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& cfg,
                       std::uint64_t seed) {
    cfg.validate();
    const Eigen::Index n = x.rows();
    if (n < 10) throw InsufficientDataError("surrogate fit needs at least 10 samples, got " + std::to_string(n));
    if (y.size() != n) throw DimensionMismatch("feature and target counts differ");
    const int d = static_cast<int>(x.cols());

    Rng rng(seed);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const auto n_val =
        std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::floor(cfg.val_fraction * static_cast<double>(n))));
    const Eigen::Index n_tr = n - n_val;

    Regressor r;
    r.mean_.assign(static_cast<std::size_t>(d), 0.0);
    r.std_.assign(static_cast<std::size_t>(d), 0.0);
    double ysum = 0.0;
    for (Eigen::Index i = 0; i < n_tr; ++i) {
      const auto row = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
      for (int c = 0; c < d; ++c) r.mean_[static_cast<std::size_t>(c)] += x(row, c);
      ysum += y(row);
    }
    for (auto& m : r.mean_) m /= static_cast<double>(n_tr);
    for (Eigen::Index i = 0; i < n_tr; ++i) {
      const auto row = static_cast<Eigen::Index>(order[static_cast<std::size_t>(i)]);
      for (int c = 0; c < d; ++c) {
        const double e = x(row, c) - r.mean_[static_cast<std::size_t>(c)];
        r.std_[static_cast<std::size_t>(c)] += e * e;
      }
    }
    for (auto& s : r.std_) {
      s = std::sqrt(s / static_cast<double>(n_tr));
      if (!(s > 1e-12)) s = 1.0;
    }
    r.target_scale_ = std::abs(ysum / static_cast<double>(n_tr));
    if (!(r.target_scale_ > 0.0)) r.target_scale_ = 1.0;

    auto pack = [&](Eigen::Index begin, Eigen::Index count, Mat& xs, Row& ys) {
      xs.resize(d, count);
      ys.resize(1, count);
      for (Eigen::Index i = 0; i < count; ++i) {
        const auto row = static_cast<Eigen::Index>(order[static_cast<std::size_t>(begin + i)]);
        for (int c = 0; c < d; ++c) xs(c, i) = static_cast<Scalar>(r.scale_feature(c, x(row, c)));
        ys(0, i) = static_cast<Scalar>(y(row) / r.target_scale_);
      }
    };
    Mat xtr, xva;
    Row ytr, yva;
    pack(0, n_tr, xtr, ytr);
    pack(n_tr, n_val, xva, yva);
    // Training columns first, validation columns last: one forward pass yields both.
    Mat xall(d, n);
    xall << xtr, xva;

    std::vector<int> widths{d};
    widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
    widths.push_back(1);
    r.net_ = Net(widths);
    r.net_.init(rng);

    const detail::FlushDenormals ftz;
    const auto P = r.net_.num_params();
    Vec grad(P), m = Vec::Zero(P), v = Vec::Zero(P), best = r.net_.params();
    typename Net::Workspace ws, wsv;
    const auto pen = static_cast<Scalar>(cfg.under_penalty);
    const auto eps = static_cast<Scalar>(cfg.mape_eps / r.target_scale_);
    auto val_loss_of = [&](const auto& out) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < n_val; ++i) {
        const double t = yva(0, i), p = out(0, i);
        const double e = std::abs(p - t) / (std::abs(t) + static_cast<double>(eps));
        s += p < t ? cfg.under_penalty * e : e;
      }
      return s / static_cast<double>(n_val);
    };
    auto record_val = [&](double vl, int epoch) {
      r.history_.val_loss.push_back(vl);
      if (vl < r.history_.best_val_loss) {
        r.history_.best_val_loss = vl;
        r.history_.best_epoch = static_cast<std::size_t>(epoch);
        best = r.net_.params();
      }
    };
    r.history_.val_loss.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    r.history_.train_loss.reserve(static_cast<std::size_t>(cfg.epochs));

    const auto lr = static_cast<Scalar>(cfg.learning_rate);
    const auto b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
    const auto aeps = static_cast<Scalar>(cfg.adam_eps);
    double b1t = 1.0, b2t = 1.0;
    auto adam = [&]() {
      b1t *= cfg.beta1;
      b2t *= cfg.beta2;
      const auto c1 = static_cast<Scalar>(1.0 / (1.0 - b1t));
      const auto c2 = static_cast<Scalar>(1.0 / (1.0 - b2t));
      m = b1 * m + (Scalar(1) - b1) * grad;
      v.array() = b2 * v.array() + (Scalar(1) - b2) * grad.array().square();
      r.net_.params().array() -= (lr * c1) * m.array() / ((v.array() * c2).sqrt() + aeps);
    };

    const Eigen::Index bs = cfg.batch_size > 0 ? std::min<Eigen::Index>(cfg.batch_size, n_tr) : n_tr;
    if (bs == n_tr) {
      Row yall(1, n);
      yall << ytr, yva;
      for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const Scalar loss =
            r.net_.loss_grad(r.net_.params(), xall, yall, LossKind::AsymmetricMape, pen, eps, grad, ws, n_tr);
        // The forward pass ran on the parameters left by the previous epoch.
        record_val(val_loss_of(ws.act.back().rightCols(n_val)), epoch - 1);
        r.history_.train_loss.push_back(static_cast<double>(loss));
        adam();
      }
    } else {
      record_val(val_loss_of(r.net_.forward_ref(xva, wsv)), 0);
      std::vector<std::size_t> perm(static_cast<std::size_t>(n_tr));
      for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
      Mat xb;
      Row yb;
      for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(perm);
        double epoch_loss = 0.0;
        for (Eigen::Index start = 0; start < n_tr; start += bs) {
          const Eigen::Index cnt = std::min(bs, n_tr - start);
          xb.resize(d, cnt);
          yb.resize(1, cnt);
          for (Eigen::Index i = 0; i < cnt; ++i) {
            const auto c = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(start + i)]);
            xb.col(i) = xtr.col(c);
            yb(0, i) = ytr(0, c);
          }
          const Scalar loss = r.net_.loss_grad(r.net_.params(), xb, yb, LossKind::AsymmetricMape, pen, eps, grad, ws);
          epoch_loss += static_cast<double>(loss) * static_cast<double>(cnt);
          adam();
        }
        r.history_.train_loss.push_back(epoch_loss / static_cast<double>(n_tr));
        if (epoch < cfg.epochs) record_val(val_loss_of(r.net_.forward_ref(xva, wsv)), epoch);
      }
    }
    record_val(val_loss_of(r.net_.forward_ref(xva, wsv)), cfg.epochs);
    r.net_.params() = best;
    return r;
  }

  static Regressor fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                       const TrainConfig& cfg, std::uint64_t seed) {
    if (x.empty()) throw InsufficientDataError("surrogate fit needs at least 10 samples, got 0");
    Eigen::MatrixXd xm(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.front().size()));
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].size() != x.front().size()) throw DimensionMismatch("ragged feature rows");
      for (std::size_t c = 0; c < x[i].size(); ++c) xm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = x[i][c];
    }
    Eigen::VectorXd ym = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    return fit(xm, ym, cfg, seed);
  }

  double scale_feature(int c, double v) const {
    return (v - mean_[static_cast<std::size_t>(c)]) / std_[static_cast<std::size_t>(c)];
  }
  double unscale_feature(int c, double v) const {
    return v * std_[static_cast<std::size_t>(c)] + mean_[static_cast<std::size_t>(c)];
  }

  double predict(const std::vector<double>& features) const {
    if (static_cast<int>(features.size()) != input_dim())
      throw DimensionMismatch("expected " + std::to_string(input_dim()) + " features, got " +
                              std::to_string(features.size()));
    Eigen::MatrixXd x(1, input_dim());
    for (int c = 0; c < input_dim(); ++c) x(0, c) = features[static_cast<std::size_t>(c)];
    return predict_batch(x)(0);
  }

  // x: n x d samples, returns n predictions.
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& x) const {
    if (x.cols() != input_dim())
      throw DimensionMismatch("expected " + std::to_string(input_dim()) + " features, got " + std::to_string(x.cols()));
    Mat xs(input_dim(), x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (int c = 0; c < input_dim(); ++c) xs(c, i) = static_cast<Scalar>(scale_feature(c, x(i, c)));
    typename Net::Workspace ws;
    const Row out = net_.forward(xs, ws);
    Eigen::VectorXd res(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) res(i) = static_cast<double>(out(0, i)) * target_scale_;
    return res;
  }

  nlohmann::json to_json() const {
    nlohmann::json j = net_.to_json();
    j["feature_mean"] = mean_;
    j["feature_std"] = std_;
    j["target_scale"] = target_scale_;
    return j;
  }

  static Regressor from_json(const nlohmann::json& j) {
    Regressor r;
    r.net_ = Net::from_json(j);
    r.mean_ = j.at("feature_mean").get<std::vector<double>>();
    r.std_ = j.at("feature_std").get<std::vector<double>>();
    r.target_scale_ = j.at("target_scale").get<double>();
    if (static_cast<int>(r.mean_.size()) != r.net_.input_dim() || r.std_.size() != r.mean_.size())
      throw DimensionMismatch("scaler size does not match network input");
    return r;
  }

 private:
  Net net_;
  std::vector<double> mean_, std_;
  double target_scale_ = 1.0;
  FitHistory history_;
};

// Plain mean absolute percentage error.
inline double mape(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) s += std::abs(pred(i) - truth(i)) / std::abs(truth(i));
  return s / static_cast<double>(pred.size());
}

}  // namespace fulcrum
