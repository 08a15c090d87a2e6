#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fulcrum/device_model.hpp"
#include "fulcrum/errors.hpp"
#include "fulcrum/power_mode.hpp"
#include "fulcrum/workload.hpp"

namespace fulcrum {

// One measured operating point used to fit a WorkloadSpec.
struct Anchor {
  PowerMode mode;
  int batch_size = 1;
  double time = 0.0;   // s
  double power = 0.0;  // W
};

struct CalibrationReport {
  WorkloadSpec spec;
  double serial_scale = 1.0;
  std::vector<double> time_rel_error;
  std::vector<double> power_rel_error;
};

namespace detail {

inline std::string anchor_str(const Anchor& a) {
  std::ostringstream os;
  os << "(" << a.mode.str() << ", bs=" << a.batch_size << ", t=" << a.time << "s, p=" << a.power << "W)";
  return os.str();
}

inline double slowdown(const std::array<double, kNumDims>& s, const PowerMode& top, const PowerMode& m) {
  double f = 1.0;
  for (std::size_t d = 0; d < kNumDims; ++d) f *= (1.0 - s[d]) + s[d] * (static_cast<double>(top[d]) / m[d]);
  return f;
}

// Ordinary least squares of y against [1, bs].
inline std::pair<double, double> fit_affine(const std::vector<double>& bs, const std::vector<double>& y) {
  const double n = static_cast<double>(bs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    sx += bs[i];
    sy += y[i];
    sxx += bs[i] * bs[i];
    sxy += bs[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  const double b = (n * sxy - sx * sy) / den;
  const double a = (sy - b * sx) / n;
  return {a, b};
}

}  // namespace detail

// Fits time and power coefficients of `shape` (template providing the per-dimension
// profile) to the anchors. Throws CalibrationError when the anchors are inconsistent or the
// fit misses any anchor by more than 15%.
inline CalibrationReport calibrate_report(const std::string& name, const std::vector<Anchor>& anchors,
                                          const WorkloadSpec& shape,
                                          const PowerModeGrid& grid = PowerModeGrid::orin_default()) {
  if (anchors.size() < 2) throw CalibrationError("calibration needs at least two anchors");
  std::set<std::pair<PowerMode, int>> distinct;
  for (const auto& a : anchors) {
    if (!grid.contains(a.mode)) throw InvalidModeError("anchor mode " + a.mode.str() + " is not on the grid");
    if (a.batch_size < 1 || !(a.time > 0.0) || !(a.power > 0.0))
      throw CalibrationError("anchor " + detail::anchor_str(a) + " has non-positive values");
    distinct.emplace(a.mode, a.batch_size);
  }
  if (distinct.size() < 2) throw CalibrationError("anchors must span at least two distinct operating points");

  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      if (i == j) continue;
      const Anchor& lo = anchors[i];
      const Anchor& hi = anchors[j];
      if (!lo.mode.dominated_by(hi.mode)) continue;
      if (lo.batch_size >= hi.batch_size && lo.time < hi.time)
        throw CalibrationError("time is not monotone between " + detail::anchor_str(lo) + " and " +
                               detail::anchor_str(hi));
      if (lo.batch_size <= hi.batch_size && lo.power > hi.power)
        throw CalibrationError("power is not monotone between " + detail::anchor_str(lo) + " and " +
                               detail::anchor_str(hi));
    }
  }

  const PowerMode top = grid.maxn();
  const bool train = shape.kind == WorkloadKind::Train;
  std::set<int> batches;
  bool off_top = false;
  for (const auto& a : anchors) {
    batches.insert(a.batch_size);
    off_top = off_top || a.mode != top;
  }

  // Time: (a + b bs) * slowdown(gamma * s_template). For fixed gamma, (a, b) is linear least
  // squares of t / slowdown against [1, bs]; gamma is a 1-D search on log error.
  const auto& s0 = shape.serial_fractions;
  double smax = 0.0, ssum = 0.0;
  for (double s : s0) {
    smax = std::max(smax, s);
    ssum += s;
  }
  const double gamma_max = (smax > 0.0) ? std::min(1.0 / smax, 1.0 / ssum) : 1.0;

  const double ratio0 = shape.batch_affine.b / (shape.batch_affine.a + shape.batch_affine.b);
  auto solve_ab = [&](double gamma) {
    std::array<double, kNumDims> s{};
    for (std::size_t d = 0; d < kNumDims; ++d) s[d] = gamma * s0[d];
    std::vector<double> x, y;
    for (const auto& a : anchors) {
      x.push_back(a.batch_size);
      y.push_back(a.time / detail::slowdown(s, top, a.mode));
    }
    if (!train && batches.size() >= 2) return detail::fit_affine(x, y);
    // Single batch size (or training): keep the template's batch shape and fit only the scale.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double g = train ? 1.0 : (1.0 - ratio0) + ratio0 * x[i];
      num += g * y[i];
      den += g * g;
    }
    const double c = num / den;
    return train ? std::pair{c, 0.0} : std::pair{c * (1.0 - ratio0), c * ratio0};
  };
  auto time_error = [&](double gamma) {
    const auto [a, b] = solve_ab(gamma);
    if (a < 0.0 || b < 0.0 || a + b <= 0.0) return std::numeric_limits<double>::infinity();
    std::array<double, kNumDims> s{};
    for (std::size_t d = 0; d < kNumDims; ++d) s[d] = gamma * s0[d];
    double err = 0.0;
    for (const auto& an : anchors) {
      const double pred = (a + b * an.batch_size) * detail::slowdown(s, top, an.mode);
      const double e = std::log(pred / an.time);
      err += e * e;
    }
    return err;
  };

  double gamma = 1.0;
  if (off_top && smax > 0.0) {
    constexpr int kScan = 64;
    double best = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i <= kScan; ++i) {
      const double g = gamma_max * i / kScan;
      const double e = time_error(g);
      if (e < best) {
        best = e;
        best_i = i;
      }
    }
    double lo = gamma_max * std::max(0, best_i - 1) / kScan;
    double hi = gamma_max * std::min(kScan, best_i + 1) / kScan;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
    double fc = time_error(c), fd = time_error(d);
    for (int it = 0; it < 80; ++it) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - phi * (hi - lo);
        fc = time_error(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + phi * (hi - lo);
        fd = time_error(d);
      }
    }
    gamma = 0.5 * (lo + hi);
    if (time_error(gamma) > best) gamma = gamma_max * best_i / kScan;
  }
  const auto [ta, tb] = solve_ab(gamma);
  if (!(ta >= 0.0) || !(tb >= 0.0) || !(ta + tb > 0.0))
    throw CalibrationError("time fit produced negative batch coefficients (a=" + std::to_string(ta) +
                           ", b=" + std::to_string(tb) + ")");

  // Power: S + W(bs) * D * u(m), W(bs) = 1 + h q(bs). Linear in (S, D, D h); ridge towards the
  // template keeps the system determined with few anchors.
  std::array<double, kNumDims> share{};
  double dyn0 = 0.0;
  for (std::size_t d = 0; d < kNumDims; ++d) dyn0 += shape.power_coeffs[d] * top[d];
  if (!(dyn0 > 0.0)) throw CalibrationError("template has no dynamic power");
  for (std::size_t d = 0; d < kNumDims; ++d) share[d] = shape.power_coeffs[d] * top[d] / dyn0;
  const double k = shape.batch_power.k;
  const Eigen::Vector3d prior(shape.power_static, dyn0, dyn0 * shape.batch_power.h);
  Eigen::MatrixXd A(static_cast<Eigen::Index>(anchors.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const auto& an = anchors[i];
    double u = 0.0;
    for (std::size_t d = 0; d < kNumDims; ++d) u += share[d] * an.mode[d] / top[d];
    const double q = train ? 0.0 : (an.batch_size - 1.0) / (an.batch_size - 1.0 + k);
    const double w = 1.0 / an.power;
    const auto r = static_cast<Eigen::Index>(i);
    A(r, 0) = w;
    A(r, 1) = w * u;
    A(r, 2) = w * u * q;
    y(r) = 1.0;
  }
  const double ridge = 1e-4;
  Eigen::Matrix3d reg = Eigen::Matrix3d::Zero();
  for (int c = 0; c < 3; ++c) reg(c, c) = ridge / std::max(1.0, prior(c) * prior(c));
  if (train) reg(2, 2) = 1e12;
  const Eigen::Matrix3d lhs = A.transpose() * A + reg;
  const Eigen::Vector3d rhs = A.transpose() * y + reg * prior;
  const Eigen::Vector3d sol = lhs.ldlt().solve(rhs);
  const double S = sol(0), D = sol(1), E = train ? 0.0 : sol(2);
  if (!(S >= 0.0) || !(D > 0.0) || !(E >= 0.0))
    throw CalibrationError("power fit produced negative coefficients (static=" + std::to_string(S) +
                           ", dynamic=" + std::to_string(D) + ", batch=" + std::to_string(E) + ")");

  WorkloadSpec out = shape;
  out.name = name;
  out.batch_affine = train ? BatchAffine{1.0, 0.0} : BatchAffine{ta, tb};
  out.base_time = ta + tb;
  for (std::size_t d = 0; d < kNumDims; ++d) {
    out.serial_fractions[d] = std::min(1.0, gamma * s0[d]);
    out.power_coeffs[d] = D * share[d] / top[d];
  }
  out.power_static = S;
  out.batch_power = {E / D, k};
  out.validate();

  CalibrationReport rep;
  rep.serial_scale = gamma;
  for (const auto& an : anchors) {
    const Measurement m = evaluate_surface(out, top, an.mode, an.batch_size);
    const double et = std::abs(m.time - an.time) / an.time;
    const double ep = std::abs(m.power - an.power) / an.power;
    rep.time_rel_error.push_back(et);
    rep.power_rel_error.push_back(ep);
    if (et > 0.15 || ep > 0.15)
      throw CalibrationError("fit misses anchor " + detail::anchor_str(an) + " by more than 15% (time " +
                             std::to_string(100 * et) + "%, power " + std::to_string(100 * ep) + "%)");
  }
  // Construction performs the exhaustive monotonicity scan.
  DeviceModel check(grid, {out});
  rep.spec = std::move(out);
  return rep;
}

inline WorkloadSpec calibrate(const std::string& name, const std::vector<Anchor>& anchors, const WorkloadSpec& shape,
                              const PowerModeGrid& grid = PowerModeGrid::orin_default()) {
  return calibrate_report(name, anchors, shape, grid).spec;
}

}  // namespace fulcrum
