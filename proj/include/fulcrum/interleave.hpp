#pragma once

#include <algorithm>
#include <cmath>

#include "fulcrum/errors.hpp"
#include "fulcrum/power_mode.hpp"

namespace fulcrum {

// One managed-interleaving cycle: tau training minibatches, then one inference minibatch of
// size beta, repeating every beta / alpha seconds.
struct InterleavePlan {
  PowerMode mode;
  int beta = 1;
  int tau = 0;
  double alpha = 0.0;
  double t_tr = 0.0;
  double t_in = 0.0;
  double p_tr = 0.0;
  double p_in = 0.0;
  double cycle_time = 0.0;  // beta / alpha
  double latency = 0.0;     // (beta - 1) / alpha + t_in
  double theta = 0.0;       // training minibatches per second
  double power = 0.0;       // max(p_tr, p_in)
  bool feasible = false;    // inference keeps up with arrivals
};

inline double batch_latency(int beta, double alpha, double t_in) { return (beta - 1) / alpha + t_in; }

inline bool sustainable(int beta, double alpha, double t_in) { return t_in * alpha <= beta; }

inline InterleavePlan plan_interleave(const PowerMode& mode, int beta, double alpha, double t_tr, double t_in,
                                      double p_tr, double p_in) {
  if (beta < 1 || !(alpha > 0.0) || !(t_tr > 0.0) || !(t_in > 0.0) || !(p_tr >= 0.0) || !(p_in >= 0.0))
    throw ConfigError("plan_interleave requires positive inputs");
  InterleavePlan p;
  p.mode = mode;
  p.beta = beta;
  p.alpha = alpha;
  p.t_tr = t_tr;
  p.t_in = t_in;
  p.p_tr = p_tr;
  p.p_in = p_in;
  p.cycle_time = beta / alpha;
  p.latency = batch_latency(beta, alpha, t_in);
  p.power = std::max(p_tr, p_in);
  p.feasible = sustainable(beta, alpha, t_in);
  if (p.feasible) {
    const double slots = (p.cycle_time - t_in) / t_tr;
    p.tau = std::max(0, static_cast<int>(std::floor(slots + 1e-9)));
    p.theta = p.tau / p.cycle_time;
  }
  return p;
}

}  // namespace fulcrum
