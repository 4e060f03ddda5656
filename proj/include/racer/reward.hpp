#pragma once

#include "racer/dynamics.hpp"

namespace racer {

/// Reward constants; defaults are the published values.
struct RewardWeights {
  double lambda_off = 10.0;
  double lambda_wall = 10.0;
  double lambda_steer = 3.0;
  double lambda_hist = 5.0;
  double c_d = 0.014;       // delta-steer threshold, rad
  double c_s = 182.883569;  // sigmoid sensitivity
  double c_o = 0.034;       // sigmoid offset, rad
};

struct RewardBreakdown {
  double r_progress = 0.0;  // meters of course progress
  double r_off = 0.0;       // <= 0
  double r_wall = 0.0;      // <= 0
  double r_steer = 0.0;     // <= 0
  double r_hist = 0.0;      // in (-1, 0]
  double total = 0.0;
};

/// Five-term shaped reward. Throws on non-finite inputs.
RewardBreakdown compute_reward(const StepInfo& info,
                               const RewardWeights& w = {});

}  // namespace racer
