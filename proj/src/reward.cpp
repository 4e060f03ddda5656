#include "racer/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace racer {

RewardBreakdown compute_reward(const StepInfo& info, const RewardWeights& w) {
  for (double v : {info.progress, info.d_s_off, info.d_s_wall, info.speed,
                   info.steer[0], info.steer[1], info.steer[2]}) {
    if (!std::isfinite(v))
      throw std::invalid_argument("compute_reward: non-finite StepInfo");
  }

  RewardBreakdown r;
  r.r_progress = info.progress;
  r.r_off = -info.d_s_off * info.speed;
  r.r_wall = -info.d_s_wall * info.speed;

  double delta_t = info.steer[0] - info.steer[1];
  double delta_prev = info.steer[1] - info.steer[2];
  r.r_steer = -std::abs(delta_t);

  // Inconsistency penalty: both deltas above the threshold in magnitude and
  // of opposite sign. sgn(0) never triggers the penalty.
  bool flip = std::abs(delta_t) > w.c_d && std::abs(delta_prev) > w.c_d &&
              delta_t * delta_prev < 0.0;
  if (flip) {
    double mag = std::abs(delta_t) + std::abs(delta_prev);
    r.r_hist = -1.0 / (1.0 + std::exp(-w.c_s * (mag - w.c_o)));
  }

  r.total = r.r_progress + w.lambda_off * r.r_off + w.lambda_wall * r.r_wall +
            w.lambda_steer * r.r_steer + w.lambda_hist * r.r_hist;
  return r;
}

}  // namespace racer
