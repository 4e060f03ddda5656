#pragma once

#include <cstdint>
#include <vector>

#include "racer/camera.hpp"
#include "racer/dynamics.hpp"
#include "racer/track.hpp"

namespace racer {

/// Propriocentric feature vector. Default ordering (17 values):
///   v(3), v_dot(3), v_rot(3), c(3) = (steering, throttle, brake),
///   h_a(3) = last three steering angles, h_d(2) = last two steering deltas.
/// Ablations drop the v or v_dot block (length 14).
struct ProprioObs {
  std::vector<double> values;
};

struct LocalObs {
  bool has_image = false;
  ImageObs image;
  ProprioObs proprio;
};

struct GlobalObs {
  std::vector<double> course_points;  // flattened CoursePointSet (531 default)
};

/// Per-feature-group input scaling applied to the proprio vector; chosen so
/// typical magnitudes land near [-1, 1].
struct ProprioScales {
  double v = 1.0 / 36.0;
  double v_dot = 1.0 / 15.0;
  double v_rot = 1.0 / 2.0;
  double c = 1.0;
  double h_a = 2.0;
  double h_d = 10.0;
};

struct ObsConfig {
  bool no_velocity = false;      // drop v      -> proprio length 14
  bool no_acceleration = false;  // drop v_dot  -> proprio length 14
  bool no_image = false;
  ImageMode image_mode = ImageMode::color64;
  double course_horizon_s = 6.0;  // 2, 4 or 6
  ProprioScales scales;

  int proprio_length() const;
  int global_length() const;
  void validate(bool critic_needs_image = false) const;  // throws
};

void make_observation(const VehicleState& state, const Track& track,
                      const ObsConfig& cfg, LocalObs* local, GlobalObs* global);

/// Multiplicative noise: each component scaled by (1 + level * u),
/// u ~ U[-1, 1] independently per component.
ProprioObs perturb_proprio(const ProprioObs& p, double level,
                           uint64_t rng_seed);

}  // namespace racer
