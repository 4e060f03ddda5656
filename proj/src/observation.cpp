#include "racer/observation.hpp"

#include <cmath>
#include <stdexcept>

#include "racer/rng.hpp"

namespace racer {

int ObsConfig::proprio_length() const {
  int n = 17;
  if (no_velocity) n -= 3;
  if (no_acceleration) n -= 3;
  return n;
}

int ObsConfig::global_length() const {
  return 9 * CoursePointSet::count_for(course_horizon_s);
}

void ObsConfig::validate(bool critic_needs_image) const {
  if (course_horizon_s <= 0.0)
    throw std::invalid_argument("ObsConfig: course horizon must be positive");
  if (no_image && critic_needs_image)
    throw std::invalid_argument(
        "ObsConfig: no_image is incompatible with an image-fed critic");
  if (no_image && image_mode != ImageMode::color64)
    throw std::invalid_argument(
        "ObsConfig: image mode is meaningless with no_image");
}

void make_observation(const VehicleState& state, const Track& track,
                      const ObsConfig& cfg, LocalObs* local,
                      GlobalObs* global) {
  if (local) {
    auto& out = local->proprio.values;
    out.clear();
    out.reserve(cfg.proprio_length());
    const ProprioScales& sc = cfg.scales;
    if (!cfg.no_velocity)
      for (double v : state.v) out.push_back(v * sc.v);
    if (!cfg.no_acceleration)
      for (double a : state.v_dot) out.push_back(a * sc.v_dot);
    for (double w : state.v_rot) out.push_back(w * sc.v_rot);
    out.push_back(state.steering_angle * sc.c);
    out.push_back(state.throttle_brake > 0.0 ? state.throttle_brake : 0.0);
    out.push_back(state.throttle_brake < 0.0 ? -state.throttle_brake : 0.0);
    for (double a : state.steer_history) out.push_back(a * sc.h_a);
    for (double d : state.delta_history) out.push_back(d * sc.h_d);

    local->has_image = !cfg.no_image;
    if (local->has_image)
      local->image = render(track, state, cfg.image_mode);
    else
      local->image = ImageObs{};
  }

  if (global) {
    CoursePointSet cps = track.course_points(state.position, state.heading,
                                             state.speed(), cfg.course_horizon_s);
    global->course_points = std::move(cps.values);
  }
}

ProprioObs perturb_proprio(const ProprioObs& p, double level,
                           uint64_t rng_seed) {
  if (level < 0.0)
    throw std::invalid_argument("perturb_proprio: negative noise level");
  Rng rng(rng_seed);
  ProprioObs out = p;
  for (double& v : out.values) v *= 1.0 + level * rng.uniform(-1.0, 1.0);
  return out;
}

}  // namespace racer
