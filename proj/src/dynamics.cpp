#include "racer/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "racer/rng.hpp"

namespace racer {

Action Action::clamped() const {
  Action out;
  out.delta_steer = std::clamp(delta_steer, -kMaxDeltaSteer, kMaxDeltaSteer);
  out.throttle_brake = std::clamp(throttle_brake, -1.0, 1.0);
  return out;
}

void CarParams::validate() const {
  auto pos = [](double v, const char* name) {
    if (!(v > 0.0)) throw std::invalid_argument(std::string("CarParams: ") + name + " must be positive");
  };
  pos(wheelbase, "wheelbase");
  pos(length, "length");
  pos(width, "width");
  pos(engine_accel, "engine_accel");
  pos(brake_decel, "brake_decel");
  pos(drag, "drag");
  pos(rolling, "rolling");
  pos(grip, "grip");
  pos(max_steer, "max_steer");
  pos(top_speed, "top_speed");
  // drag must be able to hold the car at top speed
  if (drag * top_speed * top_speed + rolling < engine_accel - 1e-6)
    throw std::invalid_argument("CarParams: top_speed inconsistent with drag");
}

void VehicleState::footprint(const CarParams& p, Vec2 out[4]) const {
  Vec2 fwd{std::cos(heading), std::sin(heading)};
  Vec2 left = fwd.perp();
  Vec2 ex = fwd * (p.length / 2.0);
  Vec2 ey = left * (p.width / 2.0);
  out[0] = position + ex + ey;  // FL
  out[1] = position + ex - ey;  // FR
  out[2] = position - ex - ey;  // RR
  out[3] = position - ex + ey;  // RL
}

namespace {

bool finite_state(const VehicleState& s) {
  return std::isfinite(s.position.x) && std::isfinite(s.position.y) &&
         std::isfinite(s.heading) && std::isfinite(s.v[0]) &&
         std::isfinite(s.steering_angle);
}

}  // namespace

StepInfo control_step(VehicleState& state, const Action& action,
                      const Track& track, const CarParams& params,
                      const SimConfig& cfg) {
  StepInfo info;
  info.proj_before = track.project(state.position);

  if (state.aborted) {
    info.proj_after = info.proj_before;
    return info;
  }

  Action a = action.clamped();
  double steer_from = state.steering_angle;
  double steer_to = std::clamp(steer_from + a.delta_steer, -params.max_steer,
                               params.max_steer);
  double dt = cfg.control_period / cfg.physics_substeps;

  double speed = state.v[0];
  double yaw_rate = 0.0;
  double a_long = 0.0, a_lat = 0.0;

  for (int sub = 1; sub <= cfg.physics_substeps; ++sub) {
    double frac = static_cast<double>(sub) / cfg.physics_substeps;
    double steer = steer_from + (steer_to - steer_from) * frac;

    // longitudinal: engine or brake minus drag and rolling resistance
    double drive = a.throttle_brake >= 0.0
                       ? a.throttle_brake * params.engine_accel
                       : a.throttle_brake * params.brake_decel;
    double resist = params.drag * speed * speed + (speed > 0.0 ? params.rolling : 0.0);
    a_long = drive - resist;
    double new_speed = speed + a_long * dt;
    if (new_speed < 0.0) new_speed = 0.0;  // no reverse gear
    if (new_speed > params.top_speed) new_speed = params.top_speed;

    // lateral: kinematic bicycle yaw rate, saturated at the grip limit
    yaw_rate = new_speed * std::tan(steer) / params.wheelbase;
    a_lat = new_speed * yaw_rate;
    if (std::abs(a_lat) > params.grip && new_speed > 1e-9) {
      yaw_rate = std::copysign(params.grip / new_speed, yaw_rate);
      a_lat = std::copysign(params.grip, a_lat);
    }

    state.heading = wrap_angle(state.heading + yaw_rate * dt);
    state.position.x += new_speed * std::cos(state.heading) * dt;
    state.position.y += new_speed * std::sin(state.heading) * dt;
    speed = new_speed;
    state.steering_angle = steer;

    // wall contact: project velocity along the wall tangent, push out
    Vec2 corners[4];
    state.footprint(params, corners);
    bool wall_hit = track.wall_contact(corners);
    if (wall_hit) {
      Vec2 wa, wb;
      if (track.nearest_wall(state.position, params.length * 2.0, &wa, &wb)) {
        Vec2 tangent = (wb - wa).normalized();
        Vec2 vel{speed * std::cos(state.heading), speed * std::sin(state.heading)};
        double along = vel.dot(tangent);
        Vec2 projected = tangent * along;
        speed = projected.norm();
        if (speed > 1e-9)
          state.heading = std::atan2(projected.y, projected.x);
        // push the footprint back to the track side of the wall
        Vec2 nrm = tangent.perp();
        Vec2 to_center = track.center_at(info.proj_before.s).xy() - state.position;
        if (nrm.dot(to_center) < 0.0) nrm = nrm * -1.0;
        state.position = state.position + nrm * 0.05;
      }
      info.d_s_wall += dt;
      state.s_wall += dt;
    }

    state.footprint(params, corners);
    if (track.corners_on_course(corners).off_course) {
      info.d_s_off += dt;
      state.s_off += dt;
    }
  }

  state.v_dot[0] = a_long;
  state.v_dot[1] = a_lat;
  state.v[0] = speed;
  state.v_rot[2] = yaw_rate;
  state.throttle_brake = a.throttle_brake;

  // steering history shifts once per control step
  state.steer_history[2] = state.steer_history[1];
  state.steer_history[1] = state.steer_history[0];
  state.steer_history[0] = state.steering_angle;
  state.delta_history[1] = state.delta_history[0];
  state.delta_history[0] = state.steer_history[0] - state.steer_history[1];

  state.episode_clock += cfg.control_period;
  state.lap_clock += cfg.control_period;

  if (!finite_state(state)) state.aborted = true;

  info.proj_after = track.project(state.position);
  info.progress = track.progress_delta(info.proj_before, info.proj_after);
  info.speed = state.v[0];
  info.steer[0] = state.steer_history[0];
  info.steer[1] = state.steer_history[1];
  info.steer[2] = state.steer_history[2];
  return info;
}

VehicleState spawn(const Track& track, uint64_t rng_seed) {
  Rng rng(rng_seed);
  VehicleState st;
  double L = track.total_length();
  double s = rng.uniform(0.0, L);
  double w = track.width_at(s);
  double lateral = rng.uniform(-0.55 * w, 0.55 * w);

  Vec2 c = track.center_at(s).xy();
  double track_heading = track.heading_at(s);
  Vec2 left{-std::sin(track_heading), std::cos(track_heading)};
  st.position = c + left * lateral;

  Vec2 ahead = track.center_at(track.wrap_s(s + 30.0)).xy();
  Vec2 dir = ahead - st.position;
  st.heading = std::atan2(dir.y, dir.x);

  constexpr double kMaxLaunch = 104.607 / 3.6;  // km/h -> m/s
  st.v[0] = rng.uniform(0.0, kMaxLaunch);
  return st;
}

bool episode_done(const VehicleState& state, double episode_length) {
  return state.aborted || state.episode_clock >= episode_length;
}

std::vector<double> lap_times(const Track& track,
                              const std::vector<ProgressSample>& samples) {
  std::vector<double> laps;
  if (samples.empty()) return laps;
  double lap_start = samples.front().t;
  for (size_t i = 1; i < samples.size(); ++i) {
    const auto& prev = samples[i - 1];
    const auto& cur = samples[i];
    double delta = track.progress_delta(prev.proj, cur.proj);
    if (delta > 0.0 && cur.proj.s < prev.proj.s) {
      // wrapped past s = 0 while moving forward; interpolate the crossing
      double to_zero = track.total_length() - prev.proj.s;
      double frac = delta > 0.0 ? to_zero / delta : 0.0;
      double t_cross = prev.t + frac * (cur.t - prev.t);
      laps.push_back(t_cross - lap_start);
      lap_start = t_cross;
    }
  }
  return laps;
}

}  // namespace racer
