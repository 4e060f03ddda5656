#pragma once

#include <cstdint>
#include <vector>

#include "racer/geom.hpp"
#include "racer/track.hpp"

namespace racer {

/// Agent action: delta steering angle (clamped to +-3 deg) and a combined
/// throttle/brake axis in [-1, 1] (positive = throttle).
struct Action {
  double delta_steer = 0.0;    // radians, clamped on application
  double throttle_brake = 0.0; // clamped to [-1, 1]

  static constexpr double kMaxDeltaSteer = 3.0 * M_PI / 180.0;

  Action clamped() const;
};

/// Stand-in physics parameterization (kinematic bicycle with grip-limited
/// cornering). All units SI.
struct CarParams {
  double wheelbase = 2.6;
  double length = 4.4;          // footprint
  double width = 1.9;
  double engine_accel = 6.0;    // max longitudinal acceleration, m/s^2
  double brake_decel = 11.0;    // max braking deceleration, m/s^2
  double drag = 0.00444;        // quadratic drag, m^-1
  double rolling = 0.25;        // rolling resistance, m/s^2
  double grip = 15.0;           // lateral acceleration limit, m/s^2
  double max_steer = 30.0 * M_PI / 180.0;
  double top_speed = 36.0;      // m/s

  void validate() const;  // throws on inconsistent values
};

struct VehicleState {
  Vec2 position;
  double heading = 0.0;          // radians, world frame
  double v[3] = {0, 0, 0};       // local linear velocity (x fwd, y left), m/s
  double v_dot[3] = {0, 0, 0};   // local linear acceleration, m/s^2
  double v_rot[3] = {0, 0, 0};   // angular velocity (z = yaw rate), rad/s
  double steering_angle = 0.0;   // radians
  double throttle_brake = 0.0;   // last applied command, [-1, 1]
  double s_off = 0.0;            // cumulative off-course seconds
  double s_wall = 0.0;           // cumulative wall-contact seconds
  double steer_history[3] = {0, 0, 0};  // [t, t-1, t-2]
  double delta_history[2] = {0, 0};     // [t - (t-1), (t-1) - (t-2)]
  double lap_clock = 0.0;        // seconds since last lap boundary
  double episode_clock = 0.0;    // seconds since spawn
  bool aborted = false;          // physics blow-up (non-finite state)

  double speed() const { return v[0]; }
  // footprint corners in world frame: FL, FR, RR, RL
  void footprint(const CarParams& p, Vec2 out[4]) const;
};

struct StepInfo {
  TrackProjection proj_before;
  TrackProjection proj_after;
  double progress = 0.0;       // meters along the center line
  double d_s_off = 0.0;        // off-course seconds accrued this step
  double d_s_wall = 0.0;       // wall-contact seconds accrued this step
  double speed = 0.0;          // |v| after the step
  double steer[3] = {0, 0, 0}; // steering angle at t, t-1, t-2
};

struct SimConfig {
  double control_period = 0.1;   // seconds
  int physics_substeps = 6;      // 60 Hz physics under 10 Hz control
  double episode_length = 150.0; // seconds
};

/// Advances one 0.1 s control step (six 1/60 s physics sub-steps).
/// Steering interpolates linearly from the current angle to the clamped
/// target over the sub-steps.
StepInfo control_step(VehicleState& state, const Action& a, const Track& track,
                      const CarParams& params, const SimConfig& cfg = {});

/// Episode spawn: uniform s, lateral within +-0.55 track width, heading
/// facing the center line 30 m ahead, speed uniform in [0, 104.607 km/h].
VehicleState spawn(const Track& track, uint64_t rng_seed);

bool episode_done(const VehicleState& state, double episode_length = 150.0);

/// One (time, projection) sample per step of a trajectory.
struct ProgressSample {
  double t = 0.0;
  TrackProjection proj;
};

/// Completed-lap times: a lap ends when s wraps past 0 while moving forward;
/// the crossing time is interpolated between bracketing samples. The first
/// lap is measured from the start of the trajectory.
std::vector<double> lap_times(const Track& track,
                              const std::vector<ProgressSample>& samples);

}  // namespace racer
