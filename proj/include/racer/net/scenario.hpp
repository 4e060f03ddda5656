#pragma once

#include <string>
#include <vector>

#include "racer/net/wire.hpp"
#include "racer/nn/net.hpp"
#include "racer/observation.hpp"
#include "racer/track.hpp"

namespace racer::net {

ImageMode image_mode_from_string(const std::string& s);
std::string to_string(ImageMode m);

/// Everything a rollout worker needs to run episodes, exchanged as the
/// CONFIG message and stored in experiment spec files.
struct Scenario {
  std::string track_name = "oval";  // builtin (oval/chicane/mixed) or a path
  double episode_s = 150.0;
  int steps_per_phase = 1000;  // collector steps per snapshot phase
  int eval_episodes = 1;
  int batch = 64;              // transitions per TRANSITIONS message
  double heartbeat_s = 5.0;
  double dead_peer_s = 20.0;
  uint64_t eval_spawn_seed = 12345;
  int worker_id = -1;          // assigned by the trainer on HELLO

  ObsConfig obs;
  std::vector<int> conv_channels = {64, 128, 256, 512};
  int embed = 128;
  int trunk_width = 2048;
  int trunk_depth = 4;

  static Scenario from_text(const std::string& text);
  std::string to_text() const;

  Track make_track() const;
  nn::ActorArch actor_arch() const;
  void validate() const;  // throws on inconsistent settings
};

}  // namespace racer::net
