#include "racer/net/scenario.hpp"

#include <sstream>
#include <stdexcept>

namespace racer::net {

ImageMode image_mode_from_string(const std::string& s) {
  if (s == "color64") return ImageMode::color64;
  if (s == "gray64") return ImageMode::gray64;
  if (s == "color32") return ImageMode::color32;
  if (s == "masked_mirror") return ImageMode::masked_mirror;
  throw WireError("unknown image mode: " + s);
}

std::string to_string(ImageMode m) {
  switch (m) {
    case ImageMode::color64: return "color64";
    case ImageMode::gray64: return "gray64";
    case ImageMode::color32: return "color32";
    case ImageMode::masked_mirror: return "masked_mirror";
  }
  throw WireError("bad image mode value");
}

Scenario Scenario::from_text(const std::string& text) {
  KeyValues kv = parse_key_values(text);
  Scenario sc;
  sc.track_name = kv.get("track", sc.track_name);
  sc.episode_s = kv.get_num("episode_s", sc.episode_s);
  sc.steps_per_phase =
      static_cast<int>(kv.get_num("steps_per_phase", sc.steps_per_phase));
  sc.eval_episodes =
      static_cast<int>(kv.get_num("eval_episodes", sc.eval_episodes));
  sc.batch = static_cast<int>(kv.get_num("batch", sc.batch));
  sc.heartbeat_s = kv.get_num("heartbeat_s", sc.heartbeat_s);
  sc.dead_peer_s = kv.get_num("dead_peer_s", sc.dead_peer_s);
  sc.eval_spawn_seed =
      static_cast<uint64_t>(kv.get_num("eval_spawn_seed", 12345));
  sc.worker_id = static_cast<int>(kv.get_num("worker_id", -1));

  sc.obs.no_velocity = kv.get_num("no_velocity", 0) != 0;
  sc.obs.no_acceleration = kv.get_num("no_acceleration", 0) != 0;
  sc.obs.no_image = kv.get_num("no_image", 0) != 0;
  sc.obs.image_mode = image_mode_from_string(
      kv.get("image_mode", to_string(sc.obs.image_mode)));
  sc.obs.course_horizon_s =
      kv.get_num("horizon_s", sc.obs.course_horizon_s);

  if (kv.has("conv")) {
    sc.conv_channels.clear();
    std::istringstream is(kv.get("conv", ""));
    std::string tok;
    while (std::getline(is, tok, ','))
      sc.conv_channels.push_back(std::stoi(tok));
  }
  sc.embed = static_cast<int>(kv.get_num("embed", sc.embed));
  sc.trunk_width = static_cast<int>(kv.get_num("trunk_width", sc.trunk_width));
  sc.trunk_depth = static_cast<int>(kv.get_num("trunk_depth", sc.trunk_depth));
  sc.validate();
  return sc;
}

std::string Scenario::to_text() const {
  KeyValues kv;
  std::ostringstream conv;
  for (size_t i = 0; i < conv_channels.size(); ++i)
    conv << (i ? "," : "") << conv_channels[i];
  auto num = [](double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  };
  kv.set("track", track_name);
  kv.set("episode_s", num(episode_s));
  kv.set("steps_per_phase", num(steps_per_phase));
  kv.set("eval_episodes", num(eval_episodes));
  kv.set("batch", num(batch));
  kv.set("heartbeat_s", num(heartbeat_s));
  kv.set("dead_peer_s", num(dead_peer_s));
  kv.set("eval_spawn_seed", num(static_cast<double>(eval_spawn_seed)));
  kv.set("worker_id", num(worker_id));
  kv.set("no_velocity", obs.no_velocity ? "1" : "0");
  kv.set("no_acceleration", obs.no_acceleration ? "1" : "0");
  kv.set("no_image", obs.no_image ? "1" : "0");
  kv.set("image_mode", to_string(obs.image_mode));
  kv.set("horizon_s", num(obs.course_horizon_s));
  kv.set("conv", conv.str());
  kv.set("embed", num(embed));
  kv.set("trunk_width", num(trunk_width));
  kv.set("trunk_depth", num(trunk_depth));
  return kv.to_text();
}

Track Scenario::make_track() const {
  if (track_name == "oval") return Track::oval();
  if (track_name == "chicane") return Track::chicane_course();
  if (track_name == "mixed") return Track::mixed_circuit();
  return Track::load(track_name);
}

nn::ActorArch Scenario::actor_arch() const {
  nn::ActorArch a;
  a.use_image = !obs.no_image;
  switch (obs.image_mode) {
    case ImageMode::color64: a.image_hw = 64; a.image_c = 3; break;
    case ImageMode::gray64: a.image_hw = 64; a.image_c = 1; break;
    case ImageMode::color32: a.image_hw = 32; a.image_c = 3; break;
    case ImageMode::masked_mirror: a.image_hw = 64; a.image_c = 3; break;
  }
  a.conv_channels = conv_channels;
  a.embed = embed;
  a.proprio = obs.proprio_length();
  a.trunk_width = trunk_width;
  a.trunk_depth = trunk_depth;
  return a;
}

void Scenario::validate() const {
  obs.validate();
  if (episode_s <= 0) throw std::invalid_argument("Scenario: episode_s <= 0");
  if (steps_per_phase <= 0)
    throw std::invalid_argument("Scenario: steps_per_phase <= 0");
  if (eval_episodes < 0)
    throw std::invalid_argument("Scenario: eval_episodes < 0");
  if (batch <= 0) throw std::invalid_argument("Scenario: batch <= 0");
  if (heartbeat_s <= 0 || dead_peer_s <= heartbeat_s)
    throw std::invalid_argument(
        "Scenario: need 0 < heartbeat_s < dead_peer_s");
  if (!obs.no_image) {
    int hw = actor_arch().image_hw;
    for (size_t i = 0; i < conv_channels.size(); ++i) {
      if (hw % 2 != 0)
        throw std::invalid_argument("Scenario: conv stack too deep for image");
      hw /= 2;
    }
    if (hw < 1) throw std::invalid_argument("Scenario: conv stack too deep");
  }
}

}  // namespace racer::net
