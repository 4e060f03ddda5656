#pragma once

// 1-D point-mass toy environment shared by the trainer tests and the
// acceptance suite: state x, throttle action nudges x, reward -x^2. The
// optimal policy drives x to the origin and holds it there.

#include <algorithm>
#include <vector>

#include "racer/nn/policy.hpp"
#include "racer/rl/qrsac.hpp"
#include "racer/rl/replay.hpp"
#include "racer/rng.hpp"

namespace toy {

struct ToyEnv {
  double x = 0.0;

  void reset(racer::Rng& rng) { x = rng.uniform(-1.0, 1.0); }
  double step(double throttle) {
    x = std::clamp(x + 0.25 * throttle, -2.0, 2.0);
    return -x * x;
  }
  racer::rl::StoredObs obs() const {
    racer::rl::StoredObs o;
    o.proprio = {static_cast<float>(x)};
    o.global_obs = {static_cast<float>(x)};
    return o;
  }
};

inline racer::rl::TrainerConfig toy_config(uint64_t seed) {
  racer::rl::TrainerConfig cfg;
  cfg.seed = seed;
  cfg.batch = 64;
  cfg.lr = 3e-3;
  cfg.alpha = 0.01;
  cfg.quantiles = 8;
  cfg.gamma = 0.95;
  cfg.nstep = 3;
  cfg.steps_per_epoch = 100;
  cfg.tau = 0.01;
  cfg.replay_capacity = 20000;
  cfg.actor_arch.use_image = false;
  cfg.actor_arch.proprio = 1;
  cfg.actor_arch.trunk_width = 32;
  cfg.actor_arch.trunk_depth = 2;
  cfg.global_dim = 1;
  cfg.critic_width = 64;
  cfg.critic_depth = 2;
  return cfg;
}

constexpr int kEpisodeSteps = 20;

inline void collect_episodes(racer::rl::QrSacTrainer& trainer,
                             racer::rl::ReplayBuffer& buffer, int episodes,
                             racer::Rng& rng) {
  ToyEnv env;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng);
    for (int s = 0; s < kEpisodeSteps; ++s) {
      racer::rl::Step step;
      step.obs = env.obs();
      double head[4];
      trainer.actor_head(step.obs, head);
      racer::nn::PolicySample a =
          racer::nn::sample_action(head, rng, false, trainer.config().policy);
      step.action[0] = static_cast<float>(a.action[0]);
      step.action[1] = static_cast<float>(a.action[1]);
      step.reward = static_cast<float>(env.step(a.action[1]));
      buffer.push_step(0, std::move(step));
    }
    buffer.end_episode(0, env.obs(), /*terminal=*/false);
  }
}

inline double evaluate(racer::rl::QrSacTrainer& trainer, int episodes,
                       racer::Rng& rng) {
  ToyEnv env;
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    env.reset(rng);
    for (int s = 0; s < kEpisodeSteps; ++s) {
      double head[4];
      trainer.actor_head(env.obs(), head);
      racer::nn::PolicySample a =
          racer::nn::sample_action(head, rng, true, trainer.config().policy);
      total += env.step(a.action[1]);
    }
  }
  return total / episodes;
}

}  // namespace toy
