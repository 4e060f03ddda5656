#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "racer/nn/adam.hpp"
#include "racer/nn/net.hpp"
#include "racer/nn/policy.hpp"
#include "racer/rl/replay.hpp"
#include "racer/rng.hpp"

namespace racer::rl {

struct TrainerConfig {
  int batch = 512;
  double lr = 2.5e-5;
  double alpha = 0.01;          // fixed entropy temperature
  int quantiles = 32;
  double gamma = 0.9896;
  int nstep = 7;
  int steps_per_epoch = 6000;
  int epochs = 50;              // desk-scale default; full scale 2000/4000
  double tau = 0.005;           // Polyak coefficient for target critics
  double critic_clip_norm = 10.0;
  double kappa = 1.0;           // Huber width; 0 = pure pinball
  bool symmetric = false;       // critic sees images instead of course points
  size_t replay_capacity = 2'500'000;
  uint64_t seed = 0;

  nn::ActorArch actor_arch;
  int global_dim = 531;
  int critic_width = 2048;
  int critic_depth = 4;
  nn::PolicyHeadConfig policy;

  nn::CriticArch critic_arch() const;
  void validate() const;
};

struct EpochMetrics {
  int steps = 0;
  double critic_loss = 0.0;           // mean over the epoch
  double actor_loss = 0.0;
  double max_critic_grad_norm = 0.0;  // after clipping
  uint64_t snapshot_version = 0;
  bool empty_buffer_warning = false;
};

/// QR-SAC with two quantile critics, min-over-critics targets, n-step
/// returns and Polyak target updates. Asymmetric mode feeds the critics
/// global course points; symmetric mode feeds them their own conv embedding.
class QrSacTrainer {
 public:
  explicit QrSacTrainer(TrainerConfig cfg);

  /// One critic + actor gradient step plus target update.
  void train_step(const ReplayBuffer& buffer, double* critic_loss,
                  double* actor_loss, double* critic_grad_norm);

  EpochMetrics train_epoch(const ReplayBuffer& buffer);

  /// Actor head for a single observation (inference).
  void actor_head(const StoredObs& obs, double out[4]);

  /// Quantile targets for a sampled batch; exposed for tests.
  nn::Tensor<float> build_targets(const ReplayBuffer& buffer,
                                  const std::vector<size_t>& idx);

  nn::ActorNet<float>& actor() { return actor_; }
  nn::CriticNet<float>& critic1() { return critic1_; }
  nn::CriticNet<float>& critic2() { return critic2_; }
  const TrainerConfig& config() const { return cfg_; }
  uint64_t snapshot_version() const { return version_; }
  Rng& rng() { return rng_; }

  /// Every trainable and target parameter, for checkpointing.
  std::vector<nn::Param<float>*> all_params();
  /// Actor parameters only (what workers need).
  std::vector<nn::Param<float>*> actor_params() { return actor_.params(); }
  uint64_t actor_hash() const;
  uint64_t full_hash() const;

 private:
  struct Batch;
  Batch assemble(const ReplayBuffer& buffer, const std::vector<size_t>& idx);

  TrainerConfig cfg_;
  Rng rng_;
  nn::ActorNet<float> actor_;
  nn::CriticNet<float> critic1_, critic2_, target1_, target2_;
  std::unique_ptr<nn::Adam<float>> actor_opt_, critic_opt_;
  uint64_t version_ = 0;
};

}  // namespace racer::rl
