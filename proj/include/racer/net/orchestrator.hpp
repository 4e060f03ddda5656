#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "racer/net/scenario.hpp"
#include "racer/net/wire.hpp"
#include "racer/rl/qrsac.hpp"

namespace racer::net {

struct DistributedConfig {
  Scenario scenario;
  rl::TrainerConfig trainer;  // arch fields are overwritten from scenario
  int collectors = 4;
  int evaluators = 1;
  StepMode mode = StepMode::sync;
  double inference_delay_s = 0.0;
  uint64_t seed = 0;
  double phase_timeout_s = 600.0;

  /// Derives a trainer config consistent with the scenario (actor arch,
  /// global dim, replay geometry untouched).
  rl::TrainerConfig derived_trainer() const;
};

struct EpochRecord {
  rl::EpochMetrics metrics;
  std::vector<EvalResultMsg> evals;  // results observed during this epoch
};

struct TrainingResult {
  std::vector<EpochRecord> epochs;
  std::vector<EvalResultMsg> final_evals;  // on the last published snapshot
  size_t total_steps = 0;
};

/// Lock-step distributed training: per epoch, broadcast the current policy,
/// wait for every collector's full phase of transitions, ingest them, run
/// one training epoch. With a single sync collector the whole loop is
/// deterministic. `on_epoch` (optional) observes progress.
TrainingResult run_distributed_training(
    const DistributedConfig& cfg, rl::QrSacTrainer* trainer,
    const std::function<void(int, const EpochRecord&)>& on_epoch = nullptr);

}  // namespace racer::net
