#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "racer/dynamics.hpp"
#include "racer/net/scenario.hpp"
#include "racer/net/wire.hpp"
#include "racer/nn/net.hpp"
#include "racer/rl/replay.hpp"
#include "racer/rng.hpp"

namespace racer::net {

/// Quantized observation in the replay-buffer layout (image CHW uint8).
rl::StoredObs pack_obs(const LocalObs& local, const GlobalObs& global);

/// Single-observation policy head (inference path shared with the trainer's
/// convention: images divided by 255, CHW).
void actor_forward_head(nn::ActorNet<float>& actor, const rl::StoredObs& obs,
                        double out[4]);

/// Optional in-place edit of each observation before the policy sees it
/// (noise injection for perturbation studies). Never affects the dynamics.
using ObsHook = std::function<void(LocalObs*, GlobalObs*)>;

struct EpisodeResult {
  struct TraceRow {
    double t = 0.0;
    double x = 0.0, y = 0.0;
    double heading = 0.0;
    double s = 0.0;      // arc-length position on the center line
    double speed = 0.0;
  };

  std::vector<rl::Step> steps;  // action recorded = applied action
  rl::StoredObs final_obs;
  bool terminal = false;        // physics abort; time/phase limits truncate
  std::vector<double> lap_times;
  double progress_m = 0.0;
  double duration_s = 0.0;
  std::vector<TraceRow> trace;  // one row per tick, plus the initial state
  // per-tick policy outputs vs env-applied actions (async staleness probe)
  std::vector<std::array<float, 2>> computed;
  std::vector<std::array<float, 2>> applied;
};

/// Runs one episode at 10 Hz control. Sync mode applies each tick's fresh
/// action (lock-step: inference latency never reaches the dynamics). Async
/// mode advances on a modeled 10 Hz clock and applies the most recent action
/// whose inference (latency `inference_delay_s`) has completed, repeating
/// the previous action otherwise. policy_rng == nullptr selects the
/// deterministic policy. max_steps >= 0 truncates the episode early.
EpisodeResult run_episode(const Scenario& sc, const Track& track,
                          nn::ActorNet<float>& actor, StepMode mode,
                          double inference_delay_s, uint64_t spawn_seed,
                          Rng* policy_rng, int max_steps = -1,
                          const ObsHook& obs_hook = {});

struct WorkerOptions {
  std::string host = "127.0.0.1";
  int port = 0;
  WorkerRole role = WorkerRole::collector;
  StepMode mode = StepMode::sync;
  uint64_t seed = 0;
  double inference_delay_s = 0.0;
  int max_phases = -1;  // stop after this many snapshot phases; -1 = no limit
  int connect_retries = 8;

  // test hooks (single-threaded worker writes, read after join)
  std::vector<uint64_t>* observed_versions = nullptr;
  uint64_t* steps_sent = nullptr;
};

/// Runs until SHUTDOWN (or max_phases). Connects with bounded exponential
/// backoff, sends HELLO, configures itself from CONFIG, then serves one
/// collection or evaluation phase per received SNAPSHOT, heartbeating
/// while idle.
void worker_loop(const WorkerOptions& opt);

}  // namespace racer::net
