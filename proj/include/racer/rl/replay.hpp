#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "racer/rng.hpp"

namespace racer::rl {

/// Everything a policy or critic needs about one time step. Images are stored
/// quantized to 8 bits to keep the buffer small; empty means no-image mode.
struct StoredObs {
  std::vector<float> proprio;
  std::vector<float> global_obs;  // flattened course points
  std::vector<uint8_t> image;     // C*H*W, row-major, 0..255
};

/// Raw environment step as produced by a rollout worker.
struct Step {
  StoredObs obs;
  float action[2] = {0.f, 0.f};
  float reward = 0.f;
};

/// n-step transition materialized at insertion time.
struct Transition {
  StoredObs obs;
  StoredObs bootstrap_obs;  // s_{t+m}
  float action[2] = {0.f, 0.f};
  float n_return = 0.f;     // sum of gamma^k r_{t+k}, k < m
  float n_discount = 0.f;   // gamma^m on bootstrap, 0 on terminal chains
};

/// Uniform-sampling ring buffer with per-worker n-step assembly. Chains never
/// cross an episode boundary; terminal episodes zero the bootstrap discount,
/// truncated ones (time limit) keep it.
class ReplayBuffer {
 public:
  ReplayBuffer(size_t capacity, int nstep, double gamma);

  /// Appends a step for `worker`; emits a transition once the worker's
  /// pending window spans nstep + 1 observations.
  void push_step(int worker, Step step);

  /// Closes the worker's episode: flushes all pending steps bootstrapping
  /// from `final_obs`. `terminal` distinguishes true termination from
  /// truncation.
  void end_episode(int worker, StoredObs final_obs, bool terminal);

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  size_t total_inserted() const { return inserted_; }

  const Transition& at(size_t i) const { return ring_[i]; }
  std::vector<size_t> sample_indices(size_t batch, Rng& rng) const;

 private:
  void insert(Transition t);

  size_t capacity_;
  int nstep_;
  double gamma_;
  std::vector<Transition> ring_;
  size_t size_ = 0, head_ = 0, inserted_ = 0;
  std::map<int, std::deque<Step>> pending_;
};

}  // namespace racer::rl
