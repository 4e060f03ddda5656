#include "racer/rl/replay.hpp"

#include <cmath>
#include <stdexcept>

namespace racer::rl {

ReplayBuffer::ReplayBuffer(size_t capacity, int nstep, double gamma)
    : capacity_(capacity), nstep_(nstep), gamma_(gamma) {
  if (capacity == 0 || nstep < 1 || gamma <= 0.0 || gamma > 1.0)
    throw std::invalid_argument("ReplayBuffer: bad configuration");
  ring_.resize(capacity);
}

void ReplayBuffer::push_step(int worker, Step step) {
  auto& q = pending_[worker];
  q.push_back(std::move(step));
  if (static_cast<int>(q.size()) == nstep_ + 1) {
    Transition t;
    t.obs = q.front().obs;
    t.action[0] = q.front().action[0];
    t.action[1] = q.front().action[1];
    double r = 0.0, g = 1.0;
    for (int k = 0; k < nstep_; ++k) {
      r += g * q[k].reward;
      g *= gamma_;
    }
    t.n_return = static_cast<float>(r);
    t.n_discount = static_cast<float>(g);
    t.bootstrap_obs = q[nstep_].obs;
    q.pop_front();
    insert(std::move(t));
  }
}

void ReplayBuffer::end_episode(int worker, StoredObs final_obs, bool terminal) {
  auto& q = pending_[worker];
  while (!q.empty()) {
    int m = static_cast<int>(q.size());
    Transition t;
    t.obs = q.front().obs;
    t.action[0] = q.front().action[0];
    t.action[1] = q.front().action[1];
    double r = 0.0, g = 1.0;
    for (int k = 0; k < m; ++k) {
      r += g * q[k].reward;
      g *= gamma_;
    }
    t.n_return = static_cast<float>(r);
    t.n_discount = terminal ? 0.f : static_cast<float>(g);
    t.bootstrap_obs = final_obs;
    q.pop_front();
    insert(std::move(t));
  }
  pending_.erase(worker);
}

void ReplayBuffer::insert(Transition t) {
  ring_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
  ++inserted_;
}

std::vector<size_t> ReplayBuffer::sample_indices(size_t batch, Rng& rng) const {
  if (size_ == 0) throw std::runtime_error("ReplayBuffer: empty");
  std::vector<size_t> out(batch);
  for (size_t i = 0; i < batch; ++i) out[i] = rng.uniform_index(size_);
  return out;
}

}  // namespace racer::rl
