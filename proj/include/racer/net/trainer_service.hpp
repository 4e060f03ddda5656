#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "racer/net/scenario.hpp"
#include "racer/net/socket.hpp"
#include "racer/net/wire.hpp"
#include "racer/rl/replay.hpp"

namespace racer::net {

struct ServiceOptions {
  int port = 0;  // 0 = ephemeral
  Scenario scenario;
};

/// Trainer-side network endpoint: one accept loop, one handler thread per
/// worker, and a single ingestion queue. Workers receive the scenario (with
/// an assigned worker id) and the latest snapshot on HELLO; snapshots are
/// broadcast on publish. Transition and evaluation messages are queued for
/// the buffer owner to drain. Peers silent past the dead-peer timeout are
/// dropped; malformed frames get an error response and a connection close,
/// never a crash.
class TrainerService {
 public:
  explicit TrainerService(ServiceOptions opt);
  ~TrainerService();

  void start();
  void stop();  // broadcasts SHUTDOWN and joins all threads

  int port() const { return listener_->port(); }

  /// Stores and broadcasts a snapshot; versions must be strictly
  /// increasing. Resets the per-worker phase step counters.
  void publish_snapshot(uint64_t version, std::vector<uint8_t> params);

  /// Re-sends the stored snapshot to every live peer without bumping the
  /// version or resetting phase counters. Recovery path for a worker that
  /// missed the broadcast; a worker that already served this version simply
  /// serves one more phase.
  void rebroadcast_snapshot();

  /// Applies every queued transition record to `buffer` (n-step assembly
  /// happens inside the buffer, keyed by worker id). Returns the number of
  /// step records applied.
  size_t drain_steps(rl::ReplayBuffer* buffer);

  std::vector<EvalResultMsg> take_eval_results();

  /// Blocks until every one of `collectors` distinct collector workers has
  /// delivered at least `per_worker` step records since the last publish.
  bool wait_for_steps(size_t per_worker, int collectors, double timeout_s);

  /// Blocks until at least `n` eval results are queued.
  bool wait_for_eval_results(size_t n, double timeout_s);

  size_t total_step_records() const;
  int worker_count() const;
  int ever_connected() const;

  /// One-line liveness summary (peer states and per-worker phase step
  /// counts) for timeout diagnostics.
  std::string debug_status() const;

 private:
  struct Peer {
    TcpConn conn;
    std::mutex send_mu;  // serializes writes from handler + broadcast threads
    std::thread thread;
    uint32_t id = 0;
    bool said_hello = false;
    bool wants_snapshot = false;
    WorkerRole role = WorkerRole::collector;
    std::chrono::steady_clock::time_point last_seen;
    bool done = false;
  };

  void accept_loop();
  void handle_peer(Peer* peer);
  void send_to_peer(Peer* peer, const WireMessage& msg);

  ServiceOptions opt_;
  std::unique_ptr<TcpListener> listener_;
  std::thread accept_thread_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  bool running_ = false;
  uint32_t next_id_ = 0;
  std::vector<std::unique_ptr<Peer>> peers_;
  uint64_t snapshot_version_ = 0;
  std::vector<uint8_t> snapshot_params_;
  std::vector<TransitionsMsg> step_queue_;
  std::vector<EvalResultMsg> eval_queue_;
  std::map<uint32_t, size_t> phase_steps_;  // per collector since publish
  size_t total_steps_ = 0;
};

}  // namespace racer::net
