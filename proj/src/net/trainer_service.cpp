#include "racer/net/trainer_service.hpp"

#include <algorithm>
#include <chrono>

namespace racer::net {

using Clock = std::chrono::steady_clock;

TrainerService::TrainerService(ServiceOptions opt) : opt_(std::move(opt)) {
  opt_.scenario.validate();
  listener_ = std::make_unique<TcpListener>(opt_.port);
}

TrainerService::~TrainerService() { stop(); }

void TrainerService::start() {
  std::lock_guard<std::mutex> lock(mu_);
  if (running_) return;
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void TrainerService::stop() {
  std::vector<Peer*> live;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) return;
    running_ = false;
    for (auto& p : peers_) live.push_back(p.get());
  }
  for (Peer* p : live) send_to_peer(p, encode_shutdown());
  listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  std::vector<std::unique_ptr<Peer>> peers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    peers.swap(peers_);
  }
  for (auto& p : peers) {
    p->conn.close();
    if (p->thread.joinable()) p->thread.join();
  }
}

void TrainerService::send_to_peer(Peer* peer, const WireMessage& msg) {
  // serialized per peer and never under mu_, so a slow reader can only stall
  // its own connection
  std::lock_guard<std::mutex> lock(peer->send_mu);
  try {
    if (peer->conn.valid()) peer->conn.send_msg(msg);
  } catch (const WireError&) {
    // slow/dead worker keeps its old state; never block or kill the trainer
  }
}

void TrainerService::accept_loop() {
  for (;;) {
    TcpConn conn = listener_->accept(100);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!running_) return;
      if (!conn.valid()) continue;
      auto peer = std::make_unique<Peer>();
      peer->conn = std::move(conn);
      peer->id = next_id_++;
      peer->last_seen = Clock::now();
      Peer* raw = peer.get();
      peers_.push_back(std::move(peer));
      raw->thread = std::thread([this, raw] { handle_peer(raw); });
    }
  }
}

void TrainerService::handle_peer(Peer* peer) {
  for (;;) {
    WireMessage msg;
    RecvStatus st;
    try {
      st = peer->conn.recv_msg(&msg, 100);
    } catch (const WireError& e) {
      // malformed frame: report, then drop the connection
      send_to_peer(peer, encode_error({std::string(e.what())}));
      break;
    }
    if (st == RecvStatus::closed) break;
    if (st == RecvStatus::timeout) {
      std::lock_guard<std::mutex> lock(mu_);
      if (!running_) break;
      double silent =
          std::chrono::duration<double>(Clock::now() - peer->last_seen)
              .count();
      if (peer->said_hello && silent > opt_.scenario.dead_peer_s) break;
      continue;
    }

    bool drop = false;
    WireMessage reply;
    bool have_reply = false;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!running_) break;
      peer->last_seen = Clock::now();
      try {
        switch (msg.type) {
          case MsgType::HELLO: {
            HelloMsg hello = decode_hello(msg);
            peer->said_hello = true;
            peer->role = hello.role;
            peer->wants_snapshot = snapshot_version_ > 0;
            break;
          }
          case MsgType::TRANSITIONS: {
            TransitionsMsg t = decode_transitions(msg);
            for (const auto& rec : t.records)
              if (!rec.end_of_episode) {
                ++phase_steps_[t.worker_id];
                ++total_steps_;
              }
            step_queue_.push_back(std::move(t));
            cv_.notify_all();
            break;
          }
          case MsgType::EVAL_RESULT:
            eval_queue_.push_back(decode_eval_result(msg));
            cv_.notify_all();
            break;
          case MsgType::HEARTBEAT:
          case MsgType::ERROR:
            break;
          case MsgType::SHUTDOWN:
            drop = true;
            break;
          default:
            reply = encode_error({"unexpected message type for trainer"});
            have_reply = true;
            break;
        }
      } catch (const WireError& e) {
        reply = encode_error({std::string(e.what())});
        have_reply = true;
        drop = true;
      }
    }
    if (msg.type == MsgType::HELLO && !drop) {
      Scenario sc;
      SnapshotMsg snap;
      bool with_snapshot;
      {
        std::lock_guard<std::mutex> lock(mu_);
        sc = opt_.scenario;
        sc.worker_id = static_cast<int>(peer->id);
        with_snapshot = snapshot_version_ > 0;
        if (with_snapshot) {
          snap.version = snapshot_version_;
          snap.params = snapshot_params_;
        }
      }
      send_to_peer(peer, encode_config({sc.to_text()}));
      if (with_snapshot) send_to_peer(peer, encode_snapshot(snap));
    }
    if (have_reply) send_to_peer(peer, reply);
    if (drop) break;
  }
  std::lock_guard<std::mutex> lock(mu_);
  peer->conn.close();
  peer->done = true;
  cv_.notify_all();
}

void TrainerService::publish_snapshot(uint64_t version,
                                      std::vector<uint8_t> params) {
  std::vector<Peer*> targets;
  SnapshotMsg snap;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (version <= snapshot_version_)
      throw WireError("snapshot versions must be strictly increasing");
    snapshot_version_ = version;
    snapshot_params_ = std::move(params);
    phase_steps_.clear();
    snap.version = snapshot_version_;
    snap.params = snapshot_params_;
    for (auto& p : peers_)
      if (!p->done && p->said_hello) targets.push_back(p.get());
  }
  WireMessage msg = encode_snapshot(snap);
  for (Peer* p : targets) send_to_peer(p, msg);
}

void TrainerService::rebroadcast_snapshot() {
  std::vector<Peer*> targets;
  SnapshotMsg snap;
  {
    std::lock_guard<std::mutex> lock(mu_);
    if (snapshot_version_ == 0) return;
    snap.version = snapshot_version_;
    snap.params = snapshot_params_;
    for (auto& p : peers_)
      if (!p->done && p->said_hello) targets.push_back(p.get());
  }
  WireMessage msg = encode_snapshot(snap);
  for (Peer* p : targets) send_to_peer(p, msg);
}

size_t TrainerService::drain_steps(rl::ReplayBuffer* buffer) {
  std::vector<TransitionsMsg> batch;
  {
    std::lock_guard<std::mutex> lock(mu_);
    batch.swap(step_queue_);
  }
  size_t steps = 0;
  for (auto& msg : batch)
    for (auto& rec : msg.records) {
      if (rec.end_of_episode) {
        buffer->end_episode(static_cast<int>(msg.worker_id),
                            std::move(rec.step.obs), rec.terminal);
      } else {
        buffer->push_step(static_cast<int>(msg.worker_id),
                          std::move(rec.step));
        ++steps;
      }
    }
  return steps;
}

std::vector<EvalResultMsg> TrainerService::take_eval_results() {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<EvalResultMsg> out;
  out.swap(eval_queue_);
  return out;
}

bool TrainerService::wait_for_steps(size_t per_worker, int collectors,
                                    double timeout_s) {
  std::unique_lock<std::mutex> lock(mu_);
  auto ready = [&] {
    int done = 0;
    for (const auto& [id, n] : phase_steps_)
      if (n >= per_worker) ++done;
    return done >= collectors;
  };
  return cv_.wait_for(lock, std::chrono::duration<double>(timeout_s), ready);
}

bool TrainerService::wait_for_eval_results(size_t n, double timeout_s) {
  std::unique_lock<std::mutex> lock(mu_);
  return cv_.wait_for(lock, std::chrono::duration<double>(timeout_s),
                      [&] { return eval_queue_.size() >= n; });
}

size_t TrainerService::total_step_records() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_steps_;
}

int TrainerService::worker_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  int n = 0;
  for (const auto& p : peers_)
    if (!p->done && p->said_hello) ++n;
  return n;
}

std::string TrainerService::debug_status() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::string s = "peers[";
  for (const auto& p : peers_) {
    double silent =
        std::chrono::duration<double>(Clock::now() - p->last_seen).count();
    s += " id=" + std::to_string(p->id) +
         (p->role == WorkerRole::collector ? "c" : "e") +
         (p->done ? " dead" : " live") +
         " silent=" + std::to_string(static_cast<int>(silent)) + "s";
  }
  s += " ] phase_steps[";
  for (const auto& [id, n] : phase_steps_)
    s += " " + std::to_string(id) + ":" + std::to_string(n);
  s += " ] version=" + std::to_string(snapshot_version_);
  return s;
}

int TrainerService::ever_connected() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(next_id_);
}

}  // namespace racer::net
