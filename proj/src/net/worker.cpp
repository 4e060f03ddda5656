#include "racer/net/worker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <thread>

#include "racer/net/socket.hpp"
#include "racer/nn/checkpoint.hpp"
#include "racer/nn/policy.hpp"
#include "racer/observation.hpp"
#include "racer/reward.hpp"

namespace racer::net {

namespace {

uint8_t quantize(float v) {
  float x = std::clamp(v, 0.f, 1.f) * 255.f;
  return static_cast<uint8_t>(std::lround(x));
}

}  // namespace

rl::StoredObs pack_obs(const LocalObs& local, const GlobalObs& global) {
  rl::StoredObs o;
  o.proprio.reserve(local.proprio.values.size());
  for (double v : local.proprio.values)
    o.proprio.push_back(static_cast<float>(v));
  o.global_obs.reserve(global.course_points.size());
  for (double v : global.course_points)
    o.global_obs.push_back(static_cast<float>(v));
  if (local.has_image) {
    const ImageObs& img = local.image;
    o.image.resize(static_cast<size_t>(img.channels) * img.height * img.width);
    size_t i = 0;
    for (int ch = 0; ch < img.channels; ++ch)
      for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
          o.image[i++] = quantize(img.at(r, c, ch));
  }
  return o;
}

void actor_forward_head(nn::ActorNet<float>& actor, const rl::StoredObs& obs,
                        double out[4]) {
  nn::Tape<float> tape;
  int img = -1;
  if (actor.arch.use_image) {
    int C = actor.arch.image_c, HW = actor.arch.image_hw;
    nn::Tensor<float> t({1, C, HW, HW});
    if (static_cast<int>(obs.image.size()) != C * HW * HW)
      throw std::runtime_error("actor_forward_head: image dims mismatch");
    for (size_t i = 0; i < obs.image.size(); ++i) t[i] = obs.image[i] / 255.0f;
    img = tape.input(std::move(t), false);
  }
  nn::Tensor<float> prop({1, static_cast<int>(obs.proprio.size())});
  for (size_t i = 0; i < obs.proprio.size(); ++i) prop[i] = obs.proprio[i];
  int head = actor.forward(tape, img, tape.input(std::move(prop), false),
                           nullptr);
  for (int k = 0; k < 4; ++k) out[k] = tape.value(head)[k];
}

EpisodeResult run_episode(const Scenario& sc, const Track& track,
                          nn::ActorNet<float>& actor, StepMode mode,
                          double inference_delay_s, uint64_t spawn_seed,
                          Rng* policy_rng, int max_steps,
                          const ObsHook& obs_hook) {
  EpisodeResult ep;
  CarParams car;
  SimConfig sim;
  sim.episode_length = sc.episode_s;

  VehicleState state = spawn(track, spawn_seed);
  std::vector<ProgressSample> samples;
  samples.push_back({0.0, track.project(state.position)});
  auto trace_row = [&](double t, const TrackProjection& proj) {
    ep.trace.push_back({t, state.position.x, state.position.y, state.heading,
                        proj.s, state.speed()});
  };
  trace_row(0.0, samples.back().proj);

  // async staleness model: actions become applicable once their modeled
  // inference latency has elapsed on the 10 Hz control clock
  std::deque<std::pair<double, std::array<float, 2>>> in_flight;
  std::array<float, 2> current{0.f, 0.f};
  Rng dummy;  // deterministic path ignores it

  int k = 0;
  while (!episode_done(state, sc.episode_s) &&
         (max_steps < 0 || k < max_steps)) {
    double t = k * sim.control_period;
    LocalObs local;
    GlobalObs global;
    make_observation(state, track, sc.obs, &local, &global);
    if (obs_hook) obs_hook(&local, &global);
    rl::StoredObs obs = pack_obs(local, global);

    double head[4];
    actor_forward_head(actor, obs, head);
    nn::PolicySample s = nn::sample_action(
        head, policy_rng ? *policy_rng : dummy, policy_rng == nullptr);
    std::array<float, 2> computed{static_cast<float>(s.action[0]),
                                  static_cast<float>(s.action[1])};

    std::array<float, 2> applied;
    if (mode == StepMode::sync) {
      applied = computed;  // lock-step: the sim waited for this action
    } else {
      while (!in_flight.empty() && in_flight.front().first <= t) {
        current = in_flight.front().second;
        in_flight.pop_front();
      }
      applied = current;
      in_flight.push_back({t + inference_delay_s, computed});
    }
    ep.computed.push_back(computed);
    ep.applied.push_back(applied);

    Action a;
    a.delta_steer = applied[0];
    a.throttle_brake = applied[1];
    StepInfo info = control_step(state, a, track, car, sim);
    float reward = static_cast<float>(compute_reward(info).total);

    rl::Step step;
    step.obs = std::move(obs);
    step.action[0] = applied[0];
    step.action[1] = applied[1];
    step.reward = reward;
    ep.steps.push_back(std::move(step));
    samples.push_back({(k + 1) * sim.control_period, info.proj_after});
    trace_row((k + 1) * sim.control_period, info.proj_after);
    ep.progress_m += info.progress;
    ++k;
  }

  LocalObs local;
  GlobalObs global;
  make_observation(state, track, sc.obs, &local, &global);
  ep.final_obs = pack_obs(local, global);
  ep.terminal = state.aborted;
  ep.lap_times = lap_times(track, samples);
  ep.duration_s = k * sim.control_period;
  return ep;
}

namespace {

using Clock = std::chrono::steady_clock;

TcpConn connect_with_backoff(const WorkerOptions& opt) {
  int delay_ms = 25;
  for (int attempt = 0;; ++attempt) {
    try {
      return TcpConn::connect(opt.host, opt.port);
    } catch (const WireError&) {
      if (attempt + 1 >= opt.connect_retries) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      delay_ms = std::min(delay_ms * 2, 2000);
    }
  }
}

void send_hello(TcpConn& conn, const WorkerOptions& opt) {
  HelloMsg hello;
  hello.role = opt.role;
  hello.mode = opt.mode;
  hello.seed = opt.seed;
  conn.send_msg(encode_hello(hello));
}

struct WorkerState {
  Scenario scenario;
  Track track;
  nn::ActorNet<float> actor;
  uint64_t actor_hash = 0;
  bool configured = false;
  uint64_t last_version = 0;
  Rng rng;
  uint64_t steps_sent = 0;
};

// Long phases must not look like a dead peer to the trainer: heartbeat from
// inside the episode loop whenever half a heartbeat interval has elapsed.
ObsHook make_keepalive(TcpConn& conn, const Scenario& sc,
                       Clock::time_point* last_hb) {
  return [&conn, &sc, last_hb](LocalObs*, GlobalObs*) {
    auto now = Clock::now();
    if (std::chrono::duration<double>(now - *last_hb).count() >=
        sc.heartbeat_s * 0.5) {
      conn.send_msg(encode_heartbeat());
      *last_hb = now;
    }
  };
}

void run_collector_phase(TcpConn& conn, WorkerState& ws,
                         const WorkerOptions& opt) {
  const Scenario& sc = ws.scenario;
  auto last_hb = Clock::now();
  ObsHook keepalive = make_keepalive(conn, sc, &last_hb);
  TransitionsMsg msg;
  msg.worker_id = static_cast<uint32_t>(sc.worker_id);
  int sent = 0;
  auto flush = [&]() {
    if (msg.records.empty()) return;
    conn.send_msg(encode_transitions(msg));
    msg.records.clear();
  };
  while (sent < sc.steps_per_phase) {
    int remaining = sc.steps_per_phase - sent;
    EpisodeResult ep =
        run_episode(sc, ws.track, ws.actor, opt.mode, opt.inference_delay_s,
                    ws.rng.next_u64(), &ws.rng, remaining, keepalive);
    for (auto& step : ep.steps) {
      TransitionsMsg::Record rec;
      rec.step = std::move(step);
      msg.records.push_back(std::move(rec));
      ++sent;
      if (static_cast<int>(msg.records.size()) >= sc.batch &&
          sent < sc.steps_per_phase)
        flush();
    }
    TransitionsMsg::Record end;
    end.end_of_episode = true;
    end.terminal = ep.terminal;
    end.step.obs = std::move(ep.final_obs);
    msg.records.push_back(std::move(end));
  }
  // the phase's last step and its episode marker always travel together so
  // the trainer never times a drain between them
  flush();
  ws.steps_sent += static_cast<uint64_t>(sent);
}

void run_evaluator_phase(TcpConn& conn, WorkerState& ws) {
  const Scenario& sc = ws.scenario;
  auto last_hb = Clock::now();
  ObsHook keepalive = make_keepalive(conn, sc, &last_hb);
  EvalResultMsg res;
  res.worker_id = static_cast<uint32_t>(sc.worker_id);
  res.snapshot_version = ws.last_version;
  res.episodes = static_cast<uint32_t>(sc.eval_episodes);
  int completed = 0;
  double progress = 0.0;
  for (int e = 0; e < sc.eval_episodes; ++e) {
    EpisodeResult ep =
        run_episode(sc, ws.track, ws.actor, StepMode::sync, 0.0,
                    sc.eval_spawn_seed + static_cast<uint64_t>(e), nullptr,
                    -1, keepalive);
    progress += ep.progress_m;
    if (!ep.lap_times.empty()) ++completed;
    res.lap_times.insert(res.lap_times.end(), ep.lap_times.begin(),
                         ep.lap_times.end());
  }
  if (sc.eval_episodes > 0) {
    res.mean_progress = progress / sc.eval_episodes;
    res.completion_rate = static_cast<double>(completed) / sc.eval_episodes;
  }
  conn.send_msg(encode_eval_result(res));
}

}  // namespace

void worker_loop(const WorkerOptions& opt) {
  TcpConn conn = connect_with_backoff(opt);
  send_hello(conn, opt);

  WorkerState ws;
  ws.rng = Rng(opt.seed);
  int phases = 0;
  int rerequests = 0;
  auto last_hb = Clock::now();

  auto finish = [&]() {
    if (opt.steps_sent) *opt.steps_sent = ws.steps_sent;
  };

  for (;;) {
    if (opt.max_phases >= 0 && phases >= opt.max_phases) {
      finish();
      return;
    }
    double hb_s = ws.configured ? ws.scenario.heartbeat_s : 1.0;
    int slice_ms = std::clamp(static_cast<int>(hb_s * 250), 10, 1000);
    WireMessage msg;
    RecvStatus st = conn.recv_msg(&msg, slice_ms);
    if (st == RecvStatus::timeout) {
      auto now = Clock::now();
      if (std::chrono::duration<double>(now - last_hb).count() >= hb_s) {
        conn.send_msg(encode_heartbeat());
        last_hb = now;
      }
      continue;
    }
    if (st == RecvStatus::closed) {
      // trainer went away: bounded reconnect, then give up
      try {
        conn = connect_with_backoff(opt);
        send_hello(conn, opt);
        continue;
      } catch (const WireError&) {
        finish();
        return;
      }
    }

    switch (msg.type) {
      case MsgType::CONFIG: {
        ws.scenario = Scenario::from_text(decode_config(msg).text);
        ws.track = ws.scenario.make_track();
        nn::ActorArch arch = ws.scenario.actor_arch();
        ws.actor.init(arch, opt.seed);
        ws.actor_hash = nn::arch_hash(nn::describe(arch));
        ws.configured = true;
        break;
      }
      case MsgType::SNAPSHOT: {
        if (!ws.configured) break;  // snapshot before config: wait for it
        SnapshotMsg snap = decode_snapshot(msg);
        if (snap.version < ws.last_version) break;  // stale, keep current
        try {
          std::vector<nn::Param<float>*> params = ws.actor.params();
          nn::deserialize_params(snap.params, ws.actor_hash, params);
        } catch (const std::exception&) {
          if (++rerequests > 3) throw;
          send_hello(conn, opt);  // re-request the snapshot
          break;
        }
        ws.last_version = snap.version;
        if (opt.observed_versions)
          opt.observed_versions->push_back(snap.version);
        try {
          if (opt.role == WorkerRole::collector)
            run_collector_phase(conn, ws, opt);
          else
            run_evaluator_phase(conn, ws);
        } catch (const WireError&) {
          // the trainer dropped this connection mid-phase (e.g. it judged us
          // dead under load); reconnect and serve the next snapshot instead
          // of dying — the phase's partial output is simply lost
          try {
            conn = connect_with_backoff(opt);
            send_hello(conn, opt);
          } catch (const WireError&) {
            finish();
            return;
          }
        }
        ++phases;
        last_hb = Clock::now();
        break;
      }
      case MsgType::HEARTBEAT:
      case MsgType::ERROR:
        break;
      case MsgType::SHUTDOWN:
        finish();
        return;
      default:
        conn.send_msg(encode_error({"unexpected message type for worker"}));
        break;
    }
  }
}

}  // namespace racer::net
