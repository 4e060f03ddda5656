#include "racer/net/orchestrator.hpp"

#include <chrono>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "racer/net/trainer_service.hpp"
#include "racer/net/worker.hpp"
#include "racer/nn/checkpoint.hpp"

namespace racer::net {

rl::TrainerConfig DistributedConfig::derived_trainer() const {
  rl::TrainerConfig t = trainer;
  t.actor_arch = scenario.actor_arch();
  t.global_dim = scenario.obs.global_length();
  return t;
}

TrainingResult run_distributed_training(
    const DistributedConfig& cfg, rl::QrSacTrainer* trainer,
    const std::function<void(int, const EpochRecord&)>& on_epoch) {
  if (cfg.collectors < 1)
    throw std::invalid_argument("run_distributed_training: need a collector");
  const rl::TrainerConfig& tc = trainer->config();
  rl::ReplayBuffer buffer(tc.replay_capacity, tc.nstep, tc.gamma);

  TrainerService service({0, cfg.scenario});
  service.start();

  std::vector<std::thread> threads;
  std::mutex err_mu;
  std::string worker_error;
  int workers = cfg.collectors + cfg.evaluators;
  for (int i = 0; i < workers; ++i) {
    WorkerOptions wo;
    wo.port = service.port();
    wo.role = i < cfg.collectors ? WorkerRole::collector
                                 : WorkerRole::evaluator;
    wo.mode = cfg.mode;
    wo.seed = cfg.seed * 1000 + 17 + static_cast<uint64_t>(i);
    wo.inference_delay_s = cfg.inference_delay_s;
    threads.emplace_back([wo, i, &err_mu, &worker_error] {
      try {
        worker_loop(wo);
      } catch (const std::exception& e) {
        // a worker dying (e.g. trainer torn down mid-phase) must never take
        // the process with it; keep the first message for diagnostics
        std::lock_guard<std::mutex> lk(err_mu);
        if (worker_error.empty())
          worker_error = "worker " + std::to_string(i) + ": " + e.what();
      }
    });
  }

  // If anything below throws, the service must come down and the worker
  // threads must be joined before the thread objects are destroyed.
  auto shutdown = [&] {
    service.stop();
    for (auto& t : threads)
      if (t.joinable()) t.join();
  };

  TrainingResult result;
  uint64_t version = 0;
  auto snapshot_blob = [&] {
    std::vector<nn::Param<float>*> params = trainer->actor_params();
    return nn::serialize_params(trainer->actor_hash(), params);
  };

  try {
    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
      service.publish_snapshot(++version, snapshot_blob());
      // if the phase stalls for half the timeout (a worker can miss the
      // broadcast under heavy load), re-send the snapshot before giving up
      bool done = service.wait_for_steps(cfg.scenario.steps_per_phase,
                                         cfg.collectors,
                                         cfg.phase_timeout_s * 0.5);
      if (!done) {
        service.rebroadcast_snapshot();
        done = service.wait_for_steps(cfg.scenario.steps_per_phase,
                                      cfg.collectors,
                                      cfg.phase_timeout_s * 0.5);
      }
      if (!done) {
        std::string why;
        {
          std::lock_guard<std::mutex> lk(err_mu);
          why = worker_error;
        }
        throw std::runtime_error(
            "distributed training: phase timed out" +
            (why.empty() ? std::string() : " (" + why + ")") + " " +
            service.debug_status());
      }
      result.total_steps += service.drain_steps(&buffer);
      EpochRecord rec;
      rec.metrics = trainer->train_epoch(buffer);
      rec.evals = service.take_eval_results();
      if (on_epoch) on_epoch(epoch, rec);
      result.epochs.push_back(std::move(rec));
    }

    // one last broadcast so evaluators score the final policy
    if (cfg.evaluators > 0) {
      service.publish_snapshot(++version, snapshot_blob());
      auto deadline = std::chrono::steady_clock::now() +
                      std::chrono::duration<double>(cfg.phase_timeout_s);
      while (static_cast<int>(result.final_evals.size()) < cfg.evaluators &&
             std::chrono::steady_clock::now() < deadline) {
        service.wait_for_eval_results(1, 0.05);
        for (const auto& ev : service.take_eval_results())
          if (ev.snapshot_version == version)
            result.final_evals.push_back(ev);
      }
    }
  } catch (...) {
    shutdown();
    throw;
  }

  shutdown();
  return result;
}

}  // namespace racer::net
