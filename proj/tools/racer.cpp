// Command-line entry point: training, evaluation, ablations, perturbation
// studies, saliency export and trajectory replay.
//
// Exit codes: 0 success; 2 bad arguments, spec or input file contents;
// 3 missing file or checkpoint; 4 inconsistent feature/ablation flags.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "racer/bench.hpp"
#include "racer/net/orchestrator.hpp"
#include "racer/nn/checkpoint.hpp"
#include "racer/saliency.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace racer;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadSpec = 2;
constexpr int kExitMissing = 3;
constexpr int kExitInconsistent = 4;

struct CliError {
  int code;
  std::string what;
};

bench::ExperimentSpec load_spec(const std::string& path) {
  if (!fs::exists(path)) throw CliError{kExitMissing, "spec not found: " + path};
  try {
    bench::ExperimentSpec spec = bench::ExperimentSpec::from_file(path);
    spec.scenario.validate();
    spec.trainer.validate();
    return spec;
  } catch (const std::exception& e) {
    throw CliError{kExitBadSpec, std::string("bad spec: ") + e.what()};
  }
}

nn::ActorNet<float> load_actor(const bench::ExperimentSpec& spec,
                               const std::string& checkpoint) {
  if (!fs::exists(checkpoint))
    throw CliError{kExitMissing, "checkpoint not found: " + checkpoint};
  nn::ActorNet<float> actor;
  nn::ActorArch arch = spec.scenario.actor_arch();
  actor.init(arch, 0);
  try {
    std::vector<nn::Param<float>*> params = actor.params();
    nn::load_checkpoint(checkpoint, nn::arch_hash(nn::describe(arch)), params);
  } catch (const std::exception& e) {
    throw CliError{kExitBadSpec,
                   std::string("checkpoint does not match spec: ") + e.what()};
  }
  return actor;
}

json stats_json(const bench::LapStats& s) { return json::parse(s.to_json()); }

// ---- train ---------------------------------------------------------------

int cmd_train(const std::string& spec_path, const std::string& out_dir,
              int seeds_override) {
  bench::ExperimentSpec spec = load_spec(spec_path);
  if (seeds_override > 0) spec.seeds = seeds_override;
  bench::write_manifest(out_dir, spec, "train", spec.base_seed);

  std::vector<std::vector<double>> plot_x, plot_y;
  for (int i = 0; i < spec.seeds; ++i) {
    uint64_t seed = spec.base_seed + static_cast<uint64_t>(i);
    std::string dir = out_dir + "/seed_" + std::to_string(seed);
    fs::create_directories(dir);
    std::ofstream metrics(dir + "/metrics.jsonl");

    net::DistributedConfig dc = spec.distributed(seed);
    rl::QrSacTrainer trainer(dc.derived_trainer());
    std::vector<double> ex, ey;
    auto on_epoch = [&](int epoch, const net::EpochRecord& rec) {
      json j;
      j["epoch"] = epoch;
      j["steps"] = rec.metrics.steps;
      j["critic_loss"] = rec.metrics.critic_loss;
      j["actor_loss"] = rec.metrics.actor_loss;
      j["max_critic_grad_norm"] = rec.metrics.max_critic_grad_norm;
      double progress = 0.0, completion = 0.0;
      for (const auto& ev : rec.evals) {
        progress += ev.mean_progress;
        completion += ev.completion_rate;
      }
      if (!rec.evals.empty()) {
        progress /= rec.evals.size();
        completion /= rec.evals.size();
      }
      j["eval_mean_progress_m"] = progress;
      j["eval_completion_rate"] = completion;
      metrics << j.dump() << "\n";
      metrics.flush();
      ex.push_back(epoch);
      ey.push_back(progress);
      std::printf("seed %llu epoch %d: critic %.4f actor %.4f progress %.1f\n",
                  static_cast<unsigned long long>(seed), epoch,
                  rec.metrics.critic_loss, rec.metrics.actor_loss, progress);
    };
    net::TrainingResult res = net::run_distributed_training(dc, &trainer,
                                                            on_epoch);

    std::vector<nn::Param<float>*> actor_params = trainer.actor_params();
    nn::save_checkpoint(dir + "/actor.rnet", trainer.actor_hash(),
                        actor_params);
    std::vector<nn::Param<float>*> all = trainer.all_params();
    nn::save_checkpoint(dir + "/full.rnet", trainer.full_hash(), all);

    Track track = spec.scenario.make_track();
    bench::LapStats final_eval =
        bench::evaluate_actor(spec.scenario, track, trainer.actor(),
                              spec.eval_episodes,
                              spec.scenario.eval_spawn_seed);
    std::ofstream(dir + "/lapstats.json") << final_eval.to_json() << "\n";
    std::printf("seed %llu done: %zu epochs, %zu steps, completion %.2f\n",
                static_cast<unsigned long long>(seed), res.epochs.size(),
                res.total_steps, final_eval.completion_rate());
    plot_x.push_back(std::move(ex));
    plot_y.push_back(std::move(ey));
  }
  bench::plot_series(out_dir + "/progress_per_epoch.png", plot_x, plot_y);
  return kExitOk;
}

// ---- evaluate ------------------------------------------------------------

int cmd_evaluate(const std::string& spec_path, const std::string& checkpoint,
                 const std::string& out_dir, int episodes) {
  bench::ExperimentSpec spec = load_spec(spec_path);
  if (episodes < 0) episodes = spec.eval_episodes;
  nn::ActorNet<float> actor = load_actor(spec, checkpoint);
  Track track = spec.scenario.make_track();
  bench::write_manifest(out_dir, spec, "evaluate", spec.scenario.eval_spawn_seed);

  bench::LapStats stats = bench::evaluate_actor(
      spec.scenario, track, actor, episodes, spec.scenario.eval_spawn_seed);
  std::ofstream(out_dir + "/lapstats.json") << stats.to_json() << "\n";
  std::printf("%s\n", stats.to_json().c_str());
  if (episodes == 0) return kExitOk;

  net::EpisodeResult ep =
      net::run_episode(spec.scenario, track, actor, net::StepMode::sync, 0.0,
                       spec.scenario.eval_spawn_seed, nullptr);
  bench::Trajectory traj = bench::Trajectory::from_episode(spec.scenario,
                                                           track, ep);
  traj.save_csv(out_dir + "/trajectory.csv");

  // gap to the scripted reference lap (a stand-in baseline, not human data)
  bench::Trajectory ref = bench::reference_trajectory(spec.scenario, track);
  ref.save_csv(out_dir + "/reference.csv");
  bench::GapSeries gap = bench::compare_trajectories(traj, ref);
  std::ofstream gf(out_dir + "/gap_vs_reference.csv");
  gf << "s,gap_s\n";
  for (size_t i = 0; i < gap.s.size(); ++i)
    gf << gap.s[i] << ',' << gap.gap[i] << "\n";
  bench::plot_series(out_dir + "/gap_vs_reference.png", {gap.s}, {gap.gap});
  return kExitOk;
}

// ---- ablate --------------------------------------------------------------

int cmd_ablate(const std::string& spec_path, const std::string& out_dir,
               int seeds_override) {
  bench::ExperimentSpec spec = load_spec(spec_path);
  int seeds = seeds_override > 0 ? seeds_override : spec.seeds;
  std::vector<bench::AblationCondition> grid = bench::standard_ablations();
  // every condition must be satisfiable before any training starts
  for (const auto& cond : grid) {
    bench::ExperimentSpec probe = spec;
    cond.apply(&probe.scenario, &probe.trainer);
    try {
      probe.scenario.validate();
      probe.trainer.validate();
    } catch (const std::exception& e) {
      throw CliError{kExitInconsistent, "condition '" + cond.name +
                                            "' conflicts with the base spec: " +
                                            e.what()};
    }
  }
  bench::write_manifest(out_dir, spec, "ablate", spec.base_seed);

  std::vector<bench::AblationRow> rows =
      bench::run_ablation_grid(spec, grid, seeds);
  std::ofstream csv(out_dir + "/ablation.csv");
  csv << "condition,seed,epochs,final_critic_loss,episodes,completed,"
         "completion_rate,median_lap,best_lap,mean_progress_m\n";
  json all = json::array();
  for (const auto& r : rows) {
    csv << r.condition << ',' << r.seed << ',' << r.epochs << ','
        << r.final_critic_loss << ',' << r.eval.episodes << ','
        << r.eval.completed_episodes << ',' << r.eval.completion_rate() << ','
        << r.eval.median() << ',' << r.eval.best() << ','
        << r.eval.mean_progress_m << "\n";
    json j;
    j["condition"] = r.condition;
    j["seed"] = r.seed;
    j["epochs"] = r.epochs;
    j["final_critic_loss"] = r.final_critic_loss;
    j["eval"] = stats_json(r.eval);
    all.push_back(j);
  }
  std::ofstream(out_dir + "/ablation.json") << all.dump(2) << "\n";
  std::printf("ablation grid: %zu rows (%zu conditions x %d seeds)\n",
              rows.size(), grid.size(), seeds);
  return kExitOk;
}

// ---- perturb -------------------------------------------------------------

int cmd_perturb(const std::string& spec_path, const std::string& checkpoint,
                const std::string& out_dir, int episodes) {
  bench::ExperimentSpec spec = load_spec(spec_path);
  if (spec.scenario.obs.no_image)
    throw CliError{kExitInconsistent,
                   "perturb sweeps pixel and saliency noise; the spec "
                   "disables images (no_image)"};
  if (episodes < 0) episodes = spec.eval_episodes;
  nn::ActorNet<float> actor = load_actor(spec, checkpoint);
  Track track = spec.scenario.make_track();
  bench::write_manifest(out_dir, spec, "perturb", spec.scenario.eval_spawn_seed);

  struct Row {
    std::string name;
    bench::PerturbSpec p;
  };
  std::vector<Row> grid;
  grid.push_back({"clean", {}});
  for (double lvl : {0.02, 0.04, 0.06}) {
    bench::PerturbSpec p;
    p.proprio_level = lvl;
    grid.push_back({"proprio_" + std::to_string(static_cast<int>(lvl * 100)) +
                        "pct",
                    p});
  }
  for (double f : {0.05, 0.10, 0.20}) {
    bench::PerturbSpec p;
    p.pixel_fraction = f;
    grid.push_back({"pixel_" + std::to_string(static_cast<int>(f * 100)) +
                        "pct",
                    p});
  }
  {
    bench::PerturbSpec p;
    p.ggc_mask = true;
    grid.push_back({"ggc_masked", p});
    bench::PerturbSpec q;
    q.match_ggc_count = true;
    grid.push_back({"random_count_matched", q});
  }

  std::ofstream csv(out_dir + "/perturb.csv");
  csv << "condition,episodes,completed,completion_rate,median_lap,"
         "mean_progress_m\n";
  json all = json::array();
  std::vector<double> bar_x, bar_y;
  for (size_t i = 0; i < grid.size(); ++i) {
    const Row& row = grid[i];
    bench::PerturbSpec p = row.p;
    p.noise_seed = spec.base_seed;
    bench::LapStats s = bench::evaluate_actor(
        spec.scenario, track, actor, episodes, spec.scenario.eval_spawn_seed,
        bench::make_perturb_hook(p, actor));
    csv << row.name << ',' << s.episodes << ',' << s.completed_episodes << ','
        << s.completion_rate() << ',' << s.median() << ','
        << s.mean_progress_m << "\n";
    json j;
    j["condition"] = row.name;
    j["stats"] = stats_json(s);
    all.push_back(j);
    bar_x.push_back(static_cast<double>(i));
    bar_y.push_back(s.mean_progress_m);
    std::printf("%-24s progress %.1f m, completion %.2f\n", row.name.c_str(),
                s.mean_progress_m, s.completion_rate());
  }
  std::ofstream(out_dir + "/perturb.json") << all.dump(2) << "\n";
  bench::plot_series(out_dir + "/perturb_progress.png", {bar_x}, {bar_y});
  return kExitOk;
}

// ---- saliency ------------------------------------------------------------

int cmd_saliency(const std::string& spec_path, const std::string& checkpoint,
                 const std::string& out_dir, int stride, int max_frames,
                 double top_q) {
  bench::ExperimentSpec spec = load_spec(spec_path);
  if (spec.scenario.obs.no_image)
    throw CliError{kExitInconsistent,
                   "saliency is undefined for a no_image agent"};
  nn::ActorNet<float> actor = load_actor(spec, checkpoint);
  Track track = spec.scenario.make_track();
  bench::write_manifest(out_dir, spec, "saliency",
                        spec.scenario.eval_spawn_seed);

  std::vector<ImageObs> frames;
  std::vector<std::vector<float>> proprios;
  net::ObsHook capture = [&](LocalObs* local, GlobalObs*) {
    if (!local->has_image) return;
    frames.push_back(local->image);
    proprios.emplace_back(local->proprio.values.begin(),
                          local->proprio.values.end());
  };
  net::run_episode(spec.scenario, track, actor, net::StepMode::sync, 0.0,
                   spec.scenario.eval_spawn_seed, nullptr, -1, capture);

  std::ofstream csv(out_dir + "/saliency.csv");
  csv << "frame,raw_max,mask_count\n";
  int written = 0;
  for (size_t i = 0; i < frames.size() && written < max_frames; i += stride) {
    SaliencyMap map =
        guided_grad_cam(actor, frames[i], proprios[i], 0, top_q);
    char name[64];
    std::snprintf(name, sizeof(name), "/frame_%05zu.png", i);
    saliency_overlay_png(out_dir + name, frames[i], map);
    csv << i << ',' << map.raw_max << ',' << map.mask_count << "\n";
    ++written;
  }
  std::printf("wrote %d saliency overlays from %zu frames\n", written,
              frames.size());
  return kExitOk;
}

// ---- replay --------------------------------------------------------------

int cmd_replay(const std::string& traj_path, const std::string& out_dir,
               int stride, const std::string& mode_name) {
  if (!fs::exists(traj_path))
    throw CliError{kExitMissing, "trajectory not found: " + traj_path};
  bench::Trajectory traj;
  try {
    traj = bench::Trajectory::load_csv(traj_path);
  } catch (const std::exception& e) {
    throw CliError{kExitBadSpec, std::string("bad trajectory: ") + e.what()};
  }
  net::Scenario sc;
  sc.track_name = traj.track_name;
  Track track;
  try {
    track = sc.make_track();
  } catch (const std::exception& e) {
    throw CliError{kExitBadSpec,
                   "trajectory references unknown track '" + traj.track_name +
                       "': " + e.what()};
  }
  ImageMode mode;
  if (mode_name == "color64")
    mode = ImageMode::color64;
  else if (mode_name == "gray64")
    mode = ImageMode::gray64;
  else if (mode_name == "color32")
    mode = ImageMode::color32;
  else
    throw CliError{kExitBadSpec, "unknown image mode: " + mode_name};

  fs::create_directories(out_dir);
  int written = 0;
  for (size_t i = 0; i < traj.rows.size(); i += stride) {
    const auto& r = traj.rows[i];
    VehicleState state;
    state.position = {r.x, r.y};
    state.heading = r.heading;
    state.v[0] = r.speed;
    ImageObs img = render(track, state, mode);
    char name[64];
    std::snprintf(name, sizeof(name), "/frame_%05zu.png", i);
    write_png(out_dir + name, img);
    ++written;
  }
  std::printf("rendered %d frames to %s/\n", written, out_dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale vision-based racing agent: training and analysis"};
  app.require_subcommand(1);

  std::string spec_path, out_dir = "run", checkpoint, traj_path;
  std::string mode_name = "color64";
  int seeds_override = -1, episodes = -1, stride = 10, max_frames = 50;
  double top_q = 0.05;

  CLI::App* train = app.add_subcommand("train", "train across seeds");
  train->add_option("--spec", spec_path, "experiment spec file")->required();
  train->add_option("--out", out_dir, "output run directory");
  train->add_option("--seeds", seeds_override, "override seed count");

  CLI::App* eval = app.add_subcommand("evaluate", "deterministic-policy laps");
  eval->add_option("--spec", spec_path)->required();
  eval->add_option("--checkpoint", checkpoint, "actor checkpoint")->required();
  eval->add_option("--out", out_dir);
  eval->add_option("--episodes", episodes, "evaluation episodes");

  CLI::App* ablate = app.add_subcommand("ablate", "7-condition ablation grid");
  ablate->add_option("--spec", spec_path)->required();
  ablate->add_option("--out", out_dir);
  ablate->add_option("--seeds", seeds_override);

  CLI::App* perturb =
      app.add_subcommand("perturb", "observation-noise sweeps");
  perturb->add_option("--spec", spec_path)->required();
  perturb->add_option("--checkpoint", checkpoint)->required();
  perturb->add_option("--out", out_dir);
  perturb->add_option("--episodes", episodes);

  CLI::App* sal = app.add_subcommand("saliency", "export overlay frames");
  sal->add_option("--spec", spec_path)->required();
  sal->add_option("--checkpoint", checkpoint)->required();
  sal->add_option("--out", out_dir);
  sal->add_option("--stride", stride, "frame stride");
  sal->add_option("--max-frames", max_frames);
  sal->add_option("--top-q", top_q, "mask fraction");

  CLI::App* replay = app.add_subcommand("replay", "re-render a trajectory");
  replay->add_option("--traj", traj_path, "trajectory CSV")->required();
  replay->add_option("--out", out_dir);
  replay->add_option("--stride", stride);
  replay->add_option("--mode", mode_name, "color64|gray64|color32");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadSpec;
  }

  try {
    if (train->parsed()) return cmd_train(spec_path, out_dir, seeds_override);
    if (eval->parsed())
      return cmd_evaluate(spec_path, checkpoint, out_dir, episodes);
    if (ablate->parsed()) return cmd_ablate(spec_path, out_dir, seeds_override);
    if (perturb->parsed())
      return cmd_perturb(spec_path, checkpoint, out_dir, episodes);
    if (sal->parsed())
      return cmd_saliency(spec_path, checkpoint, out_dir, stride, max_frames,
                          top_q);
    if (replay->parsed())
      return cmd_replay(traj_path, out_dir, stride, mode_name);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.what.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitBadSpec;
  }
  return kExitOk;
}
