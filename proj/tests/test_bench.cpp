#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "racer/bench.hpp"
#include "racer/net/worker.hpp"

using namespace racer;
using namespace racer::bench;

namespace {

ExperimentSpec micro_spec(bool with_image) {
  ExperimentSpec spec;
  net::Scenario& sc = spec.scenario;
  sc.track_name = "oval";
  sc.episode_s = 2.0;
  sc.steps_per_phase = 30;
  sc.eval_episodes = 0;
  sc.obs.no_image = !with_image;
  if (with_image) sc.obs.image_mode = ImageMode::color32;
  sc.conv_channels = {2, 2};
  sc.embed = 8;
  sc.trunk_width = 8;
  sc.trunk_depth = 1;

  rl::TrainerConfig& t = spec.trainer;
  t.batch = 8;
  t.lr = 1e-3;
  t.quantiles = 4;
  t.nstep = 3;
  t.gamma = 0.95;
  t.steps_per_epoch = 4;
  t.epochs = 1;
  t.replay_capacity = 5000;
  t.critic_width = 16;
  t.critic_depth = 1;

  spec.seeds = 2;
  spec.collectors = 1;
  spec.evaluators = 0;
  spec.eval_episodes = 1;
  return spec;
}

/// Constant-speed synthetic lap trajectory, 10 Hz rows.
Trajectory uniform_lap(double speed, double duration, double t_offset,
                       double length = 100.0) {
  Trajectory tr;
  tr.track_name = "oval";
  tr.track_length = length;
  int n = static_cast<int>(duration * 10);
  for (int k = 0; k <= n; ++k) {
    double t = k * 0.1;
    net::EpisodeResult::TraceRow r;
    r.t = t + t_offset;
    r.s = std::fmod(speed * t, length);
    r.x = r.s;  // geometry is irrelevant to the gap computation
    r.speed = speed;
    tr.rows.push_back(r);
  }
  return tr;
}

}  // namespace

TEST_CASE("experiment spec text round-trips and hashes stably") {
  ExperimentSpec spec = micro_spec(false);
  std::string text = spec.to_text();
  ExperimentSpec back = ExperimentSpec::from_text(text);
  CHECK(back.to_text() == text);
  CHECK(back.hash() == spec.hash());
  CHECK(back.trainer.quantiles == 4);
  CHECK(back.trainer.nstep == 3);
  CHECK(back.seeds == 2);
  CHECK(back.scenario.steps_per_phase == 30);

  ExperimentSpec other = spec;
  other.trainer.lr = 5e-4;
  CHECK(other.hash() != spec.hash());

  CHECK_THROWS(ExperimentSpec::from_text("mode = carrier-pigeon\n"));
}

TEST_CASE("lap statistics on hand data") {
  LapStats s;
  s.episodes = 4;
  s.completed_episodes = 3;
  s.lap_times = {60.0, 62.0, 58.0, 64.0};
  CHECK(s.completion_rate() == 0.75);
  CHECK(s.best() == 58.0);
  CHECK(s.median() == 61.0);  // sorted midpoint of {58, 60, 62, 64}
  CHECK(s.percentile(0.0) == 58.0);
  CHECK(s.percentile(1.0) == 64.0);
  CHECK(s.to_json().find("\"median_lap\"") != std::string::npos);

  LapStats empty;
  CHECK(empty.completion_rate() == 0.0);
  CHECK(empty.best() == 0.0);
  CHECK(empty.median() == 0.0);
}

TEST_CASE("cumulative arc length unwraps across the lap boundary") {
  Trajectory tr;
  tr.track_name = "oval";
  tr.track_length = 100.0;
  for (double s : {95.0, 99.0, 3.0, 7.0}) {
    net::EpisodeResult::TraceRow r;
    r.s = s;
    tr.rows.push_back(r);
  }
  std::vector<double> cum = tr.cumulative_s();
  REQUIRE(cum.size() == 4);
  CHECK(cum[0] == 0.0);
  CHECK(cum[1] == doctest::Approx(4.0));
  CHECK(cum[2] == doctest::Approx(8.0));
  CHECK(cum[3] == doctest::Approx(12.0));
}

TEST_CASE("trajectory comparison: identity, uniform delay, dominance") {
  Trajectory a = uniform_lap(10.0, 30.0, 0.0);

  GapSeries self = compare_trajectories(a, a);
  REQUIRE(!self.gap.empty());
  for (double g : self.gap) CHECK(g == 0.0);

  // b is the same drive shifted 1 s later: constant gap of one second
  Trajectory b = uniform_lap(10.0, 30.0, 1.0);
  GapSeries delayed = compare_trajectories(a, b);
  for (double g : delayed.gap) CHECK(std::abs(-g - 1.0) <= 1.0 / 60.0);

  // a faster everywhere: its arrival-time lead can only grow with distance
  Trajectory slow = uniform_lap(8.0, 30.0, 0.0);
  GapSeries gap = compare_trajectories(a, slow);
  for (size_t i = 1; i < gap.gap.size(); ++i)
    CHECK(gap.gap[i] <= gap.gap[i - 1] + 1e-12);

  Trajectory foreign = uniform_lap(10.0, 30.0, 0.0);
  foreign.track_name = "chicane";
  CHECK_THROWS_AS(compare_trajectories(a, foreign), std::invalid_argument);
}

TEST_CASE("trajectory CSV round-trips") {
  Trajectory a = uniform_lap(10.0, 5.0, 0.0);
  std::string path = "traj_roundtrip.csv";
  a.save_csv(path);
  Trajectory back = Trajectory::load_csv(path);
  REQUIRE(back.rows.size() == a.rows.size());
  CHECK(back.track_name == a.track_name);
  CHECK(back.track_length == doctest::Approx(a.track_length));
  for (size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(back.rows[i].t == doctest::Approx(a.rows[i].t));
    CHECK(back.rows[i].s == doctest::Approx(a.rows[i].s));
  }
  std::remove(path.c_str());
  CHECK_THROWS(Trajectory::load_csv("does_not_exist.csv"));
}

TEST_CASE("scripted reference controller drives the oval") {
  net::Scenario sc;
  sc.track_name = "oval";
  Track track = sc.make_track();
  Trajectory ref = reference_trajectory(sc, track, 60.0);
  REQUIRE(ref.rows.size() > 100);
  std::vector<double> cum = ref.cumulative_s();
  CHECK(cum.back() > track.total_length());  // at least one full lap
  GapSeries self = compare_trajectories(ref, ref);
  for (double g : self.gap) CHECK(g == 0.0);
}

TEST_CASE("zero-noise perturbation hook is the identity") {
  ExperimentSpec spec = micro_spec(false);
  spec.scenario.episode_s = 10.0;
  Track track = spec.scenario.make_track();
  nn::ActorNet<float> actor;
  actor.init(spec.scenario.actor_arch(), 3);

  LapStats clean =
      evaluate_actor(spec.scenario, track, actor, 2, 50);
  PerturbSpec none;
  LapStats hooked = evaluate_actor(spec.scenario, track, actor, 2, 50,
                                   make_perturb_hook(none, actor));
  CHECK(clean.mean_progress_m == hooked.mean_progress_m);
  CHECK(clean.lap_times == hooked.lap_times);
}

TEST_CASE("proprio noise changes the rollout") {
  ExperimentSpec spec = micro_spec(false);
  spec.scenario.episode_s = 10.0;
  Track track = spec.scenario.make_track();
  nn::ActorNet<float> actor;
  actor.init(spec.scenario.actor_arch(), 3);

  LapStats clean = evaluate_actor(spec.scenario, track, actor, 1, 50);
  PerturbSpec noisy;
  noisy.proprio_level = 0.06;
  noisy.noise_seed = 9;
  LapStats perturbed = evaluate_actor(spec.scenario, track, actor, 1, 50,
                                      make_perturb_hook(noisy, actor));
  CHECK(clean.mean_progress_m != perturbed.mean_progress_m);
}

TEST_CASE("GGC noise hooks run on conv actors and reject no-image actors") {
  ExperimentSpec spec = micro_spec(true);
  spec.scenario.episode_s = 1.0;
  Track track = spec.scenario.make_track();
  nn::ActorNet<float> actor;
  actor.init(spec.scenario.actor_arch(), 3);

  PerturbSpec masked;
  masked.ggc_mask = true;
  masked.ggc_top_q = 0.05;
  LapStats a = evaluate_actor(spec.scenario, track, actor, 1, 50,
                              make_perturb_hook(masked, actor));
  CHECK(a.episodes == 1);

  PerturbSpec matched;
  matched.match_ggc_count = true;
  LapStats b = evaluate_actor(spec.scenario, track, actor, 1, 50,
                              make_perturb_hook(matched, actor));
  CHECK(b.episodes == 1);

  nn::ActorNet<float> blind;
  net::Scenario no_img = spec.scenario;
  no_img.obs.no_image = true;
  no_img.obs.image_mode = ImageMode::color64;
  blind.init(no_img.actor_arch(), 3);
  CHECK_THROWS(make_perturb_hook(masked, blind));
}

TEST_CASE("ablation grid emits one row per condition per seed") {
  ExperimentSpec base = micro_spec(true);
  std::vector<AblationCondition> grid = standard_ablations();
  REQUIRE(grid.size() == 7);
  std::vector<AblationRow> rows = run_ablation_grid(base, grid, 2);
  REQUIRE(rows.size() == 14);

  std::set<std::string> names;
  for (const auto& r : rows) {
    names.insert(r.condition);
    CHECK(r.epochs == 1);
    CHECK(r.eval.episodes == 1);
  }
  CHECK(names == std::set<std::string>{"symmetric", "no_acceleration",
                                       "no_velocity", "grayscale",
                                       "small_image", "horizon_2s",
                                       "horizon_4s"});
  // grid order: conditions outer, seeds inner
  CHECK(rows[0].condition == "symmetric");
  CHECK(rows[0].seed == base.base_seed);
  CHECK(rows[1].condition == "symmetric");
  CHECK(rows[1].seed == base.base_seed + 1);
  CHECK(rows[13].condition == "horizon_4s");
}

TEST_CASE("plot and manifest artifacts are written") {
  std::vector<std::vector<double>> xs = {{0, 1, 2, 3}, {0, 1, 2, 3}};
  std::vector<std::vector<double>> ys = {{0, 1, 0, 1}, {1, 1, 2, 3}};
  plot_series("plot_test.png", xs, ys);
  std::ifstream png("plot_test.png", std::ios::binary);
  REQUIRE(png.good());
  unsigned char sig[8];
  png.read(reinterpret_cast<char*>(sig), 8);
  CHECK(sig[0] == 0x89);
  CHECK(sig[1] == 'P');
  png.close();
  std::remove("plot_test.png");

  ExperimentSpec spec = micro_spec(false);
  write_manifest("manifest_test_dir", spec, "train", 7);
  std::ifstream mf("manifest_test_dir/manifest.txt");
  REQUIRE(mf.good());
  std::stringstream ss;
  ss << mf.rdbuf();
  CHECK(ss.str().find("spec_hash = ") != std::string::npos);
  CHECK(ss.str().find("track = oval") != std::string::npos);
  mf.close();
  std::filesystem::remove_all("manifest_test_dir");
}
