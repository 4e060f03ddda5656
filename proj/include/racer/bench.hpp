#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "racer/net/orchestrator.hpp"
#include "racer/net/scenario.hpp"
#include "racer/net/worker.hpp"
#include "racer/nn/net.hpp"
#include "racer/rl/qrsac.hpp"
#include "racer/track.hpp"

namespace racer::bench {

/// Full description of one experiment: scenario, trainer knobs and run
/// shape. Serializes to the same key = value text as spec files; the FNV
/// hash of the canonical text is stamped into every output.
struct ExperimentSpec {
  net::Scenario scenario;
  rl::TrainerConfig trainer;
  int seeds = 5;
  uint64_t base_seed = 1;
  int collectors = 4;
  int evaluators = 1;
  net::StepMode mode = net::StepMode::sync;
  double inference_delay_s = 0.0;
  int eval_episodes = 5;  // per-seed evaluation episodes for `evaluate`

  static ExperimentSpec from_text(const std::string& text);
  static ExperimentSpec from_file(const std::string& path);
  std::string to_text() const;
  uint64_t hash() const;

  net::DistributedConfig distributed(uint64_t seed) const;
};

struct LapStats {
  int episodes = 0;
  int completed_episodes = 0;  // episodes with at least one full lap
  std::vector<double> lap_times;
  double mean_progress_m = 0.0;

  double completion_rate() const;
  double best() const;           // 0 when no laps
  double median() const;         // 0 when no laps
  double percentile(double q) const;
  std::string to_json() const;
};

/// Deterministic-policy evaluation over `episodes` episodes (fixed spawn
/// sequence); optional observation hook injects noise.
LapStats evaluate_actor(const net::Scenario& sc, const Track& track,
                        nn::ActorNet<float>& actor, int episodes,
                        uint64_t spawn_seed, const net::ObsHook& hook = {});

/// Observation-noise settings for perturbation studies.
struct PerturbSpec {
  double proprio_level = 0.0;   // multiplicative, e.g. 0.04 = 4%
  double pixel_fraction = 0.0;  // blacked-out fraction of pixels
  bool ggc_mask = false;        // restrict pixel noise to the saliency mask
  double ggc_top_q = 0.05;
  bool match_ggc_count = false; // random noise, but GGC-mask pixel counts
  uint64_t noise_seed = 0;
};

/// Builds the observation hook implementing `p` against `actor` (the GGC
/// modes compute a steering-saliency mask per frame). Throws when a GGC
/// mode is requested for an actor without a conv stack.
net::ObsHook make_perturb_hook(const PerturbSpec& p,
                               nn::ActorNet<float>& actor);

// ---- trajectories --------------------------------------------------------

/// Time-stamped path of one episode, tagged with its track for comparison.
struct Trajectory {
  std::string track_name;
  double track_length = 0.0;
  std::vector<net::EpisodeResult::TraceRow> rows;

  static Trajectory from_episode(const net::Scenario& sc, const Track& track,
                                 const net::EpisodeResult& ep);
  static Trajectory load_csv(const std::string& path);
  void save_csv(const std::string& path) const;

  /// Cumulative (unwrapped, monotone) arc length per row.
  std::vector<double> cumulative_s() const;
};

struct GapSeries {
  std::vector<double> s;    // cumulative arc length, meters
  std::vector<double> gap;  // time_b(s) - time_a(s), seconds
};

/// Resamples both trajectories by cumulative arc length and reports the
/// time gap of b relative to a over their common distance range.
/// Rejects trajectories from different tracks.
GapSeries compare_trajectories(const Trajectory& a, const Trajectory& b,
                               double ds = 1.0);

/// Scripted pure-pursuit reference lap (curvature-limited speed profile).
/// A committed stand-in baseline; NOT human driving data.
Trajectory reference_trajectory(const net::Scenario& sc, const Track& track,
                                double duration_s = 120.0);

// ---- ablation harness ----------------------------------------------------

struct AblationCondition {
  std::string name;
  // edits applied on top of the base experiment
  void (*apply)(net::Scenario*, rl::TrainerConfig*);
};

/// The published comparison set: symmetric, no-accel, no-velocity,
/// grayscale, small-image, horizon-2s, horizon-4s.
std::vector<AblationCondition> standard_ablations();

struct AblationRow {
  std::string condition;
  uint64_t seed = 0;
  int epochs = 0;
  double final_critic_loss = 0.0;
  LapStats eval;
};

/// Trains every condition x seed and evaluates the final policy. One row
/// per pair, in grid order; a failing condition aborts (no silent skips).
std::vector<AblationRow> run_ablation_grid(
    const ExperimentSpec& base, const std::vector<AblationCondition>& grid,
    int seeds);

// ---- output artifacts ----------------------------------------------------

/// Minimal line chart (white background, axes, one polyline per series).
void plot_series(const std::string& path,
                 const std::vector<std::vector<double>>& xs,
                 const std::vector<std::vector<double>>& ys, int width = 640,
                 int height = 400);

/// Creates `dir` (parents included) and writes manifest.txt with the spec
/// text, its hash, the command line and the seed.
void write_manifest(const std::string& dir, const ExperimentSpec& spec,
                    const std::string& command, uint64_t seed);

}  // namespace racer::bench
