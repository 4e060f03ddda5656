#include "racer/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "racer/camera.hpp"
#include "racer/dynamics.hpp"
#include "racer/nn/checkpoint.hpp"
#include "racer/observation.hpp"
#include "racer/saliency.hpp"

namespace racer::bench {

using nlohmann::json;

// ---- ExperimentSpec ------------------------------------------------------

ExperimentSpec ExperimentSpec::from_text(const std::string& text) {
  ExperimentSpec spec;
  spec.scenario = net::Scenario::from_text(text);
  net::KeyValues kv = net::parse_key_values(text);

  rl::TrainerConfig& t = spec.trainer;
  t.batch = static_cast<int>(kv.get_num("train_batch", t.batch));
  t.lr = kv.get_num("lr", t.lr);
  t.alpha = kv.get_num("alpha", t.alpha);
  t.quantiles = static_cast<int>(kv.get_num("quantiles", t.quantiles));
  t.gamma = kv.get_num("gamma", t.gamma);
  t.nstep = static_cast<int>(kv.get_num("nstep", t.nstep));
  t.steps_per_epoch =
      static_cast<int>(kv.get_num("steps_per_epoch", t.steps_per_epoch));
  t.epochs = static_cast<int>(kv.get_num("epochs", t.epochs));
  t.tau = kv.get_num("tau", t.tau);
  t.critic_clip_norm = kv.get_num("critic_clip_norm", t.critic_clip_norm);
  t.kappa = kv.get_num("kappa", t.kappa);
  t.symmetric = kv.get_num("symmetric", t.symmetric ? 1 : 0) != 0;
  t.replay_capacity = static_cast<size_t>(
      kv.get_num("replay_capacity", static_cast<double>(t.replay_capacity)));
  t.critic_width = static_cast<int>(kv.get_num("critic_width", t.critic_width));
  t.critic_depth = static_cast<int>(kv.get_num("critic_depth", t.critic_depth));

  spec.seeds = static_cast<int>(kv.get_num("seeds", spec.seeds));
  spec.base_seed =
      static_cast<uint64_t>(kv.get_num("base_seed", spec.base_seed));
  spec.collectors = static_cast<int>(kv.get_num("collectors", spec.collectors));
  spec.evaluators = static_cast<int>(kv.get_num("evaluators", spec.evaluators));
  std::string mode = kv.get("mode", "sync");
  if (mode == "sync")
    spec.mode = net::StepMode::sync;
  else if (mode == "async")
    spec.mode = net::StepMode::async;
  else
    throw net::WireError("mode must be sync or async, got " + mode);
  spec.inference_delay_s =
      kv.get_num("inference_delay_s", spec.inference_delay_s);
  spec.eval_episodes =
      static_cast<int>(kv.get_num("eval_laps", spec.eval_episodes));
  return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open spec file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

std::string ExperimentSpec::to_text() const {
  std::ostringstream os;
  os << scenario.to_text();
  os << "train_batch = " << trainer.batch << "\n";
  os << "lr = " << trainer.lr << "\n";
  os << "alpha = " << trainer.alpha << "\n";
  os << "quantiles = " << trainer.quantiles << "\n";
  os << "gamma = " << trainer.gamma << "\n";
  os << "nstep = " << trainer.nstep << "\n";
  os << "steps_per_epoch = " << trainer.steps_per_epoch << "\n";
  os << "epochs = " << trainer.epochs << "\n";
  os << "tau = " << trainer.tau << "\n";
  os << "critic_clip_norm = " << trainer.critic_clip_norm << "\n";
  os << "kappa = " << trainer.kappa << "\n";
  os << "symmetric = " << (trainer.symmetric ? 1 : 0) << "\n";
  os << "replay_capacity = " << trainer.replay_capacity << "\n";
  os << "critic_width = " << trainer.critic_width << "\n";
  os << "critic_depth = " << trainer.critic_depth << "\n";
  os << "seeds = " << seeds << "\n";
  os << "base_seed = " << base_seed << "\n";
  os << "collectors = " << collectors << "\n";
  os << "evaluators = " << evaluators << "\n";
  os << "mode = " << (mode == net::StepMode::sync ? "sync" : "async") << "\n";
  os << "inference_delay_s = " << inference_delay_s << "\n";
  os << "eval_laps = " << eval_episodes << "\n";
  return os.str();
}

uint64_t ExperimentSpec::hash() const { return nn::arch_hash(to_text()); }

net::DistributedConfig ExperimentSpec::distributed(uint64_t seed) const {
  net::DistributedConfig dc;
  dc.scenario = scenario;
  dc.trainer = trainer;
  dc.trainer.seed = seed;
  dc.collectors = collectors;
  dc.evaluators = evaluators;
  dc.mode = mode;
  dc.inference_delay_s = inference_delay_s;
  dc.seed = seed;
  return dc;
}

// ---- LapStats ------------------------------------------------------------

double LapStats::completion_rate() const {
  return episodes > 0 ? static_cast<double>(completed_episodes) / episodes
                      : 0.0;
}

double LapStats::best() const {
  return lap_times.empty()
             ? 0.0
             : *std::min_element(lap_times.begin(), lap_times.end());
}

double LapStats::percentile(double q) const {
  if (lap_times.empty()) return 0.0;
  std::vector<double> sorted = lap_times;
  std::sort(sorted.begin(), sorted.end());
  double pos = q * (sorted.size() - 1);
  size_t lo = static_cast<size_t>(std::floor(pos));
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double LapStats::median() const { return percentile(0.5); }

std::string LapStats::to_json() const {
  json j;
  j["episodes"] = episodes;
  j["completed_episodes"] = completed_episodes;
  j["completion_rate"] = completion_rate();
  j["lap_times"] = lap_times;
  j["mean_progress_m"] = mean_progress_m;
  j["best_lap"] = best();
  j["median_lap"] = median();
  j["p10_lap"] = percentile(0.10);
  j["p90_lap"] = percentile(0.90);
  return j.dump(2);
}

LapStats evaluate_actor(const net::Scenario& sc, const Track& track,
                        nn::ActorNet<float>& actor, int episodes,
                        uint64_t spawn_seed, const net::ObsHook& hook) {
  LapStats stats;
  stats.episodes = episodes;
  double progress = 0.0;
  for (int e = 0; e < episodes; ++e) {
    net::EpisodeResult ep = net::run_episode(
        sc, track, actor, net::StepMode::sync, 0.0,
        spawn_seed + static_cast<uint64_t>(e), nullptr, -1, hook);
    progress += ep.progress_m;
    if (!ep.lap_times.empty()) ++stats.completed_episodes;
    stats.lap_times.insert(stats.lap_times.end(), ep.lap_times.begin(),
                           ep.lap_times.end());
  }
  if (episodes > 0) stats.mean_progress_m = progress / episodes;
  return stats;
}

net::ObsHook make_perturb_hook(const PerturbSpec& p,
                               nn::ActorNet<float>& actor) {
  bool wants_ggc = p.ggc_mask || p.match_ggc_count;
  if (wants_ggc && (!actor.arch.use_image || actor.convs.empty()))
    throw std::invalid_argument(
        "saliency undefined: GGC noise needs an actor with a conv stack");
  auto rng = std::make_shared<Rng>(p.noise_seed);
  nn::ActorNet<float>* actor_ptr = &actor;
  PerturbSpec spec = p;
  return [spec, rng, actor_ptr](LocalObs* local, GlobalObs*) {
    if (spec.proprio_level > 0.0)
      local->proprio =
          perturb_proprio(local->proprio, spec.proprio_level,
                          rng->next_u64());
    if (!local->has_image) return;
    ImageObs& img = local->image;
    if (spec.ggc_mask || spec.match_ggc_count) {
      std::vector<float> prop(local->proprio.values.begin(),
                              local->proprio.values.end());
      SaliencyMap map =
          guided_grad_cam(*actor_ptr, img, prop, 0, spec.ggc_top_q);
      std::vector<int> mask = map.mask_indices();
      if (spec.ggc_mask) {
        img = perturb_pixels(img, 1.0, &mask, rng->next_u64());
      } else {
        // same pixel budget, unrestricted placement
        double f = (static_cast<double>(mask.size()) + 0.5) /
                   (static_cast<double>(img.height) * img.width);
        img = perturb_pixels(img, f, nullptr, rng->next_u64());
      }
    } else if (spec.pixel_fraction > 0.0) {
      img = perturb_pixels(img, spec.pixel_fraction, nullptr,
                           rng->next_u64());
    }
  };
}

// ---- trajectories --------------------------------------------------------

Trajectory Trajectory::from_episode(const net::Scenario& sc,
                                    const Track& track,
                                    const net::EpisodeResult& ep) {
  Trajectory tr;
  tr.track_name = sc.track_name;
  tr.track_length = track.total_length();
  tr.rows = ep.trace;
  return tr;
}

void Trajectory::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  out << "# racer trajectory\n";
  out << "# track = " << track_name << "\n";
  out << "# track_length = ";
  out.precision(17);
  out << track_length << "\n";
  out << "t,x,y,heading,s,speed\n";
  for (const auto& r : rows)
    out << r.t << ',' << r.x << ',' << r.y << ',' << r.heading << ',' << r.s
        << ',' << r.speed << "\n";
}

Trajectory Trajectory::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory: " + path);
  Trajectory tr;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      size_t eq = line.find('=');
      if (eq != std::string::npos) {
        std::string key = line.substr(1, eq - 1);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string s) {
          size_t a = s.find_first_not_of(" \t\r");
          size_t b = s.find_last_not_of(" \t\r");
          return a == std::string::npos ? std::string()
                                        : s.substr(a, b - a + 1);
        };
        if (strip(key) == "track") tr.track_name = strip(value);
        if (strip(key) == "track_length")
          tr.track_length = std::stod(strip(value));
      }
      continue;
    }
    if (line.rfind("t,", 0) == 0) continue;  // column header
    net::EpisodeResult::TraceRow r;
    std::istringstream is(line);
    char comma;
    if (!(is >> r.t >> comma >> r.x >> comma >> r.y >> comma >> r.heading >>
          comma >> r.s >> comma >> r.speed))
      throw std::runtime_error("bad trajectory row: " + line);
    tr.rows.push_back(r);
  }
  if (tr.rows.empty())
    throw std::runtime_error("empty trajectory file: " + path);
  return tr;
}

std::vector<double> Trajectory::cumulative_s() const {
  std::vector<double> cum(rows.size(), 0.0);
  double L = track_length;
  for (size_t i = 1; i < rows.size(); ++i) {
    double d = rows[i].s - rows[i - 1].s;
    if (L > 0) {
      while (d <= -L / 2) d += L;
      while (d > L / 2) d -= L;
    }
    cum[i] = cum[i - 1] + d;
  }
  return cum;
}

namespace {

/// First time at which the (monotone-ized) distance series reaches `target`.
double time_at_distance(const std::vector<double>& cum,
                        const std::vector<net::EpisodeResult::TraceRow>& rows,
                        double target) {
  for (size_t i = 1; i < cum.size(); ++i) {
    if (cum[i] >= target) {
      double span = cum[i] - cum[i - 1];
      double frac = span > 1e-12 ? (target - cum[i - 1]) / span : 1.0;
      return rows[i - 1].t + frac * (rows[i].t - rows[i - 1].t);
    }
  }
  return rows.back().t;
}

}  // namespace

GapSeries compare_trajectories(const Trajectory& a, const Trajectory& b,
                               double ds) {
  if (a.track_name != b.track_name ||
      std::abs(a.track_length - b.track_length) > 1e-6)
    throw std::invalid_argument(
        "compare_trajectories: trajectories are from different tracks");
  if (a.rows.size() < 2 || b.rows.size() < 2)
    throw std::invalid_argument("compare_trajectories: trajectory too short");
  std::vector<double> ca = a.cumulative_s();
  std::vector<double> cb = b.cumulative_s();
  double range = std::min(ca.back(), cb.back());

  GapSeries out;
  for (double s = 0.0; s <= range; s += ds) {
    out.s.push_back(s);
    // negative gap: a reaches this distance earlier than b
    out.gap.push_back(time_at_distance(ca, a.rows, s) -
                      time_at_distance(cb, b.rows, s));
  }
  return out;
}

Trajectory reference_trajectory(const net::Scenario& sc, const Track& track,
                                double duration_s) {
  CarParams car;
  SimConfig sim;
  sim.episode_length = duration_s;

  VehicleState state;
  Vec3 start = track.center_at(0.0);
  state.position = {start.x, start.y};
  state.heading = track.heading_at(0.0);
  state.v[0] = 15.0;  // flying start

  Trajectory tr;
  tr.track_name = sc.track_name;
  tr.track_length = track.total_length();
  tr.rows.push_back({0.0, state.position.x, state.position.y, state.heading,
                     0.0, state.speed()});

  int steps = static_cast<int>(duration_s / sim.control_period);
  for (int k = 0; k < steps && !state.aborted; ++k) {
    TrackProjection proj = track.project(state.position);
    double look = std::clamp(4.0 + 0.6 * state.speed(), 6.0, 25.0);
    Vec3 target = track.center_at(track.wrap_s(proj.s + look));
    double dx = target.x - state.position.x;
    double dy = target.y - state.position.y;
    double alpha = std::atan2(dy, dx) - state.heading;
    while (alpha > M_PI) alpha -= 2 * M_PI;
    while (alpha < -M_PI) alpha += 2 * M_PI;
    double dist = std::max(std::hypot(dx, dy), 1e-6);
    double want_steer = std::atan2(2.0 * car.wheelbase * std::sin(alpha), dist);

    // curvature-limited speed profile a few lookaheads out
    double h0 = track.heading_at(track.wrap_s(proj.s + look));
    double h1 = track.heading_at(track.wrap_s(proj.s + 2.0 * look));
    double dh = std::abs(std::remainder(h1 - h0, 2 * M_PI));
    double kappa = std::max(dh / look, 1e-4);
    double v_corner = std::sqrt(0.85 * car.grip / kappa);
    double v_target = std::min({v_corner, 0.95 * car.top_speed});

    Action act;
    act.delta_steer = want_steer - state.steering_angle;
    act.throttle_brake = std::clamp((v_target - state.speed()) / 3.0, -1.0, 1.0);
    StepInfo info = control_step(state, act, track, car, sim);
    tr.rows.push_back({(k + 1) * sim.control_period, state.position.x,
                       state.position.y, state.heading, info.proj_after.s,
                       state.speed()});
  }
  return tr;
}

// ---- ablation harness ----------------------------------------------------

std::vector<AblationCondition> standard_ablations() {
  return {
      {"symmetric",
       [](net::Scenario*, rl::TrainerConfig* t) { t->symmetric = true; }},
      {"no_acceleration",
       [](net::Scenario* s, rl::TrainerConfig*) {
         s->obs.no_acceleration = true;
       }},
      {"no_velocity",
       [](net::Scenario* s, rl::TrainerConfig*) { s->obs.no_velocity = true; }},
      {"grayscale",
       [](net::Scenario* s, rl::TrainerConfig*) {
         s->obs.image_mode = ImageMode::gray64;
       }},
      {"small_image",
       [](net::Scenario* s, rl::TrainerConfig*) {
         s->obs.image_mode = ImageMode::color32;
       }},
      {"horizon_2s",
       [](net::Scenario* s, rl::TrainerConfig*) {
         s->obs.course_horizon_s = 2.0;
       }},
      {"horizon_4s",
       [](net::Scenario* s, rl::TrainerConfig*) {
         s->obs.course_horizon_s = 4.0;
       }},
  };
}

std::vector<AblationRow> run_ablation_grid(
    const ExperimentSpec& base, const std::vector<AblationCondition>& grid,
    int seeds) {
  std::vector<AblationRow> rows;
  for (const auto& cond : grid) {
    for (int i = 0; i < seeds; ++i) {
      ExperimentSpec spec = base;
      cond.apply(&spec.scenario, &spec.trainer);
      spec.scenario.validate();
      uint64_t seed = spec.base_seed + static_cast<uint64_t>(i);

      net::DistributedConfig dc = spec.distributed(seed);
      rl::QrSacTrainer trainer(dc.derived_trainer());
      net::TrainingResult res = net::run_distributed_training(dc, &trainer);

      AblationRow row;
      row.condition = cond.name;
      row.seed = seed;
      row.epochs = static_cast<int>(res.epochs.size());
      if (!res.epochs.empty())
        row.final_critic_loss = res.epochs.back().metrics.critic_loss;
      Track track = spec.scenario.make_track();
      row.eval = evaluate_actor(spec.scenario, track, trainer.actor(),
                                spec.eval_episodes,
                                spec.scenario.eval_spawn_seed);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---- output artifacts ----------------------------------------------------

namespace {

void draw_line(ImageObs& img, double x0, double y0, double x1, double y1,
               const float rgb[3]) {
  int n = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
  for (int i = 0; i <= n; ++i) {
    double f = static_cast<double>(i) / n;
    int x = static_cast<int>(std::lround(x0 + f * (x1 - x0)));
    int y = static_cast<int>(std::lround(y0 + f * (y1 - y0)));
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
    for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[c];
  }
}

}  // namespace

void plot_series(const std::string& path,
                 const std::vector<std::vector<double>>& xs,
                 const std::vector<std::vector<double>>& ys, int width,
                 int height) {
  if (xs.size() != ys.size())
    throw std::invalid_argument("plot_series: xs/ys series count mismatch");
  ImageObs img;
  img.height = height;
  img.width = width;
  img.channels = 3;
  img.pixels.assign(static_cast<size_t>(height) * width * 3, 1.0f);

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (size_t k = 0; k < xs.size(); ++k) {
    if (xs[k].size() != ys[k].size())
      throw std::invalid_argument("plot_series: series length mismatch");
    for (size_t i = 0; i < xs[k].size(); ++i) {
      xmin = std::min(xmin, xs[k][i]);
      xmax = std::max(xmax, xs[k][i]);
      ymin = std::min(ymin, ys[k][i]);
      ymax = std::max(ymax, ys[k][i]);
    }
  }
  if (xmin > xmax) xmin = 0, xmax = 1;
  if (ymin > ymax) ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmax = xmin + 1;
  if (ymax - ymin < 1e-12) ymax = ymin + 1;

  const int margin = 40;
  auto px = [&](double x) {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  };
  auto py = [&](double y) {
    return height - margin -
           (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  };

  const float black[3] = {0.f, 0.f, 0.f};
  draw_line(img, margin, height - margin, width - margin, height - margin,
            black);
  draw_line(img, margin, margin, margin, height - margin, black);

  const float colors[6][3] = {{0.85f, 0.1f, 0.1f}, {0.1f, 0.3f, 0.85f},
                              {0.1f, 0.6f, 0.2f},  {0.8f, 0.5f, 0.1f},
                              {0.5f, 0.1f, 0.7f},  {0.1f, 0.6f, 0.6f}};
  for (size_t k = 0; k < xs.size(); ++k) {
    const float* c = colors[k % 6];
    for (size_t i = 1; i < xs[k].size(); ++i)
      draw_line(img, px(xs[k][i - 1]), py(ys[k][i - 1]), px(xs[k][i]),
                py(ys[k][i]), c);
  }
  write_png(path, img);
}

void write_manifest(const std::string& dir, const ExperimentSpec& spec,
                    const std::string& command, uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << "command = " << command << "\n";
  out << "seed = " << seed << "\n";
  out << "spec_hash = " << spec.hash() << "\n";
  out << "# ---- spec ----\n";
  out << spec.to_text();
}

}  // namespace racer::bench
