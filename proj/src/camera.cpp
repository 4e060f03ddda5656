#include "racer/camera.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "racer/rng.hpp"

namespace racer {

double CameraConfig::skyline_height(double psi) const {
  return 20.0 + 8.0 * std::cos(3.0 * psi) + 5.0 * std::cos(7.0 * psi) +
         3.0 * std::cos(13.0 * psi);
}

namespace {

struct ColumnHits {
  std::vector<double> wall_t;  // sorted horizontal wall distances
  double skyline_t = 0.0;      // horizontal distance to the background cylinder
  double skyline_h = 0.0;      // silhouette height at the hit azimuth
};

// Horizontal ray (o + t*d, t > 0) against all wall segments and the
// background cylinder. d is unit length.
ColumnHits trace_column(const Track& track, const CameraConfig& cfg,
                        const Vec2& o, const Vec2& d) {
  ColumnHits hits;
  for (const auto& wall : track.walls()) {
    for (size_t i = 0; i + 1 < wall.size(); ++i) {
      Vec2 a = wall[i], b = wall[i + 1];
      Vec2 ab = b - a;
      double denom = d.cross(ab);
      if (std::abs(denom) < 1e-12) continue;
      Vec2 ao = a - o;
      double t = ao.cross(ab) / denom;
      double u = ao.cross(d) / denom;
      if (t > 1e-9 && u >= 0.0 && u <= 1.0) hits.wall_t.push_back(t);
    }
  }
  std::sort(hits.wall_t.begin(), hits.wall_t.end());

  // |o + t d| = R, camera always well inside the cylinder
  double R = cfg.skyline_radius;
  double b = o.dot(d);
  double c = o.dot(o) - R * R;
  double disc = b * b - c;
  hits.skyline_t = disc > 0.0 ? -b + std::sqrt(disc) : R;
  Vec2 hit = o + d * hits.skyline_t;
  hits.skyline_h = cfg.skyline_height(std::atan2(hit.y, hit.x));
  return hits;
}

void shade(float* px, const float rgb[3]) {
  px[0] = rgb[0];
  px[1] = rgb[1];
  px[2] = rgb[2];
}

// Renders rows [row0, row0 + rows) of `img` as a pinhole view from `origin`
// looking along `yaw`. tan_v maps the local ndc_y of the viewport to vertical
// slope; `flip` mirrors columns (rear-view mirror).
void render_view(const Track& track, const CameraConfig& cfg, const Vec2& origin,
                 double yaw, int row0, int rows, double tan_v, bool flip,
                 ImageObs& img) {
  const Palette& pal = cfg.palette;
  double tan_h = std::tan(cfg.fov_deg * M_PI / 180.0 / 2.0);
  int W = img.width;

  for (int c = 0; c < W; ++c) {
    double ndc_x = (c + 0.5) / W * 2.0 - 1.0;
    double cam_y = -ndc_x * tan_h;  // camera frame: x forward, y left
    double az = std::atan2(cam_y, 1.0);
    Vec2 d{std::cos(yaw + az), std::sin(yaw + az)};
    ColumnHits hits = trace_column(track, cfg, origin, d);
    double hm = std::sqrt(1.0 + cam_y * cam_y);
    int out_c = flip ? W - 1 - c : c;

    for (int r = 0; r < rows; ++r) {
      double ndc_y = (r + 0.5) / rows * 2.0 - 1.0;
      double slope = -ndc_y * tan_v / hm;  // dz per horizontal meter
      float* px = &img.at(row0 + r, out_c, 0);

      double t_ground = slope < 0.0 ? cfg.height / -slope : cfg.far_clip * 2.0;
      bool drawn = false;
      for (double tw : hits.wall_t) {
        if (tw >= t_ground || tw > cfg.far_clip) break;
        if (cfg.height + slope * tw <= cfg.wall_height) {
          shade(px, pal.wall);
          drawn = true;
          break;
        }
      }
      if (drawn) continue;

      if (t_ground <= cfg.far_clip) {
        Vec2 p = origin + d * t_ground;
        TrackProjection proj = track.project(p);
        double half_w = track.width_at(proj.s) / 2.0;
        double lat = std::abs(proj.lateral_offset);
        if (lat <= half_w - cfg.curb_width)
          shade(px, pal.road);
        else if (lat <= half_w)
          shade(px, pal.curb);
        else
          shade(px, pal.ground);
        continue;
      }

      double h_at_sky = cfg.height + slope * hits.skyline_t;
      if (h_at_sky <= hits.skyline_h)
        shade(px, pal.skyline);
      else
        shade(px, pal.sky);
    }
  }
}

}  // namespace

ImageObs render(const Track& track, const VehicleState& state, ImageMode mode,
                const CameraConfig& cfg) {
  int H = mode == ImageMode::color32 ? 32 : 64;
  ImageObs img;
  img.height = H;
  img.width = H;
  img.channels = 3;
  img.mode = mode;
  img.pixels.assign(static_cast<size_t>(H) * H * 3, 0.0f);

  Vec2 fwd{std::cos(state.heading), std::sin(state.heading)};
  Vec2 eye = state.position + fwd * cfg.nose_offset;
  double tan_v = std::tan(cfg.fov_deg * M_PI / 180.0 / 2.0);  // square frame

  render_view(track, cfg, eye, state.heading, 0, H, tan_v, false, img);

  int mrows = cfg.mirror_rows * H / 64;
  if (mode == ImageMode::masked_mirror) {
    std::fill(img.pixels.begin(),
              img.pixels.begin() + static_cast<size_t>(mrows) * H * 3, 0.0f);
  } else if (mrows > 0) {
    // rear view across the top strip, horizontally flipped like a mirror
    double tan_vm = tan_v * mrows / H;
    render_view(track, cfg, eye, wrap_angle(state.heading + M_PI), 0, mrows,
                tan_vm, true, img);
  }

  if (mode == ImageMode::gray64) return to_grayscale(img);
  return img;
}

ImageObs to_grayscale(const ImageObs& img) {
  if (img.channels != 3)
    throw std::invalid_argument("to_grayscale: expected a 3-channel image");
  ImageObs out;
  out.height = img.height;
  out.width = img.width;
  out.channels = 1;
  out.mode = ImageMode::gray64;
  out.pixels.resize(static_cast<size_t>(img.height) * img.width);
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    const float* p = &img.pixels[i * 3];
    out.pixels[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

ImageObs perturb_pixels(const ImageObs& img, double fraction,
                        const std::vector<int>* mask, uint64_t rng_seed) {
  if (fraction < 0.0 || fraction > 1.0)
    throw std::invalid_argument("perturb_pixels: fraction outside [0, 1]");
  ImageObs out = img;
  size_t total = static_cast<size_t>(img.height) * img.width;
  size_t n = static_cast<size_t>(fraction * total);

  std::vector<int> candidates;
  if (mask) {
    candidates = *mask;
  } else {
    candidates.resize(total);
    for (size_t i = 0; i < total; ++i) candidates[i] = static_cast<int>(i);
  }
  n = std::min(n, candidates.size());

  Rng rng(rng_seed);
  for (size_t i = 0; i < n; ++i) {  // partial Fisher-Yates
    size_t j = i + rng.uniform_index(candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
    float* px = &out.pixels[static_cast<size_t>(candidates[i]) * img.channels];
    for (int ch = 0; ch < img.channels; ++ch) px[ch] = 0.0f;
  }
  return out;
}

}  // namespace racer
