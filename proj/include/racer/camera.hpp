#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "racer/dynamics.hpp"
#include "racer/track.hpp"

namespace racer {

enum class ImageMode { color64, gray64, color32, masked_mirror };

/// Row-major H x W x C image with values in [0, 1].
struct ImageObs {
  int height = 0;
  int width = 0;
  int channels = 0;
  ImageMode mode = ImageMode::color64;
  std::vector<float> pixels;

  float& at(int r, int c, int ch) {
    return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
  }
  float at(int r, int c, int ch) const {
    return pixels[(static_cast<size_t>(r) * width + c) * channels + ch];
  }
  size_t size() const { return pixels.size(); }
};

/// Flat-shaded palette; every pair of colors differs by >= 0.2 in some
/// channel so class boundaries survive 8-bit quantization.
struct Palette {
  float sky[3] = {0.30f, 0.55f, 0.95f};
  float ground[3] = {0.10f, 0.55f, 0.10f};
  float road[3] = {0.35f, 0.35f, 0.40f};
  float curb[3] = {0.90f, 0.15f, 0.15f};
  float wall[3] = {0.75f, 0.75f, 0.70f};
  float skyline[3] = {0.05f, 0.25f, 0.05f};
};

struct CameraConfig {
  double fov_deg = 90.0;       // horizontal field of view
  double height = 1.1;         // eye height above the road, meters
  double nose_offset = 2.2;    // camera sits at the car nose
  double far_clip = 500.0;     // meters
  double wall_height = 1.5;    // meters
  double curb_width = 0.8;     // boundary band width, meters
  int mirror_rows = 12;        // rear-view strip height at 64 px
  double skyline_radius = 300.0;  // distant background cylinder
  Palette palette;

  // Skyline silhouette height (meters) as a function of world azimuth.
  // Even cosine series: mirror-symmetric about the world x axis while still
  // varying with position, so it provides localization cues.
  double skyline_height(double psi) const;
};

/// Rasterizes the first-person view: sky, skyline band, walls, road, curbs
/// and off-track ground, with a rear-view-mirror strip across the top rows.
ImageObs render(const Track& track, const VehicleState& state,
                ImageMode mode = ImageMode::color64,
                const CameraConfig& cfg = {});

/// Blacks out floor(fraction * H * W) pixels chosen uniformly without
/// replacement; when `mask` (pixel indices, r * W + c) is given, candidates
/// are restricted to the mask.
ImageObs perturb_pixels(const ImageObs& img, double fraction,
                        const std::vector<int>* mask, uint64_t rng_seed);

/// Luma conversion with weights 0.299 / 0.587 / 0.114.
ImageObs to_grayscale(const ImageObs& img);

/// Debug dump; 8-bit RGB (or grayscale) PNG.
void write_png(const std::string& path, const ImageObs& img);

}  // namespace racer
