#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <set>
#include <vector>

#include "racer/camera.hpp"
#include "racer/track.hpp"

using namespace racer;

namespace {

Track test_oval() { return Track::oval(100.0, 38.2, 12.0, 3.0); }

// Circular ring track centered at the origin; with the car at the origin the
// whole scene (track, walls, skyline) is mirror-symmetric about the car axis.
Track ring_track() {
  const int n = 256;
  std::vector<Vec3> center, left, right;
  std::vector<Vec2> wall_in, wall_out;
  for (int i = 0; i <= n; ++i) {
    double a = 2.0 * M_PI * i / n;
    double ca = std::cos(a), sa = std::sin(a);
    center.push_back({40.0 * ca, 40.0 * sa, 0.0});
    left.push_back({34.0 * ca, 34.0 * sa, 0.0});
    right.push_back({46.0 * ca, 46.0 * sa, 0.0});
    wall_in.push_back({30.0 * ca, 30.0 * sa});
    wall_out.push_back({50.0 * ca, 50.0 * sa});
  }
  return Track::from_polylines(center, left, right, {wall_in, wall_out});
}

bool is_color(const ImageObs& img, int r, int c, const float rgb[3]) {
  return img.at(r, c, 0) == rgb[0] && img.at(r, c, 1) == rgb[1] &&
         img.at(r, c, 2) == rgb[2];
}

int count_black(const ImageObs& img) {
  int black = 0;
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) {
      bool all_zero = true;
      for (int ch = 0; ch < img.channels; ++ch)
        if (img.at(r, c, ch) != 0.0f) all_zero = false;
      black += all_zero;
    }
  return black;
}

}  // namespace

TEST_CASE("symmetric scene renders mirror-symmetric within one pixel") {
  Track t = ring_track();
  VehicleState st;
  st.position = {0.0, 0.0};
  st.heading = 0.0;
  ImageObs img = render(t, st);
  int mismatches = 0;
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      bool ok = false;
      // allow a one-column parity slack around the mirrored position
      for (int dc = -1; dc <= 1 && !ok; ++dc) {
        int mc = 63 - c + dc;
        if (mc < 0 || mc >= 64) continue;
        ok = img.at(r, c, 0) == img.at(r, mc, 0) &&
             img.at(r, c, 1) == img.at(r, mc, 1) &&
             img.at(r, c, 2) == img.at(r, mc, 2);
      }
      mismatches += !ok;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("every rendered pixel is a palette color") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-20.0, -38.2};
  st.heading = 0.0;
  CameraConfig cfg;
  ImageObs img = render(t, st);
  const float* colors[6] = {cfg.palette.sky,  cfg.palette.ground,
                            cfg.palette.road, cfg.palette.curb,
                            cfg.palette.wall, cfg.palette.skyline};
  std::set<int> seen;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      bool matched = false;
      for (int k = 0; k < 6; ++k)
        if (is_color(img, r, c, colors[k])) {
          matched = true;
          seen.insert(k);
        }
      CHECK(matched);
      if (!matched) return;  // avoid 4096 failure lines
    }
  // the straight view must actually contain sky, road, curb and wall
  CHECK(seen.count(0) == 1);
  CHECK(seen.count(2) == 1);
  CHECK(seen.count(3) == 1);
  CHECK(seen.count(4) == 1);
}

TEST_CASE("palette colors are pairwise separated by at least 0.2") {
  CameraConfig cfg;
  const float* colors[6] = {cfg.palette.sky,  cfg.palette.ground,
                            cfg.palette.road, cfg.palette.curb,
                            cfg.palette.wall, cfg.palette.skyline};
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      float dist = 0.0f;
      for (int ch = 0; ch < 3; ++ch)
        dist = std::max(dist, std::abs(colors[i][ch] - colors[j][ch]));
      CHECK(dist >= 0.2f);
    }
}

TEST_CASE("masked mirror mode zeroes exactly the top strip") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-20.0, -38.2};
  st.heading = 0.0;
  ImageObs img = render(t, st, ImageMode::masked_mirror);
  for (int r = 0; r < 12; ++r)
    for (int c = 0; c < 64; ++c)
      for (int ch = 0; ch < 3; ++ch) CHECK(img.at(r, c, ch) == 0.0f);
  // below the strip the view matches the unmasked render
  ImageObs full = render(t, st, ImageMode::color64);
  int diff = 0;
  for (int r = 12; r < 64; ++r)
    for (int c = 0; c < 64; ++c)
      for (int ch = 0; ch < 3; ++ch)
        diff += img.at(r, c, ch) != full.at(r, c, ch);
  CHECK(diff == 0);
}

TEST_CASE("grayscale equals the channel-weighted color render") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-10.0, -40.0};
  st.heading = 0.3;
  ImageObs color = render(t, st, ImageMode::color64);
  ImageObs gray = render(t, st, ImageMode::gray64);
  REQUIRE(gray.channels == 1);
  REQUIRE(gray.height == 64);
  float max_diff = 0.0f;
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) {
      float expect = 0.299f * color.at(r, c, 0) + 0.587f * color.at(r, c, 1) +
                     0.114f * color.at(r, c, 2);
      max_diff = std::max(max_diff, std::abs(expect - gray.at(r, c, 0)));
    }
  CHECK(max_diff <= 1.0f / 255.0f);
}

TEST_CASE("color32 halves the resolution") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-20.0, -38.2};
  ImageObs img = render(t, st, ImageMode::color32);
  CHECK(img.height == 32);
  CHECK(img.width == 32);
  CHECK(img.channels == 3);
  CHECK(img.size() == 32u * 32u * 3u);
}

TEST_CASE("render is deterministic") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-15.0, -37.0};
  st.heading = -0.2;
  ImageObs a = render(t, st);
  ImageObs b = render(t, st);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("perturb_pixels blacks out the exact pixel count") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-20.0, -38.2};
  ImageObs img = render(t, st);
  REQUIRE(count_black(img) == 0);  // no palette color is pure black

  ImageObs same = perturb_pixels(img, 0.0, nullptr, 7);
  CHECK(same.pixels == img.pixels);

  ImageObs some = perturb_pixels(img, 0.1, nullptr, 7);
  CHECK(count_black(some) == 409);  // floor(0.1 * 4096)

  ImageObs all = perturb_pixels(img, 1.0, nullptr, 7);
  CHECK(count_black(all) == 4096);

  // determinism and seed sensitivity
  CHECK(perturb_pixels(img, 0.1, nullptr, 7).pixels == some.pixels);
  CHECK(perturb_pixels(img, 0.1, nullptr, 8).pixels != some.pixels);
}

TEST_CASE("perturb_pixels with a mask only touches masked pixels") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-20.0, -38.2};
  ImageObs img = render(t, st);
  std::vector<int> mask;
  for (int i = 0; i < 100; ++i) mask.push_back(i * 37);
  ImageObs out = perturb_pixels(img, 1.0, &mask, 3);
  CHECK(count_black(out) == 100);
  std::set<int> masked(mask.begin(), mask.end());
  for (int idx = 0; idx < 64 * 64; ++idx) {
    bool black = out.pixels[idx * 3] == 0.0f && out.pixels[idx * 3 + 1] == 0.0f &&
                 out.pixels[idx * 3 + 2] == 0.0f;
    CHECK(black == (masked.count(idx) == 1));
    if (black != (masked.count(idx) == 1)) return;
  }
  // fractional selection stays inside the mask
  ImageObs part = perturb_pixels(img, 50.0 / 4096.0, &mask, 3);
  CHECK(count_black(part) == 50);
}

TEST_CASE("png dump produces a well-formed file header") {
  Track t = test_oval();
  VehicleState st;
  st.position = {-20.0, -38.2};
  ImageObs img = render(t, st);
  const char* path = "test_frame.png";
  write_png(path, img);
  FILE* f = std::fopen(path, "rb");
  REQUIRE(f != nullptr);
  unsigned char buf[24];
  REQUIRE(std::fread(buf, 1, 24, f) == 24);
  std::fclose(f);
  std::remove(path);
  const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  for (int i = 0; i < 8; ++i) CHECK(buf[i] == sig[i]);
  // IHDR width/height big-endian at offsets 16 and 20
  CHECK(buf[16] == 0);
  CHECK(buf[19] == 64);
  CHECK(buf[23] == 64);
}
