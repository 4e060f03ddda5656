#pragma once

#include <string>
#include <vector>

#include "racer/geom.hpp"

namespace racer {

/// Projection of a world point onto the center line.
struct TrackProjection {
  double s = 0.0;              // arc-length position, in [0, total_length)
  double lateral_offset = 0.0; // signed meters, positive toward the left boundary
  bool on_course = false;      // |lateral_offset| <= width_at(s)/2
};

/// Velocity-scaled look-ahead samples of the left/center/right course lines,
/// expressed in the vehicle-local frame (x forward, y left).
/// Layout: for each look-ahead time, [left.xyz, center.xyz, right.xyz].
struct CoursePointSet {
  double horizon_s = 6.0;
  double spacing_s = 0.1;
  std::vector<double> values;

  // Look-ahead times are spacing, 2*spacing, ..., strictly below the horizon
  // plus the horizon sample count that yields 59 points at 6.0 s.
  static int count_for(double horizon_s, double spacing_s = 0.1);
};

/// Closed race track: arc-length-parameterized center line plus left/right
/// boundary polylines and optional wall polylines. Immutable after load.
class Track {
 public:
  Track() = default;

  // Builds a track from closed polylines (first vertex == last vertex within
  // 1e-9 m, or the closing vertex may be omitted). Left/right boundaries are
  // paired to center vertices by closest-point correspondence.
  static Track from_polylines(std::vector<Vec3> center, std::vector<Vec3> left,
                              std::vector<Vec3> right,
                              std::vector<std::vector<Vec2>> walls);

  // Line-oriented text format, header "trackfmt 1", sections center/left/
  // right/wall listing "x y z" floats in meters.
  static Track load(const std::string& path);
  void save(const std::string& path) const;

  // Synthetic track generators.
  static Track oval(double straight = 80.0, double radius = 38.2,
                    double width = 12.0, double wall_offset = 3.0);
  static Track chicane_course();
  static Track mixed_circuit();
  // Smooth random closed loop (Fourier radius perturbation), for tests.
  static Track random_loop(uint64_t seed, double base_radius = 80.0,
                           double width = 10.0);

  double total_length() const { return total_length_; }
  double width_at(double s) const;

  TrackProjection project(const Vec2& p) const;

  // Signed shortest wrap-around difference cur.s - prev.s in (-L/2, L/2].
  double progress_delta(const TrackProjection& prev,
                        const TrackProjection& cur) const;

  // Per-corner on-course flags; off_course is true iff >= 3 corners are
  // outside the region between the boundaries.
  struct CornerReport {
    bool corner_on[4] = {false, false, false, false};
    bool off_course = false;
  };
  CornerReport corners_on_course(const Vec2 corners[4]) const;

  // True iff the footprint polygon touches any wall polyline.
  bool wall_contact(const Vec2 corners[4]) const;

  CoursePointSet course_points(const Vec2& position, double heading,
                               double speed, double horizon_s) const;

  Vec3 center_at(double s) const;
  Vec3 left_at(double s) const;
  Vec3 right_at(double s) const;
  double heading_at(double s) const;  // tangent direction of the center line

  // Nearest wall segment query used by dynamics for contact response.
  // Returns false when there are no walls within `radius` of p.
  bool nearest_wall(const Vec2& p, double radius, Vec2* seg_a,
                    Vec2* seg_b) const;

  const std::vector<std::vector<Vec2>>& walls() const { return walls_; }
  size_t center_vertex_count() const { return center_.size(); }

  double wrap_s(double s) const;

 private:
  void finalize();  // builds arc lengths, correspondences, grid index

  std::vector<Vec3> center_;  // open ring (closing vertex dropped)
  std::vector<Vec3> left_corr_, right_corr_;  // per-center-vertex pairing
  std::vector<Vec3> left_raw_, right_raw_;
  std::vector<std::vector<Vec2>> walls_;
  std::vector<double> cum_s_;  // cum_s_[i] = arc length at center_[i]
  double total_length_ = 0.0;

  // uniform spatial grid over center segments
  double cell_ = 1.0;
  double min_x_ = 0.0, min_y_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<int>> grid_;

  struct SegHit {
    double dist2;
    double s;
    double lateral;
  };
  SegHit project_segment(int i, const Vec2& p) const;
  void locate(double s, int* seg, double* frac) const;
};

}  // namespace racer
