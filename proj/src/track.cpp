#include "racer/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "racer/rng.hpp"

namespace racer {

int CoursePointSet::count_for(double horizon_s, double spacing_s) {
  // 0.1..6.0 s at 0.1 s spacing yields 59 samples (o^g in R^531).
  int n = static_cast<int>(std::lround(horizon_s / spacing_s)) - 1;
  return std::max(n, 0);
}

namespace {

double point_segment_dist2(const Vec2& p, const Vec2& a, const Vec2& b,
                           double* t_out) {
  Vec2 ab = b - a;
  double len2 = ab.dot(ab);
  double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  Vec2 q = a + ab * t;
  if (t_out) *t_out = t;
  Vec2 d = p - q;
  return d.dot(d);
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c,
                        const Vec2& d) {
  auto orient = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    double v = (q - p).cross(r - p);
    if (v > 1e-12) return 1;
    if (v < -1e-12) return -1;
    return 0;
  };
  int o1 = orient(a, b, c), o2 = orient(a, b, d);
  int o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  auto on_seg = [](const Vec2& p, const Vec2& q, const Vec2& r) {
    return std::min(p.x, r.x) - 1e-12 <= q.x && q.x <= std::max(p.x, r.x) + 1e-12 &&
           std::min(p.y, r.y) - 1e-12 <= q.y && q.y <= std::max(p.y, r.y) + 1e-12;
  };
  if (o1 == 0 && on_seg(a, c, b)) return true;
  if (o2 == 0 && on_seg(a, d, b)) return true;
  if (o3 == 0 && on_seg(c, a, d)) return true;
  if (o4 == 0 && on_seg(c, b, d)) return true;
  return false;
}

bool point_in_quad(const Vec2& p, const Vec2 c[4]) {
  bool any_neg = false, any_pos = false;
  for (int i = 0; i < 4; ++i) {
    double v = (c[(i + 1) % 4] - c[i]).cross(p - c[i]);
    if (v < 0) any_neg = true;
    if (v > 0) any_pos = true;
  }
  return !(any_neg && any_pos);
}

Vec3 closest_on_polyline(const Vec2& p, const std::vector<Vec3>& poly) {
  double best = std::numeric_limits<double>::infinity();
  Vec3 best_pt = poly.front();
  size_t n = poly.size();
  for (size_t i = 0; i < n; ++i) {
    const Vec3& a3 = poly[i];
    const Vec3& b3 = poly[(i + 1) % n];
    double t;
    double d2 = point_segment_dist2(p, a3.xy(), b3.xy(), &t);
    if (d2 < best) {
      best = d2;
      best_pt = a3 + (b3 - a3) * t;
    }
  }
  return best_pt;
}

}  // namespace

Track Track::from_polylines(std::vector<Vec3> center, std::vector<Vec3> left,
                            std::vector<Vec3> right,
                            std::vector<std::vector<Vec2>> walls) {
  auto strip_closing = [](std::vector<Vec3>& poly, const char* name) {
    if (poly.size() < 4) throw std::runtime_error(std::string(name) + ": too few vertices");
    Vec2 d = poly.front().xy() - poly.back().xy();
    if (d.norm() > 1e-9)
      throw std::runtime_error(std::string(name) + ": polyline is not closed");
    poly.pop_back();
  };
  // Accept either an explicitly closed ring or an open one.
  auto maybe_close = [&](std::vector<Vec3>& poly, const char* name) {
    if (poly.size() >= 2 && (poly.front().xy() - poly.back().xy()).norm() <= 1e-9)
      strip_closing(poly, name);
    else if (poly.size() < 3)
      throw std::runtime_error(std::string(name) + ": too few vertices");
  };
  maybe_close(center, "center");
  maybe_close(left, "left");
  maybe_close(right, "right");

  Track t;
  t.center_ = std::move(center);
  t.left_raw_ = std::move(left);
  t.right_raw_ = std::move(right);
  t.walls_ = std::move(walls);
  t.finalize();
  return t;
}

void Track::finalize() {
  size_t n = center_.size();
  cum_s_.resize(n + 1);
  cum_s_[0] = 0.0;
  for (size_t i = 0; i < n; ++i) {
    Vec2 d = center_[(i + 1) % n].xy() - center_[i].xy();
    cum_s_[i + 1] = cum_s_[i] + d.norm();
  }
  total_length_ = cum_s_[n];
  if (!(total_length_ > 0.0)) throw std::runtime_error("track has zero length");

  left_corr_.resize(n);
  right_corr_.resize(n);
  for (size_t i = 0; i < n; ++i) {
    left_corr_[i] = closest_on_polyline(center_[i].xy(), left_raw_);
    right_corr_[i] = closest_on_polyline(center_[i].xy(), right_raw_);
    // boundaries must sit on opposite sides of the center line
    Vec2 tangent = (center_[(i + 1) % n].xy() - center_[i].xy()).normalized();
    double sl = tangent.cross(left_corr_[i].xy() - center_[i].xy());
    double sr = tangent.cross(right_corr_[i].xy() - center_[i].xy());
    if (sl <= 0.0 || sr >= 0.0)
      throw std::runtime_error("left/right boundaries on the same side of center");
  }

  // grid index over center segments
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  min_x_ = min_y_ = std::numeric_limits<double>::infinity();
  double avg_seg = total_length_ / static_cast<double>(n);
  cell_ = std::max(avg_seg * 2.0, 4.0);
  for (const auto& v : center_) {
    min_x_ = std::min(min_x_, v.x);
    min_y_ = std::min(min_y_, v.y);
    max_x = std::max(max_x, v.x);
    max_y = std::max(max_y, v.y);
  }
  nx_ = static_cast<int>((max_x - min_x_) / cell_) + 2;
  ny_ = static_cast<int>((max_y - min_y_) / cell_) + 2;
  grid_.assign(static_cast<size_t>(nx_) * ny_, {});
  auto cell_of = [&](double x, double y) {
    int cx = std::clamp(static_cast<int>((x - min_x_) / cell_), 0, nx_ - 1);
    int cy = std::clamp(static_cast<int>((y - min_y_) / cell_), 0, ny_ - 1);
    return std::pair<int, int>(cx, cy);
  };
  for (size_t i = 0; i < n; ++i) {
    Vec2 a = center_[i].xy(), b = center_[(i + 1) % n].xy();
    auto [ax, ay] = cell_of(std::min(a.x, b.x), std::min(a.y, b.y));
    auto [bx, by] = cell_of(std::max(a.x, b.x), std::max(a.y, b.y));
    for (int cx = ax; cx <= bx; ++cx)
      for (int cy = ay; cy <= by; ++cy)
        grid_[static_cast<size_t>(cy) * nx_ + cx].push_back(static_cast<int>(i));
  }
}

Track::SegHit Track::project_segment(int i, const Vec2& p) const {
  size_t n = center_.size();
  Vec2 a = center_[i].xy(), b = center_[(static_cast<size_t>(i) + 1) % n].xy();
  double t;
  double d2 = point_segment_dist2(p, a, b, &t);
  Vec2 tangent = (b - a).normalized();
  Vec2 q = a + (b - a) * t;
  double lateral = tangent.cross(p - q);
  double s = cum_s_[i] + t * (cum_s_[i + 1] - cum_s_[i]);
  if (s >= total_length_) s -= total_length_;
  return {d2, s, lateral};
}

TrackProjection Track::project(const Vec2& p) const {
  int pcx = std::clamp(static_cast<int>((p.x - min_x_) / cell_), 0, nx_ - 1);
  int pcy = std::clamp(static_cast<int>((p.y - min_y_) / cell_), 0, ny_ - 1);

  double best_d2 = std::numeric_limits<double>::infinity();
  double best_s = 0.0, best_lat = 0.0;
  auto consider = [&](int seg) {
    SegHit h = project_segment(seg, p);
    // ties broken by smaller s
    if (h.dist2 < best_d2 - 1e-12 ||
        (std::abs(h.dist2 - best_d2) <= 1e-12 && h.s < best_s)) {
      best_d2 = h.dist2;
      best_s = h.s;
      best_lat = h.lateral;
    }
  };

  int max_ring = std::max(nx_, ny_);
  bool found = false;
  for (int ring = 0; ring <= max_ring; ++ring) {
    if (found) {
      // all closer candidates live within ring <= ceil(sqrt(best)/cell)+1
      double reach = (static_cast<double>(ring) - 1.0) * cell_;
      if (reach > 0.0 && reach * reach > best_d2) break;
    }
    bool any_cell = false;
    for (int cx = pcx - ring; cx <= pcx + ring; ++cx) {
      for (int cy = pcy - ring; cy <= pcy + ring; ++cy) {
        if (std::max(std::abs(cx - pcx), std::abs(cy - pcy)) != ring) continue;
        if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) continue;
        any_cell = true;
        for (int seg : grid_[static_cast<size_t>(cy) * nx_ + cx]) consider(seg);
      }
    }
    if (best_d2 < std::numeric_limits<double>::infinity()) found = true;
    if (!any_cell && ring > 0 && found) break;
  }

  TrackProjection out;
  out.s = best_s;
  out.lateral_offset = best_lat;
  out.on_course = std::abs(best_lat) <= width_at(best_s) / 2.0;
  return out;
}

double Track::wrap_s(double s) const {
  s = std::fmod(s, total_length_);
  if (s < 0.0) s += total_length_;
  return s;
}

double Track::progress_delta(const TrackProjection& prev,
                             const TrackProjection& cur) const {
  double d = cur.s - prev.s;
  double half = total_length_ / 2.0;
  while (d > half) d -= total_length_;
  while (d <= -half) d += total_length_;
  return d;
}

void Track::locate(double s, int* seg, double* frac) const {
  s = wrap_s(s);
  // cum_s_ is sorted; binary search for the bracketing segment
  auto it = std::upper_bound(cum_s_.begin(), cum_s_.end(), s);
  int i = static_cast<int>(it - cum_s_.begin()) - 1;
  i = std::clamp(i, 0, static_cast<int>(center_.size()) - 1);
  double len = cum_s_[i + 1] - cum_s_[i];
  *seg = i;
  *frac = len > 0.0 ? (s - cum_s_[i]) / len : 0.0;
}

Vec3 Track::center_at(double s) const {
  int i;
  double f;
  locate(s, &i, &f);
  const Vec3& a = center_[i];
  const Vec3& b = center_[(static_cast<size_t>(i) + 1) % center_.size()];
  return a + (b - a) * f;
}

Vec3 Track::left_at(double s) const {
  int i;
  double f;
  locate(s, &i, &f);
  const Vec3& a = left_corr_[i];
  const Vec3& b = left_corr_[(static_cast<size_t>(i) + 1) % center_.size()];
  return a + (b - a) * f;
}

Vec3 Track::right_at(double s) const {
  int i;
  double f;
  locate(s, &i, &f);
  const Vec3& a = right_corr_[i];
  const Vec3& b = right_corr_[(static_cast<size_t>(i) + 1) % center_.size()];
  return a + (b - a) * f;
}

double Track::heading_at(double s) const {
  int i;
  double f;
  locate(s, &i, &f);
  Vec2 d = center_[(static_cast<size_t>(i) + 1) % center_.size()].xy() -
           center_[i].xy();
  return std::atan2(d.y, d.x);
}

double Track::width_at(double s) const {
  Vec3 l = left_at(s), r = right_at(s);
  return (l.xy() - r.xy()).norm();
}

Track::CornerReport Track::corners_on_course(const Vec2 corners[4]) const {
  CornerReport rep;
  int outside = 0;
  for (int i = 0; i < 4; ++i) {
    TrackProjection pr = project(corners[i]);
    rep.corner_on[i] = pr.on_course;
    if (!pr.on_course) ++outside;
  }
  rep.off_course = outside >= 3;
  return rep;
}

bool Track::wall_contact(const Vec2 corners[4]) const {
  for (const auto& wall : walls_) {
    for (size_t i = 0; i + 1 < wall.size(); ++i) {
      const Vec2& a = wall[i];
      const Vec2& b = wall[i + 1];
      if (point_in_quad(a, corners) || point_in_quad(b, corners)) return true;
      for (int e = 0; e < 4; ++e) {
        if (segments_intersect(corners[e], corners[(e + 1) % 4], a, b))
          return true;
      }
    }
  }
  return false;
}

bool Track::nearest_wall(const Vec2& p, double radius, Vec2* seg_a,
                         Vec2* seg_b) const {
  double best = radius * radius;
  bool found = false;
  for (const auto& wall : walls_) {
    for (size_t i = 0; i + 1 < wall.size(); ++i) {
      double d2 = point_segment_dist2(p, wall[i], wall[i + 1], nullptr);
      if (d2 < best) {
        best = d2;
        *seg_a = wall[i];
        *seg_b = wall[i + 1];
        found = true;
      }
    }
  }
  return found;
}

CoursePointSet Track::course_points(const Vec2& position, double heading,
                                    double speed, double horizon_s) const {
  if (!(horizon_s > 0.0))
    throw std::invalid_argument("course_points: horizon must be positive");
  CoursePointSet out;
  out.horizon_s = horizon_s;
  int count = CoursePointSet::count_for(horizon_s, out.spacing_s);
  out.values.reserve(static_cast<size_t>(count) * 9);

  TrackProjection pr = project(position);
  double c = std::cos(-heading), sn = std::sin(-heading);
  auto emit = [&](const Vec3& w) {
    double dx = w.x - position.x, dy = w.y - position.y;
    out.values.push_back(c * dx - sn * dy);
    out.values.push_back(sn * dx + c * dy);
    out.values.push_back(w.z);
  };
  for (int k = 1; k <= count; ++k) {
    double sk = wrap_s(pr.s + out.spacing_s * k * speed);
    emit(left_at(sk));
    emit(center_at(sk));
    emit(right_at(sk));
  }
  return out;
}

// ---------------------------------------------------------------------------
// file format

Track Track::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open track file: " + path);
  std::string header;
  std::getline(in, header);
  if (header != "trackfmt 1")
    throw std::runtime_error("bad track header (want 'trackfmt 1'): " + header);

  std::vector<Vec3> center, left, right;
  std::vector<std::vector<Vec2>> walls;
  std::vector<Vec3>* target = nullptr;
  std::vector<Vec2>* wall_target = nullptr;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "center") { target = &center; wall_target = nullptr; continue; }
    if (line == "left") { target = &left; wall_target = nullptr; continue; }
    if (line == "right") { target = &right; wall_target = nullptr; continue; }
    if (line == "wall") {
      walls.emplace_back();
      wall_target = &walls.back();
      target = nullptr;
      continue;
    }
    std::istringstream ss(line);
    double x, y, z = 0.0;
    if (!(ss >> x >> y)) throw std::runtime_error("bad vertex line: " + line);
    ss >> z;
    if (target)
      target->push_back({x, y, z});
    else if (wall_target)
      wall_target->push_back({x, y});
    else
      throw std::runtime_error("vertex before any section header");
  }
  if (center.empty() || left.empty() || right.empty())
    throw std::runtime_error("track file missing center/left/right section");
  // closed-ness validated in from_polylines
  auto require_closed = [&](const std::vector<Vec3>& poly, const char* name) {
    if ((poly.front().xy() - poly.back().xy()).norm() > 1e-9)
      throw std::runtime_error(std::string(name) + " polyline not closed");
  };
  require_closed(center, "center");
  require_closed(left, "left");
  require_closed(right, "right");
  return from_polylines(std::move(center), std::move(left), std::move(right),
                        std::move(walls));
}

void Track::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write track file: " + path);
  out.precision(12);
  out << "trackfmt 1\n";
  auto dump = [&](const char* name, const std::vector<Vec3>& poly) {
    out << name << "\n";
    for (const auto& v : poly) out << v.x << " " << v.y << " " << v.z << "\n";
    // re-emit the closing vertex
    out << poly.front().x << " " << poly.front().y << " " << poly.front().z
        << "\n";
  };
  dump("center", center_);
  dump("left", left_raw_);
  dump("right", right_raw_);
  for (const auto& wall : walls_) {
    out << "wall\n";
    for (const auto& v : wall) out << v.x << " " << v.y << " 0\n";
  }
}

// ---------------------------------------------------------------------------
// generators

namespace {

Track build_from_center(const std::vector<Vec3>& center,
                        const std::vector<double>& half_width,
                        double wall_offset) {
  size_t n = center.size();
  std::vector<Vec3> left(n), right(n);
  std::vector<Vec2> lwall, rwall;
  for (size_t i = 0; i < n; ++i) {
    Vec2 prev = center[(i + n - 1) % n].xy();
    Vec2 next = center[(i + 1) % n].xy();
    Vec2 tangent = (next - prev).normalized();
    Vec2 nrm = tangent.perp();  // left of travel
    double hw = half_width[i];
    Vec2 c = center[i].xy();
    left[i] = {c.x + nrm.x * hw, c.y + nrm.y * hw, 0.0};
    right[i] = {c.x - nrm.x * hw, c.y - nrm.y * hw, 0.0};
    if (wall_offset > 0.0) {
      lwall.push_back({c.x + nrm.x * (hw + wall_offset),
                       c.y + nrm.y * (hw + wall_offset)});
      rwall.push_back({c.x - nrm.x * (hw + wall_offset),
                       c.y - nrm.y * (hw + wall_offset)});
    }
  }
  std::vector<std::vector<Vec2>> walls;
  if (wall_offset > 0.0) {
    lwall.push_back(lwall.front());
    rwall.push_back(rwall.front());
    walls.push_back(std::move(lwall));
    walls.push_back(std::move(rwall));
  }
  left.push_back(left.front());
  right.push_back(right.front());
  std::vector<Vec3> c = center;
  c.push_back(c.front());
  return Track::from_polylines(std::move(c), std::move(left), std::move(right),
                               std::move(walls));
}

}  // namespace

Track Track::oval(double straight, double radius, double width,
                  double wall_offset) {
  std::vector<Vec3> center;
  const int arc_pts = 48;
  const int straight_pts = 24;
  double hx = straight / 2.0;
  // bottom straight, right arc, top straight, left arc
  for (int i = 0; i < straight_pts; ++i) {
    double t = static_cast<double>(i) / straight_pts;
    center.push_back({-hx + straight * t, -radius, 0.0});
  }
  for (int i = 0; i < arc_pts; ++i) {
    double a = -M_PI / 2.0 + M_PI * i / arc_pts;
    center.push_back({hx + radius * std::cos(a), radius * std::sin(a), 0.0});
  }
  for (int i = 0; i < straight_pts; ++i) {
    double t = static_cast<double>(i) / straight_pts;
    center.push_back({hx - straight * t, radius, 0.0});
  }
  for (int i = 0; i < arc_pts; ++i) {
    double a = M_PI / 2.0 + M_PI * i / arc_pts;
    center.push_back({-hx + radius * std::cos(a), radius * std::sin(a), 0.0});
  }
  std::vector<double> hw(center.size(), width / 2.0);
  return build_from_center(center, hw, wall_offset);
}

Track Track::random_loop(uint64_t seed, double base_radius, double width) {
  Rng rng(seed);
  const int modes = 5;
  double amp[modes], phase[modes];
  for (int k = 0; k < modes; ++k) {
    amp[k] = rng.uniform(0.0, base_radius * 0.06 / (k + 1));
    phase[k] = rng.uniform(0.0, 2.0 * M_PI);
  }
  const int n = 256;
  std::vector<Vec3> center;
  center.reserve(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * i / n;
    double r = base_radius;
    for (int k = 0; k < modes; ++k) r += amp[k] * std::cos((k + 2) * th + phase[k]);
    center.push_back({r * std::cos(th), r * std::sin(th), 0.0});
  }
  std::vector<double> hw(center.size(), width / 2.0);
  return build_from_center(center, hw, 0.0);
}

Track Track::chicane_course() {
  // oval-like loop with a chicane wiggle inserted into the bottom straight
  const int n = 360;
  std::vector<Vec3> center;
  center.reserve(n);
  double R = 70.0;
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * i / n;
    double r = R;
    // localized lateral wiggle around th = 0
    double bump = std::exp(-std::pow(wrap_angle(th) / 0.35, 2));
    r += 9.0 * bump * std::sin(wrap_angle(th) / 0.12);
    center.push_back({r * std::cos(th), r * std::sin(th) * 0.8, 0.0});
  }
  std::vector<double> hw(center.size(), 11.0 / 2.0);
  return build_from_center(center, hw, 3.0);
}

Track Track::mixed_circuit() {
  const int n = 420;
  std::vector<Vec3> center;
  center.reserve(n);
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * i / n;
    double r = 95.0 + 14.0 * std::cos(2.0 * th + 0.7) + 8.0 * std::cos(3.0 * th) +
               5.0 * std::cos(5.0 * th + 2.1);
    center.push_back({r * std::cos(th), r * std::sin(th), 0.0});
  }
  std::vector<double> hw(center.size(), 12.0 / 2.0);
  return build_from_center(center, hw, 3.0);
}

}  // namespace racer
