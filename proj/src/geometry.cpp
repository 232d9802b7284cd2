#include "advdo/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace advdo::geom {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

namespace {

int orient(const Vec2& a, const Vec2& b, const Vec2& c) {
  const double v = cross(b - a, c - a);
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) &&
         std::min(a.y(), b.y()) <= p.y() && p.y() <= std::max(a.y(), b.y());
}

}  // namespace

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

bool is_simple(std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i)
    if ((poly[i] - poly[(i + 1) % n]).norm() == 0.0) return false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return false;
    }
  return std::abs(polygon_area(poly)) > 0.0;
}

double polygon_area(std::span<const Vec2> poly) {
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) a += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * a;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 f(std::cos(heading), std::sin(heading));
  const Vec2 l(-f.y(), f.x());
  const Vec2 hf = 0.5 * length * f, hl = 0.5 * width * l;
  return {center + hf + hl, center - hf + hl, center - hf - hl, center + hf - hl};
}

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = a.corners(), cb = b.corners();
  const std::array<Vec2, 4> axes{Vec2(std::cos(a.heading), std::sin(a.heading)),
                                 Vec2(-std::sin(a.heading), std::cos(a.heading)),
                                 Vec2(std::cos(b.heading), std::sin(b.heading)),
                                 Vec2(-std::sin(b.heading), std::cos(b.heading))};
  for (const auto& ax : axes) {
    double amin = std::numeric_limits<double>::infinity(), amax = -amin, bmin = amin, bmax = -amin;
    for (const auto& c : ca) {
      const double v = ax.dot(c);
      amin = std::min(amin, v);
      amax = std::max(amax, v);
    }
    for (const auto& c : cb) {
      const double v = ax.dot(c);
      bmin = std::min(bmin, v);
      bmax = std::max(bmax, v);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

Polyline::Polyline(Path pts) : points(std::move(pts)) {
  if (points.size() < 2) throw InvalidInput("polyline: need at least 2 points");
  s.assign(points.size(), 0.0);
  for (std::size_t i = 1; i < points.size(); ++i) s[i] = s[i - 1] + (points[i] - points[i - 1]).norm();
}

namespace {

std::size_t segment_of(const std::vector<double>& s, double arc) {
  if (arc <= 0) return 0;
  const auto it = std::upper_bound(s.begin(), s.end(), arc);
  const std::size_t i = static_cast<std::size_t>(it - s.begin());
  return std::min(i == 0 ? 0 : i - 1, s.size() - 2);
}

}  // namespace

Vec2 Polyline::at(double arc) const {
  const std::size_t i = segment_of(s, arc);
  const double len = s[i + 1] - s[i];
  const double u = len > 0 ? (arc - s[i]) / len : 0.0;  // extrapolates past the ends
  return points[i] + u * (points[i + 1] - points[i]);
}

Vec2 Polyline::tangent(double arc) const {
  const std::size_t i = segment_of(s, arc);
  const Vec2 d = points[i + 1] - points[i];
  const double n = d.norm();
  return n > 0 ? Vec2(d / n) : Vec2(1, 0);
}

Polyline::Projection Polyline::project(const Vec2& p) const {
  Projection best{0.0, 0.0, points.front()};
  double best_d = std::numeric_limits<double>::infinity();
  const std::size_t n = points.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const Vec2 a = points[i], d = points[i + 1] - a;
    const double L2 = d.squaredNorm();
    double u = L2 > 0 ? (p - a).dot(d) / L2 : 0.0;
    // The first and last segments extend past the polyline ends.
    if (i > 0) u = std::max(u, 0.0);
    if (i + 2 < n) u = std::min(u, 1.0);
    const Vec2 q = a + u * d;
    const double dist = (p - q).norm();
    if (dist < best_d) {
      best_d = dist;
      const double L = std::sqrt(L2);
      best.arc = s[i] + u * L;
      best.point = q;
      best.offset = L > 0 ? cross(d / L, p - q) : 0.0;
    }
  }
  return best;
}

double path_length(std::span<const Vec2> p) {
  double l = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) l += (p[i] - p[i - 1]).norm();
  return l;
}

Path resample(std::span<const Vec2> p, int n) {
  if (p.size() < 2 || n < 2) throw InvalidInput("resample: need >= 2 points in and out");
  std::vector<double> s(p.size(), 0.0);
  for (std::size_t i = 1; i < p.size(); ++i) s[i] = s[i - 1] + (p[i] - p[i - 1]).norm();
  Path out;
  const double L = s.back();
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double arc = L * k / (n - 1);
    while (seg + 2 < p.size() && s[seg + 1] < arc) ++seg;
    const double len = s[seg + 1] - s[seg];
    const double u = len > 0 ? std::clamp((arc - s[seg]) / len, 0.0, 1.0) : 0.0;
    out.push_back(p[seg] + u * (p[seg + 1] - p[seg]));
  }
  out.back() = p.back();
  return out;
}

}  // namespace advdo::geom
