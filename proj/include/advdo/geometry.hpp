#pragma once

#include "advdo/core.hpp"

#include <array>
#include <span>
#include <vector>

namespace advdo::geom {

using Polygon = std::vector<Vec2>;  // implicit closing edge

double cross(const Vec2& a, const Vec2& b);

/// Crossing-number test. Points exactly on an edge may land on either side.
bool point_in_polygon(const Vec2& p, std::span<const Vec2> poly);

/// True when no two non-adjacent edges intersect and the polygon has >= 3
/// distinct vertices.
bool is_simple(std::span<const Vec2> poly);

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

double polygon_area(std::span<const Vec2> poly);  // signed, CCW positive

struct OrientedBox {
  Vec2 center = Vec2::Zero();
  double heading = 0.0;
  double length = 4.0;
  double width = 1.8;

  std::array<Vec2, 4> corners() const;
};

/// Separating-axis test; touching boxes count as overlapping.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

struct Polyline {
  Path points;
  std::vector<double> s;  // cumulative arc length, s[0] = 0

  explicit Polyline(Path pts);
  Polyline() = default;
  double length() const { return s.empty() ? 0.0 : s.back(); }
  Vec2 at(double arc) const;
  /// Unit tangent at arc length (of the containing segment).
  Vec2 tangent(double arc) const;
  struct Projection {
    double arc;     // along the polyline
    double offset;  // signed, left positive
    Vec2 point;
  };
  Projection project(const Vec2& p) const;
};

double path_length(std::span<const Vec2> p);

/// `n` points evenly spaced by arc length, endpoints included.
Path resample(std::span<const Vec2> p, int n);

}  // namespace advdo::geom
