#pragma once

#include "advdo/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace advdo {

struct Lane {
  std::string id;
  geom::Polyline centerline;
  double width = 3.5;
};

/// Drivable region (union of simple polygons) and lane centerlines.
struct MapModel {
  std::string id;
  std::vector<geom::Polygon> drivable;
  std::vector<Lane> lanes;

  void validate() const;
  bool is_drivable(const Vec2& p) const;
  /// Lane whose centerline is nearest to `p` with |offset| <= width / 2 and a
  /// heading within 90 degrees of `heading`; nullopt when none.
  std::optional<std::size_t> lane_of(const Vec2& p, double heading) const;
};

}  // namespace advdo
