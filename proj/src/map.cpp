#include "advdo/map.hpp"

#include <cmath>
#include <limits>

namespace advdo {

void MapModel::validate() const {
  if (drivable.empty()) throw InvalidInput("map: no drivable polygon");
  for (std::size_t i = 0; i < drivable.size(); ++i) {
    if (!all_finite(drivable[i])) throw InvalidInput("map: non-finite polygon vertex");
    if (!geom::is_simple(drivable[i]))
      throw InvalidInput("map: drivable polygon " + std::to_string(i) + " is not simple");
  }
  for (const auto& l : lanes) {
    if (!(l.width > 0)) throw InvalidInput("map: lane '" + l.id + "' width must be > 0");
    if (l.centerline.points.size() < 2) throw InvalidInput("map: lane '" + l.id + "' needs >= 2 points");
  }
}

bool MapModel::is_drivable(const Vec2& p) const {
  for (const auto& poly : drivable)
    if (geom::point_in_polygon(p, poly)) return true;
  return false;
}

std::optional<std::size_t> MapModel::lane_of(const Vec2& p, double heading) const {
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  const Vec2 h(std::cos(heading), std::sin(heading));
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const auto pr = lanes[i].centerline.project(p);
    const double d = std::abs(pr.offset);
    if (d > 0.5 * lanes[i].width) continue;
    if (pr.arc < 0 || pr.arc > lanes[i].centerline.length()) continue;
    if (lanes[i].centerline.tangent(pr.arc).dot(h) <= 0) continue;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace advdo
