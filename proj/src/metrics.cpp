#include "advdo/metrics.hpp"

#include "advdo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace advdo::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const Path& a, const Path& b, const char* what) {
  if (a.size() != b.size() || a.empty())
    throw InvalidInput(std::string(what) + ": path lengths differ or are empty");
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void MetricsConfig::validate() const {
  if (!(miss_threshold > 0)) throw InvalidInput("metrics: miss threshold must be > 0");
  if (!(rho > 0)) throw InvalidInput("metrics: rho must be > 0");
  if (!(sigma > 0)) throw InvalidInput("metrics: sigma must be > 0");
}

DisplacementError displacement_error(const Prediction& pred, std::size_t agent, const Path& truth) {
  DisplacementError best{kInf, kInf};
  for (const auto& mode : pred.modes) {
    const Path& p = mode.at(agent);
    check_pair(p, truth, "displacement_error");
    double sum = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) sum += (p[t] - truth[t]).norm();
    best.ade = std::min(best.ade, sum / static_cast<double>(p.size()));
    best.fde = std::min(best.fde, (p.back() - truth.back()).norm());
  }
  return best;
}

double max_displacement(const Prediction& pred, std::size_t agent, const Path& truth) {
  double best = kInf;
  for (const auto& mode : pred.modes) {
    const Path& p = mode.at(agent);
    check_pair(p, truth, "max_displacement");
    double m = 0.0;
    for (std::size_t t = 0; t < p.size(); ++t) m = std::max(m, (p[t] - truth[t]).norm());
    best = std::min(best, m);
  }
  return best;
}

bool is_miss(const Prediction& pred, std::size_t agent, const Path& truth, double threshold) {
  return max_displacement(pred, agent, truth) > threshold;
}

double miss_rate(const Prediction& pred, const std::vector<Path>& truth,
                 std::span<const std::size_t> agents, double threshold) {
  if (!(threshold > 0)) throw InvalidInput("miss_rate: threshold must be > 0");
  if (agents.empty()) return 0.0;
  std::size_t n = 0;
  for (auto i : agents) n += is_miss(pred, i, truth.at(i), threshold);
  return static_cast<double>(n) / static_cast<double>(agents.size());
}

bool is_offroad(const Prediction& pred, std::size_t agent, const MapModel& map) {
  if (map.drivable.empty()) throw InvalidInput("offroad: map has no drivable polygon");
  for (const auto& p : pred.modes[pred.best_mode(agent)][agent])
    if (!map.is_drivable(p)) return true;
  return false;
}

double offroad_rate(const Prediction& pred, std::span<const std::size_t> agents, const MapModel& map) {
  if (map.drivable.empty()) throw InvalidInput("offroad_rate: map has no drivable polygon");
  if (agents.empty()) return 0.0;
  std::size_t n = 0;
  for (auto i : agents) n += is_offroad(pred, i, map);
  return static_cast<double>(n) / static_cast<double>(agents.size());
}

double violation_rate(std::span<const Path> trajectories, double dt,
                      const dynamics::DynamicBounds& bounds) {
  if (trajectories.empty()) throw InvalidInput("violation_rate: empty set");
  std::size_t n = 0;
  for (const auto& p : trajectories) n += dynamics::violates(dynamics::inverse(p, dt), bounds);
  return static_cast<double>(n) / static_cast<double>(trajectories.size());
}

double violation_rate(std::span<const attack::AttackResult> results,
                      const dynamics::DynamicBounds& bounds) {
  if (results.empty()) throw InvalidInput("violation_rate: empty set");
  std::size_t n = 0;
  for (const auto& r : results) {
    const auto states = r.reverse ? dynamics::rollout_reverse(r.anchor, r.adversarial.controls)
                                  : dynamics::rollout(r.anchor, r.adversarial.controls);
    n += dynamics::violates(dynamics::params_from_rollout(states, r.adversarial.controls), bounds);
  }
  return static_cast<double>(n) / static_cast<double>(results.size());
}

double interaction_cost(const Path& agent, const Path& ego, double sigma, Path* grad) {
  check_pair(agent, ego, "interaction_cost");
  if (grad) grad->assign(agent.size(), Vec2::Zero());
  double c = 0.0;
  for (std::size_t t = 0; t < agent.size(); ++t) {
    const Vec2 r = agent[t] - ego[t];
    const double d = r.norm();
    const double e = std::exp(-d / sigma);
    c += e;
    if (grad && d > 0) (*grad)[t] = -e / (sigma * d) * r;
  }
  return c;
}

double sensitivity(const Path& agent, const Path& ego, double sigma) {
  check_pair(agent, ego, "sensitivity");
  double s = 0.0;
  for (std::size_t t = 0; t < agent.size(); ++t)
    s += std::exp(-(agent[t] - ego[t]).norm() / sigma) / sigma;
  return s / static_cast<double>(agent.size());
}

Aggregated aggregated_sensitivity(const Scene& scene, const Prediction& pred, const Path& ego_plan,
                                  const MetricsConfig& cfg) {
  cfg.validate();
  Aggregated out;
  const auto adv = static_cast<std::size_t>(scene.adv);
  const Path& xa = scene.histories.at(adv);
  double sum = 0.0;
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    if (i == adv || static_cast<int>(i) == scene.ego) continue;
    const Path& xi = scene.histories[i];
    double dmin = kInf;
    for (std::size_t t = 0; t < std::min(xa.size(), xi.size()); ++t)
      dmin = std::min(dmin, (xa[t] - xi[t]).norm());
    if (!(dmin < cfg.rho)) continue;
    sum += sensitivity(pred.most_likely(i), ego_plan, cfg.sigma);
    ++out.count;
  }
  if (out.count) out.value = sum / static_cast<double>(out.count);
  return out;
}

Weighted weighted_mean(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw InvalidInput("weighted_mean: size mismatch");
  double ws = 0.0, s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (weights[i] < 0) throw InvalidInput("weighted_mean: negative weight");
    ws += weights[i];
    s += weights[i] * values[i];
  }
  const bool uniform = std::all_of(weights.begin(), weights.end(),
                                   [&](double w) { return w == weights.front(); });
  if (ws > 0 && uniform) return {mean_of(values), false};
  if (ws > 0) return {s / ws, false};
  return {mean_of(values), true};
}

std::vector<std::size_t> evaluation_agents(const Scene& scene) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scene.agents(); ++i)
    if (static_cast<int>(i) != scene.ego) out.push_back(i);
  return out;
}

PlanningAware planning_aware(std::span<const AgentEval> agents) {
  std::vector<double> w, ade, fde, mr, orr;
  for (const auto& a : agents) {
    w.push_back(a.pi);
    ade.push_back(a.ade);
    fde.push_back(a.fde);
    mr.push_back(a.miss ? 1.0 : 0.0);
    orr.push_back(a.offroad ? 1.0 : 0.0);
  }
  PlanningAware p;
  const auto r = weighted_mean(ade, w);
  p.pi_ade = r.value;
  p.pi_fde = weighted_mean(fde, w).value;
  p.pi_mr = weighted_mean(mr, w).value;
  p.pi_orr = weighted_mean(orr, w).value;
  p.fallback = r.fallback;
  return p;
}

SceneEval evaluate(const Scene& scene, const Prediction& pred, const MapModel* map,
                   const MetricsConfig& cfg) {
  cfg.validate();
  if (!scene.has_futures()) throw InvalidInput("evaluate: scene has no ground-truth futures");
  pred.validate(scene.agents(), scene.horizon);
  if (map && map->drivable.empty()) throw InvalidInput("evaluate: map has no drivable polygon");
  const bool has_ego = scene.ego >= 0;
  SceneEval out;
  for (auto i : evaluation_agents(scene)) {
    AgentEval a;
    a.agent = i;
    const Path& y = scene.futures[i];
    const auto de = displacement_error(pred, i, y);
    a.ade = de.ade;
    a.fde = de.fde;
    a.max_disp = max_displacement(pred, i, y);
    a.miss = a.max_disp > cfg.miss_threshold;
    a.offroad = map ? is_offroad(pred, i, *map) : false;
    if (has_ego)
      a.pi = sensitivity(pred.most_likely(i), scene.futures[static_cast<std::size_t>(scene.ego)], cfg.sigma);
    out.agents.push_back(a);
  }
  const double n = static_cast<double>(out.agents.size());
  if (n > 0) {
    for (const auto& a : out.agents) {
      out.summary.ade += a.ade;
      out.summary.fde += a.fde;
      out.summary.mr += a.miss;
      out.summary.orr += a.offroad;
    }
    out.summary.ade /= n;
    out.summary.fde /= n;
    out.summary.mr /= n;
    out.summary.orr /= n;
  }
  out.planning = planning_aware(out.agents);
  return out;
}

double dtw(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidInput("dtw: need >= 2 points per curve");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> D((n + 1) * (m + 1), kInf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return D[i * (m + 1) + j]; };
  at(0, 0) = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = (a[i - 1] - b[j - 1]).norm() +
                 std::min({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1)});
  return at(n, m);
}

double frechet(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidInput("frechet: need >= 2 points per curve");
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> C(n * m);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return C[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double d = (a[i] - b[j]).norm();
      if (i == 0 && j == 0) at(i, j) = d;
      else if (i == 0) at(i, j) = std::max(at(i, j - 1), d);
      else if (j == 0) at(i, j) = std::max(at(i - 1, j), d);
      else at(i, j) = std::max(std::min({at(i - 1, j), at(i, j - 1), at(i - 1, j - 1)}), d);
    }
  return at(n - 1, m - 1);
}

namespace {

constexpr int kAreaSamples = 64;
constexpr int kPcmOffsets = 51;

double triangle_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * std::abs(geom::cross(b - a, c - a));
}

double strip_area(const Path& a, const Path& b) {
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < a.size(); ++i)
    s += triangle_area(a[i], a[i + 1], b[i + 1]) + triangle_area(a[i], b[i + 1], b[i]);
  return s;
}

Path sub_curve(const geom::Polyline& line, double from, double len, int n) {
  Path out;
  for (int k = 0; k < n; ++k) out.push_back(line.at(from + len * k / (n - 1)));
  return out;
}

}  // namespace

double area_between(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidInput("area: need >= 2 points per curve");
  return strip_area(geom::resample(a, kAreaSamples), geom::resample(b, kAreaSamples));
}

double pcm(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidInput("pcm: need >= 2 points per curve");
  double la = geom::path_length(a), lb = geom::path_length(b);
  if (la > lb) {
    std::swap(a, b);
    std::swap(la, lb);
  }
  const Path short_r = geom::resample(a, kAreaSamples);
  if (lb == 0.0) return strip_area(short_r, geom::resample(b, kAreaSamples));
  const geom::Polyline line(Path(b.begin(), b.end()));
  const double slack = lb - la;
  const int offsets = slack > 0 ? kPcmOffsets : 1;
  double best = kInf;
  for (int k = 0; k < offsets; ++k) {
    const double o = offsets > 1 ? slack * k / (offsets - 1) : 0.0;
    Path seg = sub_curve(line, o, la, kAreaSamples);
    if (k == 0) seg.front() = b.front();
    if (k == offsets - 1 && slack == 0) seg.back() = b.back();
    best = std::min(best, strip_area(short_r, seg));
  }
  return best;
}

double curve_length_difference(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidInput("curve length: need >= 2 points per curve");
  return std::abs(geom::path_length(a) - geom::path_length(b));
}

Similarity trajectory_similarity(std::span<const Vec2> a, std::span<const Vec2> b) {
  return {dtw(a, b), frechet(a, b), pcm(a, b), area_between(a, b), curve_length_difference(a, b)};
}

double success_degree(const ErrorSummary& benign, const ErrorSummary& attacked) {
  const double bs[4] = {benign.ade, benign.fde, benign.mr, benign.orr};
  const double as[4] = {attacked.ade, attacked.fde, attacked.mr, attacked.orr};
  double sum = 0.0;
  int n = 0;
  for (int k = 0; k < 4; ++k) {
    if (bs[k] > 0) {
      sum += std::max(0.0, (as[k] - bs[k]) / bs[k]);
      ++n;
    } else if (as[k] == 0) {
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

double transfer_rate(const ErrorSummary& source_benign, const ErrorSummary& source_attacked,
                     const ErrorSummary& target_benign, const ErrorSummary& target_attacked) {
  const double s = success_degree(source_benign, source_attacked);
  if (!(s > 0)) throw UndefinedTransfer("transfer_rate: attack has no effect on the source model");
  return success_degree(target_benign, target_attacked) / s;
}

namespace {

DisplacementError path_change(const Path& a, const Path& b) {
  check_pair(a, b, "motion_interaction_split");
  DisplacementError e;
  for (std::size_t t = 0; t < a.size(); ++t) e.ade += (a[t] - b[t]).norm();
  e.ade /= static_cast<double>(a.size());
  e.fde = (a.back() - b.back()).norm();
  return e;
}

}  // namespace

MotionInteraction motion_interaction_split(const Scene& scene, const Prediction& benign,
                                           const Prediction& adversarial) {
  if (scene.adv < 0 || static_cast<std::size_t>(scene.adv) >= scene.agents())
    throw InvalidInput("motion_interaction_split: adv index out of range");
  const auto adv = static_cast<std::size_t>(scene.adv);
  MotionInteraction out;
  out.motion = path_change(benign.most_likely(adv), adversarial.most_likely(adv));
  std::size_t n = 0;
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    if (i == adv || static_cast<int>(i) == scene.ego) continue;
    const auto e = path_change(benign.most_likely(i), adversarial.most_likely(i));
    out.interaction.ade += e.ade;
    out.interaction.fde += e.fde;
    ++n;
  }
  if (n) {
    out.interaction.ade /= static_cast<double>(n);
    out.interaction.fde /= static_cast<double>(n);
  } else {
    out.interaction_defined = false;
  }
  return out;
}

SceneStats scene_stats(const Scene& scene) {
  SceneStats s;
  if (scene.agents() == 0) return s;
  for (const auto& h : scene.histories) {
    if (h.size() < 3) throw InvalidInput("scene_stats: histories need >= 3 points");
    const auto p = dynamics::inverse(h, scene.dt);
    double v = 0.0, k = 0.0;
    for (double x : p.speed) v += std::abs(x);
    for (double x : p.curvature) k += std::abs(x);
    s.speed += v / static_cast<double>(p.speed.size());
    s.curvature += k / static_cast<double>(p.curvature.size());
  }
  s.speed /= static_cast<double>(scene.agents());
  s.curvature /= static_cast<double>(scene.agents());
  return s;
}

}  // namespace advdo::metrics
