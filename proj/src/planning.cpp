#include "advdo/planning.hpp"

#include "advdo/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace advdo::planning {

using dynamics::ControlAction;
using dynamics::ControlSequence;
using dynamics::DynState;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int steps_of(double seconds, double dt) {
  const double n = seconds / dt;
  const double r = std::round(n);
  if (std::abs(n - r) > 1e-9 || r < 1) throw InvalidInput("time span is not a positive multiple of the step");
  return static_cast<int>(r);
}

geom::OrientedBox box_of(const Pose& p, const Footprint& f, double inflate = 0.0) {
  return {p.position, p.heading, f.length + 2 * inflate, f.width + 2 * inflate};
}

/// Headings from successive displacements; a stationary stretch keeps the last
/// known heading.
std::vector<Pose> poses_of(const Path& path, double fallback_heading) {
  std::vector<Pose> out(path.size());
  double h = fallback_heading;
  for (std::size_t i = 0; i < path.size(); ++i) {
    Vec2 d = Vec2::Zero();
    if (i + 1 < path.size()) d = path[i + 1] - path[i];
    else if (i > 0) d = path[i] - path[i - 1];
    if (d.norm() > 1e-3) h = std::atan2(d.y(), d.x());
    out[i] = {path[i], h};
  }
  return out;
}

double path_curvature(const geom::Polyline& p, double s) {
  constexpr double kSpan = 2.0;
  const Vec2 a = p.tangent(s - kSpan), b = p.tangent(s + kSpan);
  return std::atan2(geom::cross(a, b), a.dot(b)) / (2 * kSpan);
}

using AccelPolicy = std::function<double(const DynState&, double arc)>;

/// Closed-loop tracking of `path` with curvature feedforward and lateral /
/// heading feedback tuned for critical damping at a preview of 5 + 0.5 v m.
Plan track(const PlanRequest& req, const geom::Polyline& path, const AccelPolicy& accel,
           const std::string& name) {
  const int n = steps_of(req.horizon, kControlDt);
  Plan plan;
  plan.planner = name;
  plan.start = req.ego;
  plan.controls.dt = kControlDt;
  DynState s = req.ego;
  for (int k = 0; k < n; ++k) {
    const auto pr = path.project(s.position);
    // Euler steps move along the start-of-step heading, so the heading is
    // referenced to the chord of the coming step.
    const Vec2 t = path.tangent(pr.arc + 0.5 * s.speed * kControlDt);
    const double eh = wrap_angle(s.heading - std::atan2(t.y(), t.x()));
    const double L = 5.0 + 0.5 * s.speed;
    ControlAction c;
    c.curvature = path_curvature(path, pr.arc) - pr.offset / (L * L) - 2.0 * eh / L;
    c.accel = accel(s, pr.arc);
    ControlSequence one{kControlDt, {c}};
    one = dynamics::project_forward(s, one, req.bounds);
    plan.controls.actions.push_back(one.actions[0]);
    s = dynamics::rollout(s, one).back();
  }
  plan.states = dynamics::rollout(plan.start, plan.controls);
  return plan;
}

AccelPolicy cruise(const PlanRequest& req, double gain, double max_accel, double comfort) {
  return [=, v_t = req.target_speed](const DynState& s, double) {
    return std::clamp(gain * (v_t - s.speed), -comfort, max_accel);
  };
}

const Lane& ego_lane(const PlanRequest& req) {
  if (!req.map) throw PlannerError("planner: no map");
  const auto idx = req.map->lane_of(req.ego.position, req.ego.heading);
  if (!idx) throw PlannerError("planner: ego is not associated with a lane");
  return req.map->lanes[*idx];
}

std::vector<Pose> sampled_poses(const Plan& p, double dt) {
  std::vector<Pose> out;
  for (const auto& s : p.sampled(dt)) out.push_back({s.position, s.heading});
  return out;
}

bool overlaps_forecasts(const std::vector<Pose>& ego, const Footprint& fp, double inflate,
                        const PlanRequest& req) {
  for (const auto& a : req.agents) {
    const auto poses = poses_of(a.path, 0.0);
    for (std::size_t j = 0; j < std::min(ego.size(), poses.size()); ++j)
      if (geom::boxes_overlap(box_of(ego[j], fp, inflate), box_of(poses[j], a.footprint))) return true;
  }
  return false;
}

// Any footprint corner off the drivable region.
bool leaves_road(const Plan& p, const Footprint& fp, const MapModel& map) {
  for (const auto& s : p.states)
    for (const auto& c : box_of({s.position, s.heading}, fp, 0.0).corners())
      if (!map.is_drivable(c)) return true;
  return false;
}

}  // namespace

std::vector<DynState> Plan::sampled(double dt) const {
  const int stride = steps_of(dt, controls.dt);
  std::vector<DynState> out;
  for (std::size_t k = static_cast<std::size_t>(stride); k < states.size(); k += static_cast<std::size_t>(stride))
    out.push_back(states[k]);
  return out;
}

// Rule planner -------------------------------------------------------------------

Plan RulePlanner::plan(const PlanRequest& req) const {
  const Lane& lane = ego_lane(req);
  const auto& center = lane.centerline;
  const double s0 = center.project(req.ego.position).arc;
  const double v = req.ego.speed;
  const double le = req.ego_footprint.length;

  double t_conflict = kInf, s_stop = kInf;
  for (const auto& a : req.agents) {
    const double reach = 0.5 * (le + a.footprint.length);
    bool entered = false;
    for (std::size_t j = 0; j < a.path.size(); ++j) {
      const double t = (j + 1) * req.dt;
      if (t > req.horizon + 1e-9) break;
      const auto pr = center.project(a.path[j]);
      if (std::abs(pr.offset) >= 0.5 * (lane.width + a.footprint.width)) continue;
      // Gap to the ego held at its current speed; agents that enter the
      // corridor already behind it are followers.
      const double gap = pr.arc - (s0 + v * t);
      if (!entered && gap <= -reach) break;
      entered = true;
      if (gap <= reach) {
        t_conflict = std::min(t_conflict, t);
        s_stop = std::min(s_stop, pr.arc - reach - cfg_.stop_margin);
        break;
      }
    }
  }

  const double max_decel = -req.bounds.accel.lo;
  AccelPolicy accel;
  if (t_conflict < cfg_.ttc) {
    accel = [=, this](const DynState& s, double arc) {
      const double remaining = s_stop - arc;
      if (s.speed <= 0.0) return 0.0;
      if (remaining <= 0.1) return -max_decel;
      return -std::clamp(s.speed * s.speed / (2 * remaining), cfg_.comfort_decel, max_decel);
    };
  } else {
    accel = cruise(req, cfg_.speed_gain, cfg_.max_accel, cfg_.comfort_decel);
  }
  Plan p = track(req, center, accel, name());
  p.cost = t_conflict < cfg_.ttc ? t_conflict : 0.0;
  return p;
}

// Lattice + MPC -----------------------------------------------------------------

namespace {

geom::Polyline lattice_path(const geom::Polyline& center, double s0, double d0, double offset,
                            double transition, double length) {
  Path pts;
  for (double s = s0 - 5.0; s <= s0 + length; s += 1.0) {
    const double u = std::clamp((s - s0) / transition, 0.0, 1.0);
    const double d = d0 + (offset - d0) * u * u * (3 - 2 * u);
    const Vec2 t = center.tangent(s);
    pts.push_back(center.at(s) + d * Vec2(-t.y(), t.x()));
  }
  return geom::Polyline(std::move(pts));
}

struct MpcProblem {
  DynState start;
  int blocks;
  int per_block;
  dynamics::DynamicBounds bounds;
  std::vector<Vec2> ref_pos;
  std::vector<double> ref_heading;
  std::vector<double> ref_speed;

  static constexpr double wp = 1.0, wh = 4.0, wv = 0.5, wa = 0.05, wk = 400.0;

  ControlSequence expand(const Eigen::VectorXd& z) const {
    ControlSequence u;
    u.dt = kControlDt;
    for (int b = 0; b < blocks; ++b)
      for (int k = 0; k < per_block; ++k) u.actions.push_back({z[2 * b], z[2 * b + 1]});
    return dynamics::project_forward(start, u, bounds);
  }

  Eigen::VectorXd residual(const Eigen::VectorXd& z) const {
    const auto u = expand(z);
    const auto states = dynamics::rollout(start, u);
    Eigen::VectorXd r(blocks * 6);
    for (int b = 0; b < blocks; ++b) {
      const auto& s = states[static_cast<std::size_t>((b + 1) * per_block)];
      const auto& c = u.actions[static_cast<std::size_t>(b * per_block)];
      r.segment<2>(6 * b) = std::sqrt(wp) * (s.position - ref_pos[b]);
      r[6 * b + 2] = std::sqrt(wh) * wrap_angle(s.heading - ref_heading[b]);
      r[6 * b + 3] = std::sqrt(wv) * (s.speed - ref_speed[b]);
      r[6 * b + 4] = std::sqrt(wa) * c.accel;
      r[6 * b + 5] = std::sqrt(wk) * c.curvature;
    }
    return r;
  }
};

/// Gauss-Newton on the block controls, Jacobian by central differences,
/// halving the step until the cost decreases.
Eigen::VectorXd mpc_solve(const MpcProblem& P, Eigen::VectorXd z, int sweeps) {
  const int n = static_cast<int>(z.size());
  Eigen::VectorXd r = P.residual(z);
  double cost = r.squaredNorm();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    Eigen::MatrixXd J(r.size(), n);
    for (int i = 0; i < n; ++i) {
      const double h = (i % 2 == 0) ? 1e-4 : 1e-6;
      Eigen::VectorXd zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      J.col(i) = (P.residual(zp) - P.residual(zm)) / (2 * h);
    }
    Eigen::MatrixXd A = J.transpose() * J;
    A.diagonal().array() += 1e-8 + 1e-6 * A.diagonal().maxCoeff();
    const Eigen::VectorXd dz = -A.ldlt().solve(J.transpose() * r);
    double step = 1.0;
    bool accepted = false;
    for (int tries = 0; tries < 6 && !accepted; ++tries, step *= 0.5) {
      const Eigen::VectorXd zt = z + step * dz;
      const Eigen::VectorXd rt = P.residual(zt);
      if (rt.squaredNorm() < cost) {
        z = zt;
        r = rt;
        cost = rt.squaredNorm();
        accepted = true;
      }
    }
    if (!accepted) break;
  }
  return z;
}

}  // namespace

Plan LatticeMpcPlanner::plan(const PlanRequest& req) const {
  const Lane& lane = ego_lane(req);
  const MapModel& map = *req.map;
  const auto& center = lane.centerline;
  const auto pr0 = center.project(req.ego.position);
  const double reach = std::max(req.target_speed, req.ego.speed) * req.horizon + cfg_.transition + 10.0;
  const AccelPolicy accel = cruise(req, cfg_.speed_gain, cfg_.max_accel, 3.0);

  struct Candidate {
    Plan plan;
    geom::Polyline path;
    double cost;
  };
  std::optional<Candidate> best;
  for (double o : cfg_.offsets) {
    geom::Polyline path = lattice_path(center, pr0.arc, pr0.offset, o, cfg_.transition, reach);
    Plan p = track(req, path, accel, name());
    const auto ego = sampled_poses(p, req.dt);
    if (overlaps_forecasts(ego, req.ego_footprint, cfg_.margin, req) || leaves_road(p, req.ego_footprint, map)) continue;
    Path ego_pos;
    for (const auto& e : ego) ego_pos.push_back(e.position);
    double interaction = 0.0;
    for (const auto& a : req.agents) {
      const std::size_t n = std::min(a.path.size(), ego_pos.size());
      interaction += metrics::interaction_cost(Path(a.path.begin(), a.path.begin() + n),
                                               Path(ego_pos.begin(), ego_pos.begin() + n), cfg_.sigma);
    }
    double effort = 0.0;
    for (const auto& c : p.controls.actions) effort += c.curvature * c.curvature;
    effort /= static_cast<double>(p.controls.size());
    const double cost = cfg_.w_offset * o * o + cfg_.w_effort * effort * 100.0 +
                        cfg_.w_interaction * interaction;
    if (!best || cost < best->cost) {
      p.offset = o;
      p.cost = cost;
      best = Candidate{std::move(p), std::move(path), cost};
    }
  }

  if (!best) {
    Plan p = track(req, lattice_path(center, pr0.arc, pr0.offset, pr0.offset, cfg_.transition, reach),
                   [lo = req.bounds.accel.lo](const DynState&, double) { return lo; }, name());
    p.emergency = true;
    p.offset = pr0.offset;
    p.cost = kInf;
    return p;
  }

  // MPC refinement of the tracked candidate.
  MpcProblem P;
  P.start = req.ego;
  P.blocks = cfg_.mpc_steps;
  P.per_block = steps_of(cfg_.mpc_dt, kControlDt);
  P.bounds = req.bounds;
  if (P.blocks * P.per_block > static_cast<int>(best->plan.controls.size()))
    throw InvalidInput("lattice-mpc: MPC horizon exceeds the plan horizon");
  Eigen::VectorXd z(2 * P.blocks);
  for (int b = 0; b < P.blocks; ++b) {
    double a = 0, k = 0;
    for (int j = 0; j < P.per_block; ++j) {
      a += best->plan.controls.actions[static_cast<std::size_t>(b * P.per_block + j)].accel;
      k += best->plan.controls.actions[static_cast<std::size_t>(b * P.per_block + j)].curvature;
    }
    z[2 * b] = a / P.per_block;
    z[2 * b + 1] = k / P.per_block;
    const auto& s = best->plan.states[static_cast<std::size_t>((b + 1) * P.per_block)];
    const auto pr = best->path.project(s.position);
    const Vec2 t = best->path.tangent(pr.arc);
    P.ref_pos.push_back(pr.point);
    P.ref_heading.push_back(std::atan2(t.y(), t.x()));
    P.ref_speed.push_back(s.speed);
  }
  // Cost of the tracked plan on the block grid, for comparison.
  Eigen::VectorXd r(P.blocks * 6);
  for (int b = 0; b < P.blocks; ++b) {
    const auto& s = best->plan.states[static_cast<std::size_t>((b + 1) * P.per_block)];
    r.segment<2>(6 * b) = std::sqrt(MpcProblem::wp) * (s.position - P.ref_pos[b]);
    r[6 * b + 2] = std::sqrt(MpcProblem::wh) * wrap_angle(s.heading - P.ref_heading[b]);
    r[6 * b + 3] = 0.0;
    r[6 * b + 4] = std::sqrt(MpcProblem::wa) * z[2 * b];
    r[6 * b + 5] = std::sqrt(MpcProblem::wk) * z[2 * b + 1];
  }
  const Eigen::VectorXd zs = mpc_solve(P, z, cfg_.sweeps);
  if (P.residual(zs).squaredNorm() < r.squaredNorm()) {
    Plan m = best->plan;
    ControlSequence u = P.expand(zs);
    // Past the MPC horizon the tracked controls continue.
    for (std::size_t k = u.size(); k < best->plan.controls.size(); ++k)
      u.actions.push_back(best->plan.controls.actions[k]);
    m.controls = dynamics::project_forward(req.ego, u, req.bounds);
    m.states = dynamics::rollout(req.ego, m.controls);
    if (!overlaps_forecasts(sampled_poses(m, req.dt), req.ego_footprint, 0.0, req) && !leaves_road(m, req.ego_footprint, map))
      return m;
  }
  return best->plan;
}

PlannerKind planner_from_string(const std::string& s) {
  if (s == "rule") return PlannerKind::Rule;
  if (s == "lattice-mpc" || s == "lattice") return PlannerKind::LatticeMpc;
  throw InvalidInput("unknown planner '" + s + "' (expected rule or lattice-mpc)");
}

std::string to_string(PlannerKind k) { return k == PlannerKind::Rule ? "rule" : "lattice-mpc"; }

std::unique_ptr<Planner> make_planner(PlannerKind k) {
  if (k == PlannerKind::Rule) return std::make_unique<RulePlanner>();
  return std::make_unique<LatticeMpcPlanner>();
}

// Events ---------------------------------------------------------------------------

std::vector<CollisionEvent> detect_collision(const std::vector<Pose>& ego, const Footprint& ego_fp,
                                             const std::vector<std::vector<Pose>>& agents,
                                             const std::vector<Footprint>& footprints) {
  std::vector<CollisionEvent> out;
  for (std::size_t k = 0; k < ego.size(); ++k)
    for (std::size_t i = 0; i < agents.size(); ++i) {
      if (k >= agents[i].size()) continue;
      const Footprint f = i < footprints.size() ? footprints[i] : Footprint{};
      if (geom::boxes_overlap(box_of(ego[k], ego_fp), box_of(agents[i][k], f)))
        out.push_back({static_cast<int>(k), static_cast<int>(i)});
    }
  return out;
}

std::vector<int> detect_offroad(const std::vector<Pose>& ego, const MapModel& map) {
  std::vector<int> out;
  for (std::size_t k = 0; k < ego.size(); ++k)
    if (!map.is_drivable(ego[k].position)) out.push_back(static_cast<int>(k));
  return out;
}

// Simulation ---------------------------------------------------------------------

void Episode::validate() const {
  if (!(dt > 0)) throw InvalidInput("episode: dt must be > 0");
  if (history < 2) throw InvalidInput("episode: history must be >= 2");
  if (logs.empty()) throw InvalidInput("episode: no agents");
  if (ego < 0 || static_cast<std::size_t>(ego) >= logs.size()) throw InvalidInput("episode: ego index out of range");
  if (adv < 0 || static_cast<std::size_t>(adv) >= logs.size() || adv == ego)
    throw InvalidInput("episode: adv index must name a non-ego agent");
  if (start < history - 1) throw InvalidInput("episode: start leaves fewer than `history` observations");
  for (const auto& l : logs) {
    if (l.size() != logs.front().size()) throw InvalidInput("episode: logs differ in length");
    if (!all_finite(l)) throw InvalidInput("episode: non-finite log position");
  }
  if (!footprints.empty() && footprints.size() != logs.size())
    throw InvalidInput("episode: footprints must be empty or one per agent");
}

SimMode sim_mode_from_string(const std::string& s) {
  if (s == "open") return SimMode::Open;
  if (s == "closed") return SimMode::Closed;
  throw InvalidInput("unknown simulation mode '" + s + "' (expected open or closed)");
}

std::string to_string(SimMode m) { return m == SimMode::Open ? "open" : "closed"; }

void SimConfig::validate(double dt) const {
  steps_of(duration, kControlDt);
  steps_of(dt, kControlDt);
  if (mode == SimMode::Closed) {
    steps_of(replan, dt);
    steps_of(duration, replan);
  }
  if (prediction_horizon < 1) throw InvalidInput("simulate: prediction horizon must be >= 1");
  bounds.validate();
  if (attack) attack->validate();
}

namespace {

Pose interpolate_pose(const std::vector<Pose>& poses, double u) {
  const std::size_t i = std::min(static_cast<std::size_t>(std::floor(u)), poses.size() - 1);
  if (i + 1 >= poses.size()) return poses.back();
  const double f = u - static_cast<double>(i);
  return {poses[i].position + f * (poses[i + 1].position - poses[i].position), poses[i].heading};
}

}  // namespace

SimOutcome simulate(const Episode& ep, const MapModel& map, const predictors::PredictionModel& model,
                    const Planner& planner, const SimConfig& cfg) {
  ep.validate();
  cfg.validate(ep.dt);
  const int H = ep.history, T = cfg.prediction_horizon;
  const int stride = steps_of(ep.dt, kControlDt);
  const int total = steps_of(cfg.duration, kControlDt);
  const int replan_stride = cfg.mode == SimMode::Closed ? steps_of(cfg.replan, kControlDt) : total;
  const int frames = total / stride;
  const int lp = cfg.attack ? cfg.attack->lp : 1;
  const int needed = std::max(ep.start + frames + 1, ep.start + (total - replan_stride) / stride + T + 1);
  const int needed_attack = cfg.attack ? ep.start + lp - 1 + T + 1 : 0;
  if (static_cast<int>(ep.logs.front().size()) < std::max(needed, needed_attack))
    throw InvalidInput("simulate: logs too short for the duration and prediction horizon");

  const std::size_t N = ep.agents();
  const auto ego_idx = static_cast<std::size_t>(ep.ego);
  std::vector<Path> logs = ep.logs;
  SimOutcome out;

  auto make_scene = [&](int m, int len, int fut) {
    Scene s;
    s.dt = ep.dt;
    s.horizon = fut;
    s.adv = ep.adv;
    s.ego = ep.ego;
    s.footprints = ep.footprints;
    s.ids = ep.ids;
    s.map_ref = ep.map_ref;
    for (std::size_t i = 0; i < N; ++i) {
      s.histories.emplace_back(logs[i].begin() + (m - len + 1), logs[i].begin() + m + 1);
      s.futures.emplace_back(logs[i].begin() + m + 1, logs[i].begin() + m + 1 + fut);
    }
    return s;
  };

  if (cfg.attack) {
    Scene s = make_scene(ep.start + lp - 1, H + lp - 1, T);
    const auto r = attack::attack_sequential(s, H, model, *cfg.attack);
    const auto adv = static_cast<std::size_t>(ep.adv);
    std::copy(r.history.begin(), r.history.end(), logs[adv].begin() + (ep.start - H + 1));
    out.attacked = true;
    out.attack_deviation = r.max_knot_deviation;
    out.adversarial_history = r.history;
  }

  // Ego initial state from the last logged displacement.
  DynState state;
  {
    const Vec2 d = ep.logs[ego_idx][ep.start] - ep.logs[ego_idx][ep.start - 1];
    state.position = ep.logs[ego_idx][ep.start];
    state.heading = std::atan2(d.y(), d.x());
    state.speed = cfg.bounds.speed.clamp(d.norm() / ep.dt);
  }
  const double target = ep.target_speed >= 0 ? ep.target_speed : state.speed;
  out.ego.push_back(state);

  Plan plan;
  std::size_t plan_step = 0;
  for (int step = 0; step < total; ++step) {
    if (step % replan_stride == 0) {
      const int m = ep.start + step / stride;
      Scene s = make_scene(m, H, T);
      // The ego's observed history is its simulated past.
      for (int j = 0; j < H; ++j) {
        const int frame = m - H + 1 + j;
        if (frame > ep.start)
          s.histories[ego_idx][static_cast<std::size_t>(j)] =
              out.ego[static_cast<std::size_t>((frame - ep.start) * stride)].position;
      }
      const Prediction pred = model.predict(s);
      PlanRequest req;
      req.ego = state;
      req.ego_footprint = ep.footprint(ego_idx);
      req.map = &map;
      req.dt = ep.dt;
      req.horizon = T * ep.dt;
      req.target_speed = target;
      req.bounds = cfg.bounds;
      for (std::size_t i = 0; i < N; ++i) {
        if (i == ego_idx) continue;
        req.agents.push_back({static_cast<int>(i), pred.most_likely(i), ep.footprint(i)});
      }
      try {
        plan = planner.plan(req);
      } catch (const PlannerError& e) {
        out.error = e.what();
        break;
      }
      plan_step = 0;
      ++out.replans;
      out.emergency_plans += plan.emergency;
    }
    ControlSequence one{kControlDt, {}};
    one.actions.push_back(plan_step < plan.controls.size() ? plan.controls.actions[plan_step] : ControlAction{});
    ++plan_step;
    one = dynamics::project_forward(state, one, cfg.bounds);
    state = dynamics::rollout(state, one).back();
    out.ego.push_back(state);
  }

  std::vector<Pose> ego_poses;
  for (const auto& s : out.ego) ego_poses.push_back({s.position, s.heading});
  std::vector<std::vector<Pose>> tracks(N);
  std::vector<Footprint> fps(N);
  for (std::size_t i = 0; i < N; ++i) {
    fps[i] = ep.footprint(i);
    if (i == ego_idx) continue;
    const Path tail(logs[i].begin() + ep.start, logs[i].end());
    const Vec2 d0 = logs[i][ep.start] - logs[i][ep.start - 1];
    const auto poses = poses_of(tail, std::atan2(d0.y(), d0.x()));
    for (std::size_t k = 0; k < ego_poses.size(); ++k)
      tracks[i].push_back(interpolate_pose(poses, static_cast<double>(k) / stride));
  }
  out.collisions = detect_collision(ego_poses, ep.footprint(ego_idx), tracks, fps);
  out.offroad = detect_offroad(ego_poses, map);
  return out;
}

Prediction OraclePredictor::predict(const Scene& scene) const {
  if (!scene.has_futures()) throw InvalidInput("oracle predictor: scene has no futures");
  Prediction p;
  p.modes.push_back(scene.futures);
  p.probs.push_back(std::vector<double>(scene.agents(), 1.0));
  return p;
}

HistoryGrad OraclePredictor::pullback(const Scene& scene, const PredictionCotangent&) const {
  return zero_history_grad(scene);
}

}  // namespace advdo::planning
