#include "advdo/synth.hpp"

#include "advdo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

namespace advdo::synth {

using dynamics::ControlAction;
using dynamics::ControlSequence;
using dynamics::DynState;

std::string to_string(Template t) {
  switch (t) {
    case Template::LaneFollow: return "lane-follow";
    case Template::Turn: return "turn";
    case Template::Cross: return "cross";
    case Template::Stop: return "stop";
  }
  return "?";
}

Template template_from_string(const std::string& s) {
  for (Template t : {Template::LaneFollow, Template::Turn, Template::Cross, Template::Stop})
    if (to_string(t) == s) return t;
  throw InvalidInput("unknown scene template '" + s + "' (expected lane-follow, turn, cross or stop)");
}

std::vector<Template> templates_from_list(const std::string& csv) {
  std::vector<Template> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(template_from_string(item));
  if (out.empty()) throw InvalidInput("empty template list");
  return out;
}

void SynthConfig::validate() const {
  if (count < 1) throw InvalidInput("synth: count must be >= 1");
  if (!(dt > 0)) throw InvalidInput("synth: dt must be > 0");
  if (history < 2) throw InvalidInput("synth: history must be >= 2");
  if (horizon < 1) throw InvalidInput("synth: horizon must be >= 1");
  if (factor < 1) throw InvalidInput("synth: factor must be >= 1");
  if (min_agents < 2 || max_agents < min_agents) throw InvalidInput("synth: need 2 <= min_agents <= max_agents");
  if (templates.empty()) throw InvalidInput("synth: no templates");
}

MapModel plus_intersection() {
  const double w = kLaneWidth, L = kArmLength, c = kChamfer;
  MapModel m;
  m.id = "plus";
  m.drivable.push_back({{L, -w},
                        {L, w},
                        {w + c, w},
                        {w, w + c},
                        {w, L},
                        {-w, L},
                        {-w, w + c},
                        {-w - c, w},
                        {-L, w},
                        {-L, -w},
                        {-w - c, -w},
                        {-w, -w - c},
                        {-w, -L},
                        {w, -L},
                        {w, -w - c},
                        {w + c, -w}});
  const double o = w / 2;
  m.lanes.push_back({"E", geom::Polyline({{-L, -o}, {L, -o}}), w});
  m.lanes.push_back({"W", geom::Polyline({{L, o}, {-L, o}}), w});
  m.lanes.push_back({"N", geom::Polyline({{o, -L}, {o, L}}), w});
  m.lanes.push_back({"S", geom::Polyline({{-o, L}, {-o, -L}}), w});
  m.validate();
  return m;
}

Template template_of(const std::string& scene_name) {
  const auto dash = scene_name.find('-');
  if (dash == std::string::npos) throw InvalidInput("scene name '" + scene_name + "' carries no template");
  return template_from_string(scene_name.substr(dash + 1));
}

namespace {

// Every agent is generated in a canonical frame, driving east on the lane at
// y = -w/2, then rotated by a multiple of 90 degrees. The rotation is exact so
// straight agents stay exactly on their lane.
Vec2 rotate(const Vec2& p, int quarter) {
  switch (quarter & 3) {
    case 0: return p;
    case 1: return {-p.y(), p.x()};
    case 2: return {-p.x(), -p.y()};
    default: return {p.y(), -p.x()};
  }
}

struct Motion {
  Template kind;
  Path dense;  // canonical frame, dt / factor apart
};

class Generator {
 public:
  Generator(const SynthConfig& cfg, std::uint64_t stream) : cfg_(cfg), rng_(stream) {
    steps_ = (cfg.history + cfg.horizon - 1) * cfg.factor;
    h_ = cfg.dt / cfg.factor;
    duration_ = steps_ * h_;
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }

  Path roll(const DynState& s0, const std::vector<ControlAction>& u) const {
    ControlSequence seq;
    seq.dt = h_;
    seq.actions = u;
    return dynamics::positions_of(dynamics::rollout(s0, seq));
  }

  DynState canonical_start(double x) const { return DynState{{x, -kLaneWidth / 2}, 0.0, 0.0}; }

  // Constant acceleration, held at the speed floor once reached.
  Path straight(double x0, double v0, double a, double v_floor = 1.0, double v_cap = 15.0) const {
    DynState s = canonical_start(x0);
    s.speed = v0;
    std::vector<ControlAction> u(steps_);
    double v = v0;
    for (auto& c : u) {
      double acc = a;
      if (v + acc * h_ < v_floor) acc = (v_floor - v) / h_;
      if (v + acc * h_ > v_cap) acc = (v_cap - v) / h_;
      if (v <= v_floor && a < 0) acc = 0.0;
      c.accel = acc;
      v += acc * h_;
    }
    return roll(s, u);
  }

  // Cruise, then a constant deceleration that ends exactly at rest.
  Path stop(double x0, double v0, double brake_time, double decel) const {
    DynState s = canonical_start(x0);
    s.speed = v0;
    std::vector<ControlAction> u(steps_);
    double v = v0;
    for (int k = 0; k < steps_; ++k) {
      double acc = 0.0;
      if (k * h_ >= brake_time) acc = v > decel * h_ ? -decel : -v / h_;
      u[k].accel = acc;
      v += acc * h_;
    }
    return roll(s, u);
  }

  // Constant speed with a 90 degree turn starting at turn_time; left > 0.
  Path turn(double x0, double v, double turn_time, double radius, bool left) const {
    DynState s = canonical_start(x0);
    s.speed = v;
    const int n = std::max(1, static_cast<int>(std::lround(std::numbers::pi / 2 * radius / (v * h_))));
    const double kappa = (left ? 1.0 : -1.0) * (std::numbers::pi / 2) / (n * v * h_);
    std::vector<ControlAction> u(steps_);
    const int k0 = static_cast<int>(std::lround(turn_time / h_));
    for (int k = k0; k < std::min(steps_, k0 + n); ++k) u[k].curvature = kappa;
    return roll(s, u);
  }

  Motion make(Template kind, bool near_intersection) {
    const double reach = near_intersection ? 25.0 : 70.0;
    switch (kind) {
      case Template::Turn: {
        const bool left = pick(2) == 1;
        const double v = uniform(3.0, 6.0);
        const double radius = left ? uniform(7.0, 9.5) : uniform(7.0, 7.8);
        // Euler arcs are traced from the chord midpoints; starting half a
        // step early centers them on the continuous arc.
        const double x_turn = (left ? kLaneWidth / 2 : -kLaneWidth / 2) - radius - 0.5 * v * h_;
        const double t_turn = uniform(0.0, 3.0);
        return {kind, turn(x_turn - v * t_turn, v, t_turn, radius, left)};
      }
      case Template::Stop: {
        const double v0 = uniform(4.0, 10.0);
        const double decel = uniform(1.5, 3.5);
        const double stop_line = -kLaneWidth - kChamfer - 1.0;
        const double brake_time = uniform(0.0, 2.5);
        const double x0 = stop_line - v0 * brake_time - v0 * v0 / (2 * decel);
        return {kind, stop(x0, v0, brake_time, decel)};
      }
      case Template::LaneFollow:
      case Template::Cross:
      default: {
        const double v0 = uniform(4.0, 12.0);
        const double a = uniform(-0.8, 0.8);
        const double x0 = uniform(-reach - v0 * duration_ / 2, reach - v0 * duration_ / 2);
        return {kind, straight(x0, v0, a)};
      }
    }
  }

  Path knots(const Path& dense, int quarter) const {
    Path out;
    for (std::size_t k = 0; k < dense.size(); k += static_cast<std::size_t>(cfg_.factor))
      out.push_back(rotate(dense[k], quarter));
    return out;
  }

  bool inside(const Path& p) const {
    const double lim = kArmLength - 5.0;
    for (const auto& v : p)
      if (std::abs(v.x()) > lim || std::abs(v.y()) > lim) return false;
    return true;
  }

  bool separated(const Path& p, const std::vector<Path>& others) const {
    for (const auto& o : others)
      for (std::size_t k = 0; k < p.size(); ++k)
        if ((p[k] - o[k]).norm() < cfg_.min_gap) return false;
    return true;
  }

  // Agent 0 is the ego; agent `adv` carries the scene template.
  bool scene(Template kind, std::vector<Path>& tracks, int& adv) {
    const int n = cfg_.min_agents + pick(cfg_.max_agents - cfg_.min_agents + 1);
    adv = 1 + pick(n - 1);
    const int ego_q = pick(4);
    tracks.clear();
    for (int i = 0; i < n; ++i) {
      bool placed = false;
      for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
        Template k = Template::LaneFollow;
        int q = pick(4);
        if (kind == Template::LaneFollow) q = (ego_q + 2 * pick(2)) & 3;
        if (i == 0) q = ego_q;
        if (i == adv) {
          k = kind;
          if (kind == Template::Cross) q = (ego_q + 1 + 2 * pick(2)) & 3;
        } else if (kind == Template::Stop && pick(3) == 0) {
          k = Template::Stop;
        }
        const Motion m = make(k, i == 0 || i == adv);
        Path p = knots(m.dense, q);
        if (!inside(p) || !separated(p, tracks)) continue;
        tracks.push_back(std::move(p));
        placed = true;
      }
      if (!placed) return false;
    }
    return true;
  }

 private:
  const SynthConfig& cfg_;
  std::mt19937_64 rng_;
  int steps_;
  double h_;
  double duration_;
};

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

io::ScenarioFile synthesize_scenes(const SynthConfig& cfg) {
  cfg.validate();
  io::ScenarioFile f;
  f.dt = cfg.dt;
  f.history = cfg.history;
  f.horizon = cfg.horizon;
  f.map = cfg.map;
  for (int i = 0; i < cfg.count; ++i) {
    Generator g(cfg, splitmix(cfg.seed ^ splitmix(static_cast<std::uint64_t>(i))));
    const Template kind = cfg.templates[static_cast<std::size_t>(g.pick(static_cast<int>(cfg.templates.size())))];
    std::vector<Path> tracks;
    int adv = 1;
    int tries = 0;
    while (!g.scene(kind, tracks, adv))
      if (++tries == 1000) throw Error("synth: cannot place agents with the requested gap");
    Scene s;
    s.dt = cfg.dt;
    s.horizon = cfg.horizon;
    s.ego = 0;
    s.adv = adv;
    s.map_ref = cfg.map;
    for (std::size_t a = 0; a < tracks.size(); ++a) {
      s.histories.emplace_back(tracks[a].begin(), tracks[a].begin() + cfg.history);
      s.futures.emplace_back(tracks[a].begin() + cfg.history, tracks[a].end());
      s.ids.push_back("a" + std::to_string(a));
      s.footprints.push_back(Footprint{});
    }
    s.validate();
    char name[32];
    std::snprintf(name, sizeof(name), "%04d", i);
    f.names.push_back(std::string(name) + "-" + to_string(kind));
    f.scenes.push_back(std::move(s));
  }
  return f;
}


MapModel two_way_road(double lane_width, double length) {
  const double w = lane_width, L = length;
  MapModel m;
  m.id = "two-way";
  m.drivable.push_back({{-L, -w}, {L, -w}, {L, w}, {-L, w}});
  m.lanes.push_back({"E", geom::Polyline({{-L, -w / 2}, {L, -w / 2}}), w});
  m.lanes.push_back({"W", geom::Polyline({{L, w / 2}, {-L, w / 2}}), w});
  m.validate();
  return m;
}

void EpisodeSynthConfig::validate() const {
  if (!(lane_width > 0)) throw InvalidInput("episodes: lane width must be > 0");
  if (count < 1) throw InvalidInput("episodes: count must be >= 1");
  if (history < 2) throw InvalidInput("episodes: history must be >= 2");
  if (!(dt > 0)) throw InvalidInput("episodes: dt must be > 0");
  if (frames < history + 1) throw InvalidInput("episodes: frames must exceed history");
}

EpisodeFamily family_of(const planning::Episode& ep) {
  return ep.agents() > 3 ? EpisodeFamily::OncomingWithLead : EpisodeFamily::Oncoming;
}

std::vector<planning::Episode> closed_loop_episodes(const EpisodeSynthConfig& cfg) {
  cfg.validate();
  std::vector<planning::Episode> out;
  const double lane = cfg.lane_width / 2;
  for (int i = 0; i < cfg.count; ++i) {
    std::mt19937_64 rng(splitmix(cfg.seed ^ splitmix(0xe915ULL + static_cast<std::uint64_t>(i))));
    auto U = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const EpisodeFamily fam = i % 2 == 0 ? EpisodeFamily::Oncoming : EpisodeFamily::OncomingWithLead;
    planning::Episode e;
    char name[48];
    std::snprintf(name, sizeof(name), "%02d-%s", i, fam == EpisodeFamily::Oncoming ? "oncoming" : "oncoming-lead");
    e.id = name;
    e.dt = cfg.dt;
    e.history = cfg.history;
    e.start = cfg.history - 1;
    e.ego = 0;
    e.adv = 2;
    e.map_ref = cfg.map;
    auto track = [&](const Vec2& p0, const Vec2& vel) {
      Path p;
      for (int k = 0; k < cfg.frames; ++k) p.push_back(p0 + vel * ((k - e.start) * cfg.dt));
      return p;
    };
    const double v = U(8.0, 12.0);
    const double x0 = U(-75.0, -65.0);
    const double gap = U(7.0, 9.0);  // follower center distance
    const double va = U(8.0, 12.0);
    const double meet = U(2.5, 4.5);
    e.logs.push_back(track({x0, -lane}, {v, 0.0}));
    e.logs.push_back(track({x0 - gap, -lane}, {v, 0.0}));
    e.logs.push_back(track({x0 + (v + va) * meet, lane + U(-0.3, 0.3)}, {-va, 0.0}));
    e.ids = {"ego", "follower", "adv"};
    if (fam == EpisodeFamily::OncomingWithLead) {
      e.logs.push_back(track({x0 + U(35.0, 45.0), -lane}, {v, 0.0}));
      e.ids.push_back("lead");
    }
    e.footprints.assign(e.ids.size(), Footprint{});
    e.validate();
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace advdo::synth
