#include "advdo/synth.hpp"

#include "advdo/dynamics.hpp"
#include "advdo/metrics.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>

using namespace advdo;
using synth::Template;

namespace {

Path full_track(const Scene& s, std::size_t a) {
  Path p = s.histories[a];
  p.insert(p.end(), s.futures[a].begin(), s.futures[a].end());
  return p;
}

}  // namespace

TEST_CASE("same seed gives identical files, different seed does not") {
  synth::SynthConfig cfg;
  cfg.count = 20;
  cfg.seed = 42;
  const std::string a = io::to_json(synth::synthesize_scenes(cfg));
  const std::string b = io::to_json(synth::synthesize_scenes(cfg));
  CHECK(a == b);
  cfg.seed = 43;
  CHECK(io::to_json(synth::synthesize_scenes(cfg)) != a);
}

TEST_CASE("scene i does not depend on the count") {
  synth::SynthConfig cfg;
  cfg.count = 5;
  cfg.seed = 7;
  const auto few = synth::synthesize_scenes(cfg);
  cfg.count = 12;
  const auto many = synth::synthesize_scenes(cfg);
  for (std::size_t i = 0; i < few.scenes.size(); ++i) {
    CHECK(few.names[i] == many.names[i]);
    CHECK(few.scenes[i].histories == many.scenes[i].histories);
  }
}

TEST_CASE("straight-template scenes have zero curvature everywhere") {
  synth::SynthConfig cfg;
  cfg.count = 30;
  cfg.seed = 5;
  cfg.templates = {Template::LaneFollow};
  const auto f = synth::synthesize_scenes(cfg);
  for (const auto& s : f.scenes)
    for (std::size_t a = 0; a < s.agents(); ++a) {
      const auto p = dynamics::inverse(full_track(s, a), s.dt);
      for (double k : p.curvature) CHECK(k == 0.0);
    }
}

TEST_CASE("100 scenes satisfy the scene invariants and have VR = 0") {
  synth::SynthConfig cfg;
  cfg.count = 100;
  cfg.seed = 2024;
  const auto f = synth::synthesize_scenes(cfg);
  REQUIRE(f.scenes.size() == 100);
  CHECK_NOTHROW(f.validate());
  const MapModel map = synth::plus_intersection();
  const dynamics::DynamicBounds bounds;
  std::vector<Path> histories;
  std::map<Template, int> kinds;
  for (std::size_t i = 0; i < f.scenes.size(); ++i) {
    const Scene& s = f.scenes[i];
    ++kinds[synth::template_of(f.names[i])];
    CHECK(s.ego == 0);
    CHECK(s.adv != 0);
    CHECK(s.agents() >= 3);
    CHECK(s.agents() <= 6);
    for (std::size_t a = 0; a < s.agents(); ++a) {
      histories.push_back(s.histories[a]);
      for (const auto& p : full_track(s, a)) CHECK(map.is_drivable(p));
      for (std::size_t b = a + 1; b < s.agents(); ++b)
        for (std::size_t k = 0; k < s.history_length(); ++k)
          CHECK((s.histories[a][k] - s.histories[b][k]).norm() >= cfg.min_gap);
    }
  }
  CHECK(metrics::violation_rate(histories, f.dt, bounds) == 0.0);
  CHECK(kinds.size() == 4);
}

TEST_CASE("turning agents turn through ninety degrees within the curvature limit") {
  synth::SynthConfig cfg;
  cfg.count = 30;
  cfg.seed = 9;
  cfg.templates = {Template::Turn};
  const auto f = synth::synthesize_scenes(cfg);
  int turned = 0;
  for (const auto& s : f.scenes) {
    const Path p = full_track(s, static_cast<std::size_t>(s.adv));
    const auto d = dynamics::inverse(p, s.dt);
    for (double k : d.curvature) CHECK(std::abs(k) <= 0.15 + 1e-9);
    for (double v : d.speed) CHECK(v <= 6.0 + 1e-9);
    const double turn = std::abs(wrap_angle(d.heading.back() - d.heading.front()));
    if (turn > 1.2) ++turned;
  }
  CHECK(turned > 10);
}

TEST_CASE("plus intersection map") {
  const MapModel m = synth::plus_intersection();
  CHECK(m.is_drivable({0, 0}));
  CHECK(m.is_drivable({90, 1.75}));
  CHECK(m.is_drivable({-1.75, -90}));
  CHECK_FALSE(m.is_drivable({10, 10}));
  CHECK_FALSE(m.is_drivable({-20, -5}));
  REQUIRE(m.lane_of({20, -1.75}, 0.0).has_value());
  CHECK(m.lanes[*m.lane_of({20, -1.75}, 0.0)].id == "E");
  CHECK(m.lanes[*m.lane_of({1.75, 30}, 1.5707963)].id == "N");
  CHECK(m.lanes[*m.lane_of({-30, 1.75}, 3.14159)].id == "W");
}

TEST_CASE("template names parse and unknown ones are rejected") {
  CHECK(synth::templates_from_list("turn,stop") == std::vector<Template>{Template::Turn, Template::Stop});
  CHECK_THROWS_AS(synth::templates_from_list("turn,uturn"), InvalidInput);
  synth::SynthConfig cfg;
  cfg.count = 0;
  CHECK_THROWS_AS(synth::synthesize_scenes(cfg), InvalidInput);
}

TEST_CASE("closed-loop episodes: families, layout and benign safety with perfect prediction") {
  synth::EpisodeSynthConfig cfg;
  const auto eps = synth::closed_loop_episodes(cfg);
  REQUIRE(eps.size() == 10);
  CHECK(io::to_json(io::EpisodeFile{cfg.map, eps}) == io::to_json(io::EpisodeFile{cfg.map, synth::closed_loop_episodes(cfg)}));
  const MapModel road = synth::two_way_road(cfg.lane_width);
  const planning::OraclePredictor oracle;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    const auto& e = eps[i];
    CHECK_NOTHROW(e.validate());
    CHECK(synth::family_of(e) == (i % 2 ? synth::EpisodeFamily::OncomingWithLead : synth::EpisodeFamily::Oncoming));
    const auto k = static_cast<std::size_t>(e.start);
    CHECK(e.logs[e.ego][k].y() < 0.0);
    CHECK(e.logs[e.adv][k].y() > 0.0);
    CHECK(e.logs[e.adv][k].x() > e.logs[e.ego][k].x());
    CHECK(e.logs[1][k].x() < e.logs[e.ego][k].x());
    for (const auto& log : e.logs)
      for (const auto& p : log) CHECK(road.is_drivable(p));
    for (auto kind : {planning::PlannerKind::Rule, planning::PlannerKind::LatticeMpc}) {
      const auto out = planning::simulate(e, road, oracle, *planning::make_planner(kind), planning::SimConfig{});
      CHECK_MESSAGE(!out.failed(), e.id, " ", planning::to_string(kind));
    }
  }
}
