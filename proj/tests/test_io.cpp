#include "advdo/io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>

using namespace advdo;
namespace fs = std::filesystem;

namespace {

const std::string kData = TEST_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("advdo_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

std::string minimal(const std::string& history_field, const std::string& agents) {
  return R"({"format": "advdo-scenario/1", "dt": 0.5, "history": )" + history_field +
         R"(, "horizon": 1, "scenes": [{"id": "s", "adv": "a", "ego": "b", "agents": )" + agents + "}]}";
}

const std::string kTwoAgents =
    R"([{"id": "a", "history": [[0, 0], [1, 0]], "future": [[2, 0]]},
        {"id": "b", "history": [[0, 5], [1, 5]], "future": [[2, 5]]}])";

void require_same(const io::ScenarioFile& a, const io::ScenarioFile& b) {
  REQUIRE(a.scenes.size() == b.scenes.size());
  CHECK(a.names == b.names);
  CHECK(a.dt == b.dt);
  CHECK(a.history == b.history);
  CHECK(a.horizon == b.horizon);
  CHECK(a.map == b.map);
  for (std::size_t i = 0; i < a.scenes.size(); ++i) {
    const Scene &x = a.scenes[i], &y = b.scenes[i];
    CHECK(x.adv == y.adv);
    CHECK(x.ego == y.ego);
    CHECK(x.ids == y.ids);
    REQUIRE(x.agents() == y.agents());
    for (std::size_t k = 0; k < x.agents(); ++k) {
      CHECK(x.histories[k] == y.histories[k]);
      CHECK(x.futures[k] == y.futures[k]);
      CHECK(x.footprint(k).length == y.footprint(k).length);
      CHECK(x.footprint(k).width == y.footprint(k).width);
    }
  }
}

}  // namespace

TEST_CASE("shipped fixture loads with declared N, H, T") {
  const auto f = io::load_scenario(kData + "/two_scenes.scenario.json");
  REQUIRE(f.scenes.size() == 2);
  CHECK(f.history == 4);
  CHECK(f.horizon == 3);
  CHECK(f.names == std::vector<std::string>{"follow", "pass"});
  CHECK(f.scenes[0].agents() == 3);
  CHECK(f.scenes[1].agents() == 2);
  for (const auto& s : f.scenes) {
    CHECK(s.history_length() == 4);
    for (const auto& fu : s.futures) CHECK(fu.size() == 3);
  }
  CHECK(f.scenes[0].ids[static_cast<std::size_t>(f.scenes[0].adv)] == "lead");
  CHECK(f.scenes[1].footprint(1).length == 8.0);
  const auto m = io::load_map(io::resolve(kData + "/two_scenes.scenario.json", f.map));
  CHECK(m.lanes.size() == 2);
  CHECK(m.is_drivable({0, 0}));
}

TEST_CASE("H = 1 is rejected naming the invariant") {
  const std::string msg = error_of([] { io::parse_scenario(minimal("1", kTwoAgents), "h1.json"); });
  CHECK(msg.find("h1.json") != std::string::npos);
  CHECK(msg.find("history") != std::string::npos);
  CHECK(msg.find("H >= 2") != std::string::npos);
}

TEST_CASE("scenario save-then-load round trip is structurally identical") {
  std::mt19937_64 rng(3);
  io::ScenarioFile f;
  f.history = 4;
  f.horizon = 12;
  f.map = "plus.map.json";
  for (int i = 0; i < 5; ++i) {
    Scene s = testutil::random_scene(rng, 3 + i % 3, 4, 12);
    s.ids.clear();
    for (std::size_t k = 0; k < s.agents(); ++k) s.ids.push_back("agent-" + std::to_string(k));
    s.footprints.assign(s.agents(), Footprint{4.2 + 0.1 * i, 1.85});
    f.scenes.push_back(s);
    f.names.push_back("scene" + std::to_string(i));
  }
  const auto dir = scratch("roundtrip");
  io::save_map(MapModel{"dummy", {{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}}, {}}, (dir / "plus.map.json").string());
  io::save_scenario(f, (dir / "s.json").string());
  const auto g = io::load_scenario((dir / "s.json").string());
  require_same(f, g);
  CHECK(io::to_json(g) == io::to_json(f));
}

TEST_CASE("unknown, missing and non-finite fields name their path") {
  SUBCASE("unknown top-level field") {
    std::string t = minimal("2", kTwoAgents);
    t.insert(1, R"("colour": 1, )");
    CHECK(error_of([&] { io::parse_scenario(t); }).find("colour: unknown field") != std::string::npos);
  }
  SUBCASE("unknown agent field") {
    const std::string agents = R"([{"id": "a", "history": [[0, 0], [1, 0]], "speed": 3},
                                   {"id": "b", "history": [[0, 5], [1, 5]]}])";
    CHECK(error_of([&] { io::parse_scenario(minimal("2", agents)); }).find("scenes[0].agents[0].speed") !=
          std::string::npos);
  }
  SUBCASE("missing history") {
    const std::string agents = R"([{"id": "a"}, {"id": "b", "history": [[0, 5], [1, 5]]}])";
    CHECK(error_of([&] { io::parse_scenario(minimal("2", agents)); })
              .find("scenes[0].agents[0]: missing field 'history'") != std::string::npos);
  }
  SUBCASE("NaN written as null") {
    const std::string agents = R"([{"id": "a", "history": [[0, 0], [null, 0]]},
                                   {"id": "b", "history": [[0, 5], [1, 5]]}])";
    const std::string msg = error_of([&] { io::parse_scenario(minimal("2", agents)); });
    CHECK(msg.find("scenes[0].agents[0].history[1][0]") != std::string::npos);
    CHECK(msg.find("NaN") != std::string::npos);
  }
  SUBCASE("wrong history length") {
    const std::string agents = R"([{"id": "a", "history": [[0, 0], [1, 0], [2, 0]]},
                                   {"id": "b", "history": [[0, 5], [1, 5]]}])";
    CHECK(error_of([&] { io::parse_scenario(minimal("2", agents)); }).find("file declares H = 2") !=
          std::string::npos);
  }
  SUBCASE("duplicate agent ids") {
    const std::string agents = R"([{"id": "a", "history": [[0, 0], [1, 0]]},
                                   {"id": "a", "history": [[0, 5], [1, 5]]}])";
    CHECK(error_of([&] { io::parse_scenario(minimal("2", agents)); }).find("duplicate agent id") !=
          std::string::npos);
  }
  SUBCASE("adv equal to ego") {
    std::string t = minimal("2", kTwoAgents);
    t.replace(t.find(R"("ego": "b")"), 10, R"("ego": "a")");
    CHECK(error_of([&] { io::parse_scenario(t); }).find("adv and ego must differ") != std::string::npos);
  }
  SUBCASE("wrong format") {
    std::string t = minimal("2", kTwoAgents);
    t.replace(t.find("advdo-scenario/1"), 16, "advdo-scenario/9");
    CHECK(error_of([&] { io::parse_scenario(t); }).find("unsupported format") != std::string::npos);
  }
}

TEST_CASE("syntax errors report line and column") {
  const std::string t = "{\n \"format\": \"advdo-scenario/1\",\n \"dt\": 0.5,,\n}";
  const std::string msg = error_of([&] { io::parse_scenario(t, "bad.json"); });
  CHECK(msg.rfind("bad.json:3:", 0) == 0);
}

TEST_CASE("dangling map reference is reported") {
  const auto dir = scratch("dangling");
  std::string t = minimal("2", kTwoAgents);
  t.insert(1, R"("map": "missing.map.json", )");
  io::write_text((dir / "s.json").string(), t);
  const std::string msg = error_of([&] { io::load_scenario((dir / "s.json").string()); });
  CHECK(msg.find("missing.map.json") != std::string::npos);
  CHECK(msg.find("does not exist") != std::string::npos);
}

TEST_CASE("map round trip and validation") {
  const auto m = io::load_map(kData + "/straight.map.json");
  const auto n = io::parse_map(io::to_json(m));
  CHECK(io::to_json(n) == io::to_json(m));
  CHECK(n.drivable == m.drivable);
  REQUIRE(n.lanes.size() == m.lanes.size());
  CHECK(n.lanes[1].centerline.points == m.lanes[1].centerline.points);

  const std::string bowtie = R"({"format": "advdo-map/1", "id": "x",
      "drivable": [[[0, 0], [1, 1], [1, 0], [0, 1]]]})";
  CHECK(error_of([&] { io::parse_map(bowtie); }).find("drivable[0]: polygon is not simple") != std::string::npos);
}

TEST_CASE("episodes round trip") {
  io::EpisodeFile f;
  f.map = "road.map.json";
  planning::Episode e;
  e.id = "cut-in";
  e.start = 3;
  e.ego = 0;
  e.adv = 2;
  e.target_speed = 9.5;
  for (int a = 0; a < 3; ++a) {
    Path log;
    for (int k = 0; k < 20; ++k) log.emplace_back(k * (5.0 + a) * 0.5 + 0.1 / 3.0, a * 3.5 - 1.75);
    e.logs.push_back(log);
    e.ids.push_back("v" + std::to_string(a));
    e.footprints.push_back({4.0 + a, 1.8});
  }
  f.episodes.push_back(e);
  const auto g = io::parse_episodes(io::to_json(f));
  REQUIRE(g.episodes.size() == 1);
  const auto& h = g.episodes[0];
  CHECK(h.id == e.id);
  CHECK(h.start == 3);
  CHECK(h.adv == 2);
  CHECK(h.target_speed == 9.5);
  CHECK(h.logs == e.logs);
  CHECK(h.footprints[2].length == 6.0);
  CHECK(g.map == f.map);
  CHECK(io::to_json(g) == io::to_json(f));
}

TEST_CASE("dense sidecar round trip is bit exact and rejects damage") {
  std::mt19937_64 rng(11);
  std::vector<recon::DenseTrajectory> v;
  for (int i = 0; i < 4; ++i) {
    auto [s0, u] = testutil::smooth_random(rng, {.dt = 0.1, .steps = 15 + i});
    v.push_back(recon::DenseTrajectory::from_controls(s0, u, 5));
  }
  const std::string bytes = io::encode_dense(v);
  const auto w = io::decode_dense(bytes);
  REQUIRE(w.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(w[i].factor == v[i].factor);
    CHECK(w[i].controls.dt == v[i].controls.dt);
    CHECK(w[i].start.heading == v[i].start.heading);
    CHECK(w[i].positions == v[i].positions);
    REQUIRE(w[i].controls.size() == v[i].controls.size());
    for (std::size_t k = 0; k < v[i].controls.size(); ++k) {
      CHECK(w[i].controls.actions[k].accel == v[i].controls.actions[k].accel);
      CHECK(w[i].controls.actions[k].curvature == v[i].controls.actions[k].curvature);
    }
  }
  CHECK(io::encode_dense(w) == bytes);
  CHECK_THROWS_AS(io::decode_dense(bytes.substr(0, bytes.size() - 3)), ParseError);
  CHECK_THROWS_AS(io::decode_dense(bytes + "x"), ParseError);
  CHECK_THROWS_AS(io::decode_dense("NOTDENSE" + bytes.substr(8)), ParseError);
}
