#include "advdo/metrics.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <functional>
#include <random>

using namespace advdo;
using namespace advdo::metrics;
using testutil::rel_err;

namespace {

Path line(Vec2 start, Vec2 step, int n) {
  Path p;
  for (int t = 1; t <= n; ++t) p.push_back(start + t * step);
  return p;
}

Path shifted(const Path& p, Vec2 d) {
  Path q = p;
  for (auto& v : q) v += d;
  return q;
}

// Single-mode prediction from per-agent paths.
Prediction single_mode(std::vector<Path> paths) {
  Prediction p;
  p.probs.push_back(std::vector<double>(paths.size(), 1.0));
  p.modes.push_back(std::move(paths));
  return p;
}

Prediction random_prediction(std::mt19937_64& rng, const Scene& s, int K, double spread) {
  std::normal_distribution<double> N(0.0, spread);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  Prediction p;
  for (int k = 0; k < K; ++k) {
    std::vector<Path> m;
    std::vector<double> pr;
    for (std::size_t i = 0; i < s.agents(); ++i) {
      Path y = s.futures[i];
      const Vec2 drift(N(rng), N(rng));
      for (std::size_t t = 0; t < y.size(); ++t) y[t] += (t + 1.0) / y.size() * drift;
      m.push_back(y);
      pr.push_back(U(rng));
    }
    p.modes.push_back(m);
    p.probs.push_back(pr);
  }
  for (std::size_t i = 0; i < s.agents(); ++i) {
    double z = 0;
    for (int k = 0; k < K; ++k) z += p.probs[k][i];
    for (int k = 0; k < K; ++k) p.probs[k][i] /= z;
  }
  return p;
}

MapModel cross_map() {
  MapModel m;
  m.drivable = {{{-60, -4}, {60, -4}, {60, 4}, {-60, 4}}, {{-4, -60}, {4, -60}, {4, 60}, {-4, 60}}};
  m.lanes.push_back({"e", geom::Polyline(Path{{-60, -1.75}, {60, -1.75}}), 3.5});
  return m;
}

// Every monotone alignment path from (0,0) to (n-1,m-1), minimum summed cost.
double dtw_exhaustive(const Path& a, const Path& b, std::size_t i = 0, std::size_t j = 0) {
  const double c = (a[i] - b[j]).norm();
  if (i == a.size() - 1 && j == b.size() - 1) return c;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, dtw_exhaustive(a, b, i + 1, j));
  if (j + 1 < b.size()) best = std::min(best, dtw_exhaustive(a, b, i, j + 1));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, dtw_exhaustive(a, b, i + 1, j + 1));
  return c + best;
}

double frechet_exhaustive(const Path& a, const Path& b, std::size_t i = 0, std::size_t j = 0) {
  const double c = (a[i] - b[j]).norm();
  if (i == a.size() - 1 && j == b.size() - 1) return c;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < a.size()) best = std::min(best, frechet_exhaustive(a, b, i + 1, j));
  if (j + 1 < b.size()) best = std::min(best, frechet_exhaustive(a, b, i, j + 1));
  if (i + 1 < a.size() && j + 1 < b.size()) best = std::min(best, frechet_exhaustive(a, b, i + 1, j + 1));
  return std::max(c, best);
}

Path random_curve(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  Path p;
  for (int k = 0; k < n; ++k) p.emplace_back(U(rng) + 3 * k, U(rng));
  return p;
}

}  // namespace

TEST_CASE("displacement_error: examples") {
  const Path y = line({0, 0}, {1, 0}, 12);
  auto de = displacement_error(single_mode({y}), 0, y);
  CHECK(de.ade == 0.0);
  CHECK(de.fde == 0.0);

  de = displacement_error(single_mode({shifted(y, {0, 2})}), 0, y);
  CHECK(de.ade == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(de.fde == doctest::Approx(2.0).epsilon(1e-12));

  Path grow = y;
  for (int t = 0; t < 12; ++t) grow[t].y() += 0.5 * (t + 1);
  de = displacement_error(single_mode({grow}), 0, y);
  CHECK(de.ade == doctest::Approx(3.25).epsilon(1e-12));
  CHECK(de.fde == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("displacement_error: ADE and FDE minimized over modes independently") {
  const Path y = line({0, 0}, {1, 0}, 4);
  // Mode 0: ADE 1, FDE 1. Mode 1: zero except a 3 m final error (ADE 0.75).
  Path m1 = y;
  m1.back().y() += 3.0;
  Prediction p;
  p.modes = {{shifted(y, {0, 1})}, {m1}};
  p.probs = {{0.5}, {0.5}};
  const auto de = displacement_error(p, 0, y);
  CHECK(de.ade == doctest::Approx(0.75));
  CHECK(de.fde == doctest::Approx(1.0));
  CHECK(max_displacement(p, 0, y) == doctest::Approx(1.0));
}

TEST_CASE("miss_rate: examples and brute-force recount") {
  const Path y = line({0, 0}, {1, 0}, 12);
  Path near = y;
  near[5].y() += 1.9;
  const std::size_t a0[] = {0};
  CHECK(miss_rate(single_mode({near}), {y}, a0, 2.0) == 0.0);

  std::vector<Path> truth(4, y), pred(4, y);
  pred[2][3].y() += 2.5;
  const std::size_t all[] = {0, 1, 2, 3};
  CHECK(miss_rate(single_mode(pred), truth, all, 2.0) == doctest::Approx(0.25));
  CHECK_THROWS_AS(miss_rate(single_mode(pred), truth, all, 0.0), InvalidInput);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const Scene s = testutil::random_scene(rng, 8);
    const Prediction p = random_prediction(rng, s, 3, 2.0);
    const auto agents = evaluation_agents(s);
    int misses = 0;
    for (auto i : agents) {
      bool all_modes_miss = true;
      for (const auto& mode : p.modes) {
        bool any_far = false;
        for (std::size_t t = 0; t < mode[i].size(); ++t)
          any_far |= std::hypot(mode[i][t].x() - s.futures[i][t].x(),
                                mode[i][t].y() - s.futures[i][t].y()) > 2.0;
        all_modes_miss &= any_far;
      }
      misses += all_modes_miss;
    }
    CHECK(miss_rate(p, s.futures, agents, 2.0) == doctest::Approx(double(misses) / agents.size()));
  }
}

TEST_CASE("offroad_rate: examples and ray-casting recount") {
  const MapModel m = cross_map();
  const Path on = line({-30, 0}, {2, 0}, 12);
  const Path off = line({-30, 20}, {2, 0}, 12);
  const std::size_t two[] = {0, 1};
  CHECK(offroad_rate(single_mode({on, on}), two, m) == 0.0);
  CHECK(offroad_rate(single_mode({on, off}), two, m) == doctest::Approx(0.5));

  // Agents straddling the boundary at y = +-4, with one waypoint just across.
  std::vector<Path> paths;
  for (int i = 0; i < 20; ++i) {
    Path p = line({-20.0 + i, 3.0}, {1, 0}, 12);
    if (i % 3 == 0) p[i % 12].y() = 4.05;
    if (i % 5 == 0) p[(i + 4) % 12] = {3.0 + 0.01 * i, 20.0};  // inside the vertical arm
    paths.push_back(p);
  }
  const auto pred = single_mode(paths);
  std::vector<std::size_t> ids(paths.size());
  std::iota(ids.begin(), ids.end(), 0);
  int count = 0;
  for (const auto& p : paths) {
    bool out = false;
    for (const auto& q : p) {
      bool inside = false;
      for (const auto& poly : m.drivable) {
        // Independent crossing test against a ray in +y.
        bool in = false;
        for (std::size_t a = 0, b = poly.size() - 1; a < poly.size(); b = a++) {
          const Vec2 &u = poly[a], &v = poly[b];
          if ((u.x() > q.x()) != (v.x() > q.x())) {
            const double y = u.y() + (q.x() - u.x()) * (v.y() - u.y()) / (v.x() - u.x());
            if (q.y() < y) in = !in;
          }
        }
        inside |= in;
      }
      out |= !inside;
    }
    count += out;
  }
  CHECK(count == 5);  // i = 9 and 15 cross into the vertical arm
  CHECK(offroad_rate(pred, ids, m) == doctest::Approx(count / 20.0));
  CHECK_THROWS_AS(offroad_rate(pred, ids, MapModel{}), InvalidInput);
}

TEST_CASE("offroad uses the most likely mode") {
  const MapModel m = cross_map();
  Prediction p;
  p.modes = {{line({-30, 20}, {2, 0}, 12)}, {line({-30, 0}, {2, 0}, 12)}};
  p.probs = {{0.3}, {0.7}};
  CHECK_FALSE(is_offroad(p, 0, m));
  p.probs = {{0.7}, {0.3}};
  CHECK(is_offroad(p, 0, m));
}

TEST_CASE("violation_rate: examples and hand-labeled fixtures") {
  const dynamics::DynamicBounds b;
  std::vector<Path> ok;
  for (int k = 0; k < 10; ++k) {
    Path p;
    for (int t = 0; t < 9; ++t) p.emplace_back(0.5 * t * (5 + k), 0.0);
    ok.push_back(p);
  }
  CHECK(violation_rate(ok, 0.5, b) == 0.0);
  ok[3].clear();
  for (int t = 0; t < 9; ++t) ok[3].emplace_back(0.5 * t * 45.0, 0.0);  // 45 m/s
  CHECK(violation_rate(ok, 0.5, b) == doctest::Approx(0.1));

  // Constant-speed arcs of turn rate w at 8 m/s: curvature w / 8 against 0.3
  // and yaw rate w against 1.0. Labeled by hand: only w in {1.2, 2.0, 3.0}
  // break a bound.
  const double rates[] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.6, 0.8, 1.2, 2.0, 3.0};
  const bool labels[] = {false, false, false, false, false, false, false, true, true, true};
  std::vector<Path> arcs;
  int expected = 0;
  for (int k = 0; k < 10; ++k) {
    Path p;
    Vec2 x(0, 0);
    double th = 0.3 * k;
    for (int t = 0; t < 9; ++t) {
      p.push_back(x);
      th += rates[k] * 0.5;
      x += 8.0 * 0.5 * Vec2(std::cos(th), std::sin(th));
    }
    arcs.push_back(p);
    expected += labels[k];
    CHECK(dynamics::violates(dynamics::inverse(p, 0.5), b) == labels[k]);
  }
  CHECK(violation_rate(arcs, 0.5, b) == doctest::Approx(expected / 10.0));
  CHECK_THROWS_AS(violation_rate(std::span<const Path>{}, 0.5, b), InvalidInput);
}

TEST_CASE("interaction cost gradient matches finite differences") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(-6.0, 6.0);
  for (int trial = 0; trial < 40; ++trial) {
    Path a, e;
    for (int t = 0; t < 12; ++t) {
      a.emplace_back(U(rng), U(rng));
      e.emplace_back(U(rng), U(rng));
    }
    Path g;
    interaction_cost(a, e, 2.0, &g);
    const double h = 1e-6;
    for (int t = 0; t < 12; ++t)
      for (int c = 0; c < 2; ++c) {
        auto f = [&](double v) {
          Path q = a;
          q[t][c] = v;
          return interaction_cost(q, e, 2.0);
        };
        const double fd = testutil::central_diff(f, a[t][c], h);
        CHECK(rel_err(g[t][c], fd, 1e-6) < 1e-3);
      }
    double s = 0;
    for (const auto& v : g) s += v.norm();
    CHECK(sensitivity(a, e, 2.0) == doctest::Approx(s / 12).epsilon(1e-12));
  }
}

TEST_CASE("sensitivity: vanishes with distance and is larger on the ego path") {
  const Path ego = line({0, 0}, {4, 0}, 12);
  CHECK(sensitivity(shifted(ego, {0, 1e4}), ego, 2.0) < 1e-300);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    // Agent along the ego path with a random lag, against the same agent 10 m
    // to the side.
    const double lag = 20.0 * U(rng) - 10.0;
    const Vec2 dir(1, 0);
    const Path on = shifted(ego, lag * dir);
    const Path lateral = shifted(on, {0, 10});
    CHECK(sensitivity(on, ego, 2.0) > sensitivity(lateral, ego, 2.0));
  }
  CHECK(sensitivity(ego, ego, 2.0) == doctest::Approx(0.5));
}

TEST_CASE("aggregated and delta sensitivity") {
  MetricsConfig cfg;
  Scene s;
  s.horizon = 3;
  s.ego = 0;
  s.adv = 1;
  s.histories = {{{0, 0}, {1, 0}}, {{0, 10}, {1, 10}}, {{0, 13}, {1, 13}}, {{0, 14.5}, {1, 30}},
                 {{0, 40}, {1, 40}}};
  const Path ego_plan{{2, 0}, {3, 0}, {4, 0}};
  std::vector<Path> paths = {ego_plan, line({1, 10}, {1, 0}, 3), line({1, 3}, {1, 0}, 3),
                             line({1, 6}, {1, 0}, 3), line({1, 40}, {1, 0}, 3)};
  const auto pred = single_mode(paths);
  const auto agg = aggregated_sensitivity(s, pred, ego_plan, cfg);
  CHECK(agg.count == 2);  // agents 2 and 3; 4 is 30 m away, 0 is the ego
  const double hand =
      0.5 * (sensitivity(paths[2], ego_plan, 2.0) + sensitivity(paths[3], ego_plan, 2.0));
  CHECK(agg.value == doctest::Approx(hand).epsilon(1e-12));
  CHECK(delta_sensitivity(agg, agg) == 0.0);

  s.histories = {{{0, 0}, {1, 0}}, {{0, 10}, {1, 10}}, {{0, 40}, {1, 40}}};
  const auto none = aggregated_sensitivity(s, single_mode({paths[0], paths[1], paths[4]}), ego_plan, cfg);
  CHECK(none.count == 0);
  CHECK(none.value == 0.0);
}

TEST_CASE("weighted_mean and planning_aware") {
  const std::vector<double> v{1.0, 2.5, 7.0, 0.3};
  CHECK(weighted_mean(v, std::vector<double>(4, 0.37)).value == (1.0 + 2.5 + 7.0 + 0.3) / 4);
  CHECK(weighted_mean(v, std::vector<double>{0, 0, 5, 0}).value == 7.0);
  const auto z = weighted_mean(v, std::vector<double>(4, 0.0));
  CHECK(z.fallback);
  CHECK(z.value == doctest::Approx(2.7));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AgentEval> ag(6);
    long double num = 0, den = 0;
    for (auto& a : ag) {
      a.ade = 5 * U(rng);
      a.fde = 10 * U(rng);
      a.miss = U(rng) < 0.5;
      a.pi = U(rng);
      num += static_cast<long double>(a.pi) * a.ade;
      den += a.pi;
    }
    const auto p = planning_aware(ag);
    CHECK(std::abs(p.pi_ade - static_cast<double>(num / den)) < 1e-12);
    CHECK(p.pi_mr >= 0.0);
    CHECK(p.pi_mr <= 1.0);
    CHECK_FALSE(p.fallback);
  }
}

TEST_CASE("evaluate: bounds, translation invariance, ego excluded") {
  std::mt19937_64 rng(6);
  const MapModel m = cross_map();
  for (int trial = 0; trial < 20; ++trial) {
    Scene s = testutil::random_scene(rng, 6);
    const Prediction p = random_prediction(rng, s, 3, 3.0);
    const auto e = evaluate(s, p, &m, MetricsConfig{});
    CHECK(e.agents.size() == 5);
    for (const auto& a : e.agents) {
      CHECK(a.agent != 1u);
      CHECK(a.ade <= a.max_disp + 1e-12);
      CHECK(a.fde <= a.max_disp + 1e-12);
    }
    for (double r : {e.summary.mr, e.summary.orr, e.planning.pi_mr, e.planning.pi_orr}) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
    // Translate scene, prediction and map together.
    const Vec2 d(123.4, -56.7);
    Scene s2 = s;
    for (auto& h : s2.histories) h = shifted(h, d);
    for (auto& f : s2.futures) f = shifted(f, d);
    Prediction p2 = p;
    for (auto& mode : p2.modes)
      for (auto& q : mode) q = shifted(q, d);
    MapModel m2 = m;
    for (auto& poly : m2.drivable)
      for (auto& v : poly) v += d;
    const auto e2 = evaluate(s2, p2, &m2, MetricsConfig{});
    CHECK(e2.summary.ade == doctest::Approx(e.summary.ade).epsilon(1e-9));
    CHECK(e2.summary.fde == doctest::Approx(e.summary.fde).epsilon(1e-9));
    CHECK(e2.summary.mr == e.summary.mr);
    CHECK(e2.summary.orr == e.summary.orr);
    CHECK(e2.planning.pi_ade == doctest::Approx(e.planning.pi_ade).epsilon(1e-9));
  }
  Scene s = testutil::random_scene(rng, 3);
  s.futures.clear();
  CHECK_THROWS_AS(evaluate(s, Prediction{}, nullptr, MetricsConfig{}), InvalidInput);
}

TEST_CASE("similarity: identity, symmetry, brute-force DTW and Frechet") {
  std::mt19937_64 rng(9);
  const Path hand_a{{0, 0}, {1, 1}, {2, 0}, {3, 1}, {4, 0}};
  const Path hand_b{{0, 0.5}, {2, 0.5}, {2.5, 1}, {4, 0.5}, {5, 0}};
  CHECK(dtw(hand_a, hand_b) == doctest::Approx(dtw_exhaustive(hand_a, hand_b)).epsilon(1e-12));
  CHECK(frechet(hand_a, hand_b) == doctest::Approx(frechet_exhaustive(hand_a, hand_b)).epsilon(1e-12));

  for (int trial = 0; trial < 40; ++trial) {
    const Path a = random_curve(rng, 2 + trial % 5), b = random_curve(rng, 2 + (trial / 5) % 5);
    const auto id = trajectory_similarity(a, a);
    CHECK(id.dtw == 0.0);
    CHECK(id.frechet == 0.0);
    CHECK(id.pcm == doctest::Approx(0.0));
    CHECK(id.area == doctest::Approx(0.0));
    CHECK(id.cl == 0.0);
    CHECK(dtw(a, b) == doctest::Approx(dtw_exhaustive(a, b)).epsilon(1e-12));
    CHECK(frechet(a, b) == doctest::Approx(frechet_exhaustive(a, b)).epsilon(1e-12));
    CHECK(frechet(a, b) == frechet(b, a));
    const auto s = trajectory_similarity(a, b);
    CHECK(s.dtw > 1e-12);
    CHECK(s.frechet > 1e-12);
    CHECK(s.pcm > 1e-12);
    CHECK(s.area > 1e-12);
    CHECK(s.cl >= 0.0);
    CHECK(s.cl == doctest::Approx(std::abs(geom::path_length(a) - geom::path_length(b))));
  }
  CHECK_THROWS_AS(trajectory_similarity(Path{{0, 0}}, hand_a), InvalidInput);
}

TEST_CASE("similarity: area and PCM on offset lines") {
  const Path a{{0, 0}, {10, 0}};
  const Path b{{0, 1}, {10, 1}};
  CHECK(area_between(a, b) == doctest::Approx(10.0));
  CHECK(pcm(a, b) == doctest::Approx(10.0));
  // A 10 m segment sitting on part of a 30 m line under a 1 m offset.
  const Path longer{{-10, 1}, {20, 1}};
  CHECK(pcm(a, longer) == doctest::Approx(10.0));
  CHECK(pcm(longer, a) == doctest::Approx(10.0));
  CHECK(curve_length_difference(a, longer) == doctest::Approx(20.0));
}

TEST_CASE("transfer_rate: examples and recomposition") {
  const ErrorSummary b{1.0, 2.0, 0.1, 0.05}, a{1.5, 3.0, 0.2, 0.05};
  CHECK(transfer_rate(b, a, b, a) == doctest::Approx(1.0));
  CHECK(transfer_rate(b, a, b, b) == 0.0);
  // Degrees: source (0.5 + 0.5 + 1 + 0) / 4; target ADE +20%, FDE -10% -> 0,
  // MR +50%, ORR benign 0 with attacked 0.1 skipped.
  const ErrorSummary tb{2.0, 2.0, 0.2, 0.0}, ta{2.4, 1.8, 0.3, 0.1};
  const double src = (0.5 + 0.5 + 1.0 + 0.0) / 4, tgt = (0.2 + 0.0 + 0.5) / 3;
  CHECK(transfer_rate(b, a, tb, ta) == doctest::Approx(tgt / src).epsilon(1e-12));
  CHECK_THROWS_AS(transfer_rate(b, b, b, a), UndefinedTransfer);
}

TEST_CASE("motion_interaction_split") {
  std::mt19937_64 rng(10);
  Scene s = testutil::random_scene(rng, 4);
  const Prediction p = random_prediction(rng, s, 2, 1.0);
  auto r = motion_interaction_split(s, p, p);
  CHECK(r.motion.ade == 0.0);
  CHECK(r.interaction.ade == 0.0);
  CHECK(r.interaction_defined);

  Prediction q = p;
  for (auto& mode : q.modes) mode[0] = shifted(mode[0], {0.6, 0.8});
  r = motion_interaction_split(s, p, q);
  CHECK(r.motion.ade == doctest::Approx(1.0));
  CHECK(r.motion.fde == doctest::Approx(1.0));
  CHECK(r.interaction.ade == 0.0);

  Prediction w = random_prediction(rng, s, 2, 1.0);
  r = motion_interaction_split(s, p, w);
  double hand = 0;
  for (std::size_t i : {2u, 3u}) {
    const Path x = p.most_likely(i), y = w.most_likely(i);
    double sum = 0;
    for (std::size_t t = 0; t < x.size(); ++t) sum += (x[t] - y[t]).norm();
    hand += sum / x.size();
  }
  CHECK(r.interaction.ade == doctest::Approx(hand / 2).epsilon(1e-12));

  Scene one = testutil::random_scene(rng, 1);
  const Prediction po = random_prediction(rng, one, 1, 1.0);
  CHECK_FALSE(motion_interaction_split(one, po, po).interaction_defined);
}

TEST_CASE("scene_stats") {
  Scene s;
  s.histories = {Path(4, Vec2(1, 1)), Path(4, Vec2(-3, 2))};
  auto st = scene_stats(s);
  CHECK(st.speed == 0.0);
  CHECK(st.curvature == 0.0);

  s.histories = {line({0, 0}, {1, 0}, 5), line({0, 5}, {0, 1}, 5)};  // 2 m/s at dt 0.5
  st = scene_stats(s);
  CHECK(st.speed == doctest::Approx(2.0));
  CHECK(st.curvature == doctest::Approx(0.0));

  std::mt19937_64 rng(12);
  const Scene mixed = testutil::random_scene(rng, 5);
  st = scene_stats(mixed);
  double v = 0, k = 0;
  for (const auto& h : mixed.histories) {
    const auto prm = dynamics::inverse(h, mixed.dt);
    double vs = 0, ks = 0;
    for (double x : prm.speed) vs += std::abs(x);
    for (double x : prm.curvature) ks += std::abs(x);
    v += vs / prm.speed.size();
    k += ks / prm.curvature.size();
  }
  CHECK(st.speed == doctest::Approx(v / 5).epsilon(1e-12));
  CHECK(st.curvature == doctest::Approx(k / 5).epsilon(1e-12));
  s.histories = {Path(2, Vec2(0, 0))};
  CHECK_THROWS_AS(scene_stats(s), InvalidInput);
}
