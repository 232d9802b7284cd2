#include "advdo/dynamics.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <random>

using namespace advdo;
using namespace advdo::dynamics;
using testutil::rel_err;

namespace {

// Fine-step oracle: the same kinematics integrated with k substeps per control.
Vec2 substepped_endpoint(const DynState& s0, const ControlSequence& u, int k) {
  DynState s = s0;
  const double h = u.dt / k;
  for (const auto& c : u.actions)
    for (int i = 0; i < k; ++i) {
      DynState n;
      n.position = s.position + s.speed * Vec2(std::cos(s.heading), std::sin(s.heading)) * h;
      n.heading = s.heading + s.speed * c.curvature * h;
      n.speed = s.speed + c.accel * h;
      s = n;
    }
  return s.position;
}

double path_length(const Path& p) {
  double L = 0;
  for (std::size_t i = 1; i < p.size(); ++i) L += (p[i] - p[i - 1]).norm();
  return L;
}

ControlSequence constant(int n, double a, double k, double dt) {
  ControlSequence u;
  u.dt = dt;
  u.actions.assign(n, {a, k});
  return u;
}

}  // namespace

TEST_CASE("rollout: constant velocity straight line") {
  DynState s0{{0, 0}, 0.0, 2.0};
  const auto st = rollout(s0, constant(4, 0, 0, 0.5));
  REQUIRE(st.size() == 5);
  for (int i = 1; i <= 4; ++i) {
    CHECK(st[i].position.x() == doctest::Approx(i));
    CHECK(st[i].position.y() == doctest::Approx(0.0));
  }
}

TEST_CASE("rollout: first step moves zero distance from rest") {
  DynState s0{{0, 0}, M_PI / 2, 0.0};
  const auto st = rollout(s0, constant(2, 2.0, 0, 0.5));
  CHECK(st[1].position.norm() == doctest::Approx(0.0));
  CHECK(st[2].position.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(st[2].position.y() == doctest::Approx(0.5));
  CHECK(st[0].speed == 0.0);
  CHECK(st[1].speed == doctest::Approx(1.0));
  CHECK(st[2].speed == doctest::Approx(2.0));
}

TEST_CASE("rollout: rejects bad input") {
  DynState s0;
  CHECK_THROWS_AS(rollout(s0, constant(3, 0, 0, 0.0)), InvalidInput);
  s0.speed = std::nan("");
  CHECK_THROWS_AS(rollout(s0, constant(3, 0, 0, 0.1)), InvalidInput);
  DynState ok;
  auto u = constant(3, 0, 0, 0.1);
  u.actions[1].curvature = INFINITY;
  CHECK_THROWS_AS(rollout(ok, u), InvalidInput);
}

TEST_CASE("rollout: matches fine-step integration within 1% of path length") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto [s0, u] = testutil::smooth_random(rng);
    const auto p = positions_of(rollout(s0, u));
    const Vec2 fine = substepped_endpoint(s0, u, 100);
    CHECK((p.back() - fine).norm() <= 0.01 * path_length(p));
  }
}

TEST_CASE("rollout: substepping converges monotonically") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    auto [s0, u] = testutil::smooth_random(rng);
    const Vec2 ref = substepped_endpoint(s0, u, 2000);
    double prev = INFINITY;
    for (int k : {1, 2, 4, 8, 16, 32}) {
      const double e = (substepped_endpoint(s0, u, k) - ref).norm();
      CHECK(e < prev);
      prev = e;
    }
  }
}

TEST_CASE("rollout: preserves speed without accel and heading without curvature") {
  DynState s0{{1, 2}, 0.7, 3.0};
  auto u = constant(10, 0, 0.1, 0.1);
  for (const auto& s : rollout(s0, u)) CHECK(s.speed == doctest::Approx(3.0));
  u = constant(10, 1.0, 0.0, 0.1);
  for (const auto& s : rollout(s0, u)) CHECK(s.heading == doctest::Approx(0.7));
}

TEST_CASE("rollout_reverse is the exact inverse of rollout") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto [s0, u] = testutil::smooth_random(rng);
    const auto fwd = rollout(s0, u);
    const auto rev = rollout_reverse(fwd.back(), u);
    for (std::size_t i = 0; i < fwd.size(); ++i) {
      CHECK((fwd[i].position - rev[i].position).norm() < 1e-9);
      CHECK(std::abs(wrap_angle(fwd[i].heading - rev[i].heading)) < 1e-9);
    }
    CHECK(rev.back().position == fwd.back().position);
  }
}

TEST_CASE("inverse: straight constant speed") {
  Path p{{0, 0}, {1, 0}, {2, 0}};
  const auto d = inverse(p, 0.5);
  REQUIRE(d.speed.size() == 2);
  REQUIRE(d.accel.size() == 1);
  CHECK(d.speed[0] == doctest::Approx(2.0));
  CHECK(d.speed[1] == doctest::Approx(2.0));
  CHECK(d.heading[0] == doctest::Approx(0.0));
  CHECK(d.heading[1] == doctest::Approx(0.0));
  CHECK(d.accel[0] == doctest::Approx(0.0));
  CHECK(d.curvature[0] == doctest::Approx(0.0));
}

TEST_CASE("inverse: heading is the quadrant-aware displacement angle") {
  Path p{{0, 0}, {-1, -1}, {-2, -2}};
  const auto d = inverse(p, 1.0);
  CHECK(d.heading[0] == doctest::Approx(-3 * M_PI / 4));
}

TEST_CASE("inverse: round trip recovers in-bound controls") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto [s0, u] = testutil::smooth_random(rng);
    const auto p = positions_of(rollout(s0, u));
    const auto d = inverse(p, u.dt);
    REQUIRE(d.accel.size() == u.size() - 1);
    for (std::size_t t = 0; t < d.accel.size(); ++t) {
      CHECK(std::abs(d.accel[t] - u.actions[t].accel) < 1e-6);
      CHECK(std::abs(d.curvature[t] - u.actions[t].curvature) < 1e-6);
    }
  }
}

TEST_CASE("inverse: radius-10 circle gives curvature 0.1") {
  Path p;
  const double R = 10.0, speed = 5.0, dt = 0.1;
  for (int i = 0; i < 30; ++i) {
    const double phi = speed * dt * i / R;
    p.push_back({R * std::sin(phi), R * (1 - std::cos(phi))});
  }
  const auto d = inverse(p, dt);
  for (double k : d.curvature) CHECK(std::abs(k - 0.1) < 0.005);
}

TEST_CASE("inverse: stationary steps are flagged with zero curvature") {
  Path p{{0, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 1}};
  const auto d = inverse(p, 1.0);
  CHECK_FALSE(d.stationary[0]);
  CHECK(d.stationary[1]);
  CHECK(d.stationary[2]);
  CHECK(d.curvature[1] == 0.0);
  CHECK(d.curvature[2] == 0.0);
  // Stationary headings carry the previous observed heading.
  CHECK(d.heading[1] == doctest::Approx(0.0));
  CHECK_THROWS_AS(inverse(Path{{0, 0}}, 1.0), InvalidInput);
}

TEST_CASE("params_from_rollout agrees with inverse on positions") {
  std::mt19937_64 rng(9);
  auto [s0, u] = testutil::smooth_random(rng);
  const auto st = rollout(s0, u);
  const auto a = params_from_rollout(st, u);
  const auto b = inverse(positions_of(st), u.dt);
  for (std::size_t t = 0; t < a.accel.size(); ++t) {
    CHECK(a.accel[t] == doctest::Approx(b.accel[t]).epsilon(1e-6));
    CHECK(a.yaw_rate[t] == doctest::Approx(b.yaw_rate[t]).epsilon(1e-6));
  }
}

namespace {

// Random linear functional on every state component, for gradient checks.
struct Probe {
  std::vector<StateCotangent> w;
  double operator()(const std::vector<DynState>& st) const {
    double J = 0;
    for (std::size_t i = 0; i < st.size(); ++i)
      J += w[i].position.dot(st[i].position) + w[i].heading * st[i].heading +
           w[i].speed * st[i].speed;
    return J;
  }
};

Probe random_probe(std::mt19937_64& rng, std::size_t n, bool positions_only) {
  std::normal_distribution<double> N(0, 1);
  Probe p;
  p.w.resize(n);
  for (auto& c : p.w) {
    c.position = {N(rng), N(rng)};
    if (!positions_only) {
      c.heading = N(rng);
      c.speed = N(rng);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("rollout_pullback matches central finite differences") {
  std::mt19937_64 rng(21);
  const double h = 1e-5;
  for (int trial = 0; trial < 100; ++trial) {
    auto [s0, u] = testutil::smooth_random(rng);
    const auto probe = random_probe(rng, u.size() + 1, trial % 2 == 0);
    const auto g = rollout_pullback(s0, u, probe.w);
    for (std::size_t t = 0; t < u.size(); ++t) {
      auto fa = [&](double x) {
        auto v = u;
        v.actions[t].accel = x;
        return probe(rollout(s0, v));
      };
      auto fk = [&](double x) {
        auto v = u;
        v.actions[t].curvature = x;
        return probe(rollout(s0, v));
      };
      CHECK(rel_err(g.controls[t].accel, testutil::central_diff(fa, u.actions[t].accel, h)) < 1e-4);
      CHECK(rel_err(g.controls[t].curvature,
                    testutil::central_diff(fk, u.actions[t].curvature, h)) < 1e-4);
    }
    auto fs = [&](double x) {
      auto s = s0;
      s.speed = x;
      return probe(rollout(s, u));
    };
    auto fh = [&](double x) {
      auto s = s0;
      s.heading = x;
      return probe(rollout(s, u));
    };
    CHECK(rel_err(g.anchor.speed, testutil::central_diff(fs, s0.speed, h)) < 1e-4);
    CHECK(rel_err(g.anchor.heading, testutil::central_diff(fh, s0.heading, h)) < 1e-4);
  }
}

TEST_CASE("rollout_reverse_pullback matches central finite differences") {
  std::mt19937_64 rng(22);
  const double h = 1e-5;
  for (int trial = 0; trial < 30; ++trial) {
    auto [s0, u] = testutil::smooth_random(rng);
    const auto end = rollout(s0, u).back();
    const auto probe = random_probe(rng, u.size() + 1, false);
    const auto g = rollout_reverse_pullback(end, u, probe.w);
    for (std::size_t t = 0; t < u.size(); ++t) {
      auto fa = [&](double x) {
        auto v = u;
        v.actions[t].accel = x;
        return probe(rollout_reverse(end, v));
      };
      auto fk = [&](double x) {
        auto v = u;
        v.actions[t].curvature = x;
        return probe(rollout_reverse(end, v));
      };
      CHECK(rel_err(g.controls[t].accel, testutil::central_diff(fa, u.actions[t].accel, h)) < 1e-4);
      CHECK(rel_err(g.controls[t].curvature,
                    testutil::central_diff(fk, u.actions[t].curvature, h)) < 1e-4);
    }
  }
}

TEST_CASE("rollout_pullback: linearity and dependence structure") {
  std::mt19937_64 rng(2);
  auto [s0, u] = testutil::smooth_random(rng);
  Path zero(u.size() + 1, Vec2::Zero());
  auto g = rollout_pullback(s0, u, zero);
  for (const auto& c : g.controls) {
    CHECK(c.accel == 0.0);
    CHECK(c.curvature == 0.0);
  }
  Path first = zero;
  first[0] = {1.0, -2.0};
  g = rollout_pullback(s0, u, first);
  for (const auto& c : g.controls) {
    CHECK(c.accel == 0.0);
    CHECK(c.curvature == 0.0);
  }
  CHECK_THROWS_AS(rollout_pullback(s0, u, Path(3)), InvalidInput);
}

TEST_CASE("l_dyn: soft-clip term values") {
  CHECK(soft_clip_term(0.0) == 0.0);
  CHECK(soft_clip_term(1.0) == doctest::Approx(0.76894).epsilon(1e-5));
  CHECK(soft_clip_term(2.0) > soft_clip_term(1.0));
  DynamicBounds b;
  DynParams p;
  p.speed.assign(3, b.speed.lo);
  p.accel.assign(2, b.accel.lo);
  p.curvature.assign(2, b.curvature.lo);
  p.yaw_rate.assign(2, b.yaw_rate.lo);
  CHECK(l_dyn(p, b) == 0.0);
  p.speed[1] = b.speed.hi;
  CHECK(l_dyn(p, b) == doctest::Approx(1.5 - sigmoid(1.0)));
}

TEST_CASE("l_dyn: strictly increasing in each normalized parameter") {
  for (double z = -3.0; z < 3.0; z += 0.01) {
    CHECK(soft_clip_term(z + 0.01) > soft_clip_term(z));
    CHECK(soft_clip_term_grad(z) > 0.0);
  }
}

TEST_CASE("dyn_penalty: excess form vanishes in-bound and grows outside") {
  DynamicBounds b;
  DynParams p;
  p.speed = {5.0, 10.0};
  p.accel = {1.0};
  p.curvature = {0.1};
  p.yaw_rate = {0.5};
  CHECK(dyn_penalty(p, b, PenaltyForm::Excess) == 0.0);
  p.curvature = {0.4};
  const double a = dyn_penalty(p, b, PenaltyForm::Excess);
  p.curvature = {0.5};
  CHECK(dyn_penalty(p, b, PenaltyForm::Excess) > a);
  CHECK(a > 0.0);
}

TEST_CASE("dyn_penalty gradients match finite differences") {
  DynamicBounds b;
  DynParams p;
  p.speed = {-1.0, 12.0, 45.0};
  p.accel = {11.0, -3.0};
  p.curvature = {-0.5, 0.1};
  p.yaw_rate = {1.3, -0.2};
  for (auto form : {PenaltyForm::Excess, PenaltyForm::Literal}) {
    ParamsCotangent g;
    dyn_penalty(p, b, form, &g);
    for (std::size_t i = 0; i < p.speed.size(); ++i) {
      auto f = [&](double x) {
        auto q = p;
        q.speed[i] = x;
        return dyn_penalty(q, b, form);
      };
      CHECK(rel_err(g.speed[i], testutil::central_diff(f, p.speed[i], 1e-6)) < 1e-5);
    }
    for (std::size_t i = 0; i < p.accel.size(); ++i) {
      auto f = [&](double x) {
        auto q = p;
        q.accel[i] = x;
        return dyn_penalty(q, b, form);
      };
      CHECK(rel_err(g.accel[i], testutil::central_diff(f, p.accel[i], 1e-6)) < 1e-5);
    }
  }
}

TEST_CASE("projection keeps every reached parameter in bounds") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1, 1);
  DynamicBounds b;
  for (int trial = 0; trial < 50; ++trial) {
    DynState s0{{0, 0}, 0.0, 20.0 + 20.0 * U(rng)};
    ControlSequence u;
    u.dt = 0.1;
    for (int i = 0; i < 30; ++i) u.actions.push_back({30 * U(rng), U(rng)});
    const auto pf = project_forward(s0, u, b);
    CHECK_FALSE(violates(params_from_rollout(rollout(s0, pf), pf), b));
    const auto pr = project_reverse(s0, u, b);
    CHECK_FALSE(violates(params_from_rollout(rollout_reverse(s0, pr), pr), b));
  }
}
