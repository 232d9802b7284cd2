#include "advdo/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace advdo::dynamics {

namespace {

Vec2 unit(double theta) { return {std::cos(theta), std::sin(theta)}; }
Vec2 unit_prime(double theta) { return {-std::sin(theta), std::cos(theta)}; }

bool finite_state(const DynState& s) {
  return std::isfinite(s.position.x()) && std::isfinite(s.position.y()) &&
         std::isfinite(s.heading) && std::isfinite(s.speed);
}

void check_sequence(const DynState& anchor, const ControlSequence& u) {
  if (!(u.dt > 0.0) || !std::isfinite(u.dt)) throw InvalidInput("rollout: dt must be positive");
  if (!finite_state(anchor)) throw InvalidInput("rollout: non-finite anchor state");
  for (const auto& c : u.actions)
    if (!std::isfinite(c.accel) || !std::isfinite(c.curvature))
      throw InvalidInput("rollout: non-finite control");
}

void check_range(const Range& r, const char* name) {
  if (!(r.lo < r.hi)) throw InvalidInput(std::string("bounds: lb >= ub for ") + name);
}

}  // namespace

void DynamicBounds::validate() const {
  check_range(speed, "speed");
  check_range(accel, "accel");
  check_range(curvature, "curvature");
  check_range(yaw_rate, "yaw_rate");
}

std::vector<DynState> rollout(const DynState& start, const ControlSequence& u) {
  check_sequence(start, u);
  const double dt = u.dt;
  std::vector<DynState> out;
  out.reserve(u.size() + 1);
  DynState s = start;
  s.heading = wrap_angle(s.heading);
  out.push_back(s);
  for (const auto& c : u.actions) {
    DynState n;
    n.position = s.position + s.speed * unit(s.heading) * dt;
    n.heading = wrap_angle(s.heading + s.speed * c.curvature * dt);
    n.speed = s.speed + c.accel * dt;
    out.push_back(n);
    s = n;
  }
  return out;
}

std::vector<DynState> rollout_reverse(const DynState& end, const ControlSequence& u) {
  check_sequence(end, u);
  const double dt = u.dt;
  std::vector<DynState> out(u.size() + 1);
  DynState s = end;
  s.heading = wrap_angle(s.heading);
  out.back() = s;
  for (std::size_t k = u.size(); k-- > 0;) {
    const auto& c = u.actions[k];
    DynState p;
    p.speed = s.speed - c.accel * dt;
    p.heading = wrap_angle(s.heading - p.speed * c.curvature * dt);
    p.position = s.position - p.speed * unit(p.heading) * dt;
    out[k] = p;
    s = p;
  }
  // The anchor position is copied, never recomputed.
  out.back().position = end.position;
  return out;
}

Path positions_of(const std::vector<DynState>& states) {
  Path p;
  p.reserve(states.size());
  for (const auto& s : states) p.push_back(s.position);
  return p;
}

DynParams inverse(std::span<const Vec2> positions, double dt) {
  if (positions.size() < 2) throw InvalidInput("inverse: need at least 2 positions");
  if (!(dt > 0.0)) throw InvalidInput("inverse: dt must be positive");
  for (const auto& p : positions)
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()))
      throw InvalidInput("inverse: non-finite position");

  const std::size_t n = positions.size() - 1;
  DynParams out;
  out.speed.resize(n);
  out.heading.resize(n);
  std::vector<bool> moving(n);
  for (std::size_t t = 0; t < n; ++t) {
    const Vec2 d = positions[t + 1] - positions[t];
    out.speed[t] = d.norm() / dt;
    moving[t] = out.speed[t] >= kStationarySpeed;
    out.heading[t] = moving[t] ? wrap_angle(std::atan2(d.y(), d.x())) : 0.0;
  }
  // Headings of stationary segments are unobservable: carry the nearest
  // observed heading, preferring the previous one.
  const auto first = std::find(moving.begin(), moving.end(), true);
  if (first != moving.end()) {
    double carry = out.heading[static_cast<std::size_t>(first - moving.begin())];
    for (std::size_t t = 0; t < n; ++t) {
      if (moving[t])
        carry = out.heading[t];
      else
        out.heading[t] = carry;
    }
  }

  const std::size_t m = n - 1;
  out.accel.resize(m);
  out.curvature.resize(m);
  out.yaw_rate.resize(m);
  out.stationary.resize(m);
  for (std::size_t t = 0; t < m; ++t) {
    out.accel[t] = (out.speed[t + 1] - out.speed[t]) / dt;
    out.yaw_rate[t] = wrap_angle(out.heading[t + 1] - out.heading[t]) / dt;
    if (out.speed[t] < kStationarySpeed) {
      out.curvature[t] = 0.0;
      out.stationary[t] = true;
    } else {
      out.curvature[t] = out.yaw_rate[t] / out.speed[t];
      out.stationary[t] = false;
    }
  }
  return out;
}

DynParams params_from_rollout(const std::vector<DynState>& states, const ControlSequence& u) {
  if (states.size() != u.size() + 1) throw InvalidInput("params_from_rollout: size mismatch");
  if (states.size() < 2) throw InvalidInput("params_from_rollout: need at least 2 states");
  const std::size_t n = states.size() - 1;
  DynParams out;
  out.heading.resize(n);
  out.speed.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    out.heading[t] = states[t].heading;
    out.speed[t] = states[t].speed;
  }
  const std::size_t m = n - 1;
  out.accel.resize(m);
  out.curvature.resize(m);
  out.yaw_rate.resize(m);
  out.stationary.resize(m);
  for (std::size_t t = 0; t < m; ++t) {
    const auto& c = u.actions[t];
    out.accel[t] = c.accel;
    out.yaw_rate[t] = states[t].speed * c.curvature;
    out.stationary[t] = std::abs(states[t].speed) < kStationarySpeed;
    out.curvature[t] = out.stationary[t] ? 0.0 : c.curvature;
  }
  return out;
}

RolloutGradient rollout_pullback(const DynState& start, const ControlSequence& u,
                                 std::span<const StateCotangent> cot) {
  if (cot.size() != u.size() + 1)
    throw InvalidInput("rollout_pullback: cotangent length must equal number of states");
  const auto states = rollout(start, u);
  const double dt = u.dt;
  RolloutGradient g;
  g.controls.resize(u.size());
  StateCotangent lam = cot.back();
  for (std::size_t t = u.size(); t-- > 0;) {
    const auto& s = states[t];
    const auto& c = u.actions[t];
    g.controls[t].accel = lam.speed * dt;
    g.controls[t].curvature = lam.heading * s.speed * dt;
    StateCotangent prev;
    prev.position = cot[t].position + lam.position;
    prev.heading = cot[t].heading + lam.heading +
                   lam.position.dot(unit_prime(s.heading)) * s.speed * dt;
    prev.speed = cot[t].speed + lam.speed + lam.heading * c.curvature * dt +
                 lam.position.dot(unit(s.heading)) * dt;
    lam = prev;
  }
  g.anchor = lam;
  return g;
}

RolloutGradient rollout_pullback(const DynState& start, const ControlSequence& u,
                                 std::span<const Vec2> position_cotangent) {
  std::vector<StateCotangent> cot(position_cotangent.size());
  for (std::size_t i = 0; i < cot.size(); ++i) cot[i].position = position_cotangent[i];
  return rollout_pullback(start, u, cot);
}

RolloutGradient rollout_reverse_pullback(const DynState& end, const ControlSequence& u,
                                         std::span<const StateCotangent> cot) {
  if (cot.size() != u.size() + 1)
    throw InvalidInput("rollout_reverse_pullback: cotangent length must equal number of states");
  const auto states = rollout_reverse(end, u);
  const double dt = u.dt;
  RolloutGradient g;
  g.controls.resize(u.size());
  StateCotangent lam = cot.front();
  for (std::size_t t = 0; t < u.size(); ++t) {
    const auto& s = states[t];
    const auto& c = u.actions[t];
    const double lam_theta = lam.heading - lam.position.dot(unit_prime(s.heading)) * s.speed * dt;
    const double lam_v = lam.speed - lam.position.dot(unit(s.heading)) * dt -
                         lam_theta * c.curvature * dt;
    g.controls[t].curvature = -lam_theta * s.speed * dt;
    g.controls[t].accel = -lam_v * dt;
    StateCotangent next;
    next.position = cot[t + 1].position + lam.position;
    next.heading = cot[t + 1].heading + lam_theta;
    next.speed = cot[t + 1].speed + lam_v;
    lam = next;
  }
  g.anchor = lam;
  return g;
}

double soft_clip_term(double z) { return z - sigmoid(z) + 0.5; }

double soft_clip_term_grad(double z) {
  const double s = sigmoid(z);
  return 1.0 - s * (1.0 - s);
}

namespace {

template <class F>
void for_each_param(const DynParams& p, const DynamicBounds& b, F&& f) {
  f(p.speed, b.speed, 0);
  f(p.accel, b.accel, 1);
  f(p.curvature, b.curvature, 2);
  f(p.yaw_rate, b.yaw_rate, 3);
}

std::vector<double>& grad_slot(ParamsCotangent& g, int which) {
  switch (which) {
    case 0: return g.speed;
    case 1: return g.accel;
    case 2: return g.curvature;
    default: return g.yaw_rate;
  }
}

}  // namespace

double l_dyn(const DynParams& params, const DynamicBounds& bounds) {
  return dyn_penalty(params, bounds, PenaltyForm::Literal);
}

double dyn_penalty(const DynParams& params, const DynamicBounds& bounds, PenaltyForm form,
                   ParamsCotangent* grad) {
  bounds.validate();
  double total = 0.0;
  for_each_param(params, bounds, [&](const std::vector<double>& xs, const Range& r, int which) {
    std::vector<double>* g = nullptr;
    if (grad) {
      g = &grad_slot(*grad, which);
      g->assign(xs.size(), 0.0);
    }
    const double w = r.width();
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i];
      if (form == PenaltyForm::Literal) {
        const double z = (x - r.lo) / w;
        total += soft_clip_term(z);
        if (g) (*g)[i] = soft_clip_term_grad(z) / w;
      } else {
        double e = 0.0, sign = 0.0;
        if (x > r.hi) {
          e = (x - r.hi) / w;
          sign = 1.0;
        } else if (x < r.lo) {
          e = (r.lo - x) / w;
          sign = -1.0;
        }
        if (e > 0.0) {
          const double h = soft_clip_term(e);
          total += h * h;
          if (g) (*g)[i] = 2.0 * h * soft_clip_term_grad(e) * sign / w;
        }
      }
    }
  });
  return total;
}

void params_pullback(const std::vector<DynState>& states, const ControlSequence& u,
                     const ParamsCotangent& dp, std::vector<StateCotangent>& states_cot,
                     std::vector<ControlAction>& control_grad) {
  const std::size_t n = states.size() - 1;
  for (std::size_t t = 0; t < n && t < dp.speed.size(); ++t) states_cot[t].speed += dp.speed[t];
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const auto& c = u.actions[t];
    const double v = states[t].speed;
    if (t < dp.accel.size()) control_grad[t].accel += dp.accel[t];
    const bool stationary = std::abs(v) < kStationarySpeed;
    if (t < dp.curvature.size() && !stationary) control_grad[t].curvature += dp.curvature[t];
    if (t < dp.yaw_rate.size()) {
      control_grad[t].curvature += dp.yaw_rate[t] * v;
      states_cot[t].speed += dp.yaw_rate[t] * c.curvature;
    }
  }
}

double max_violation(const DynParams& params, const DynamicBounds& bounds) {
  double worst = -1.0;
  for_each_param(params, bounds, [&](const std::vector<double>& xs, const Range& r, int) {
    for (double x : xs) {
      const double v = std::max(x - r.hi, r.lo - x) / r.width();
      worst = std::max(worst, v);
    }
  });
  return worst;
}

bool violates(const DynParams& params, const DynamicBounds& bounds, double tol) {
  return max_violation(params, bounds) > tol;
}

namespace {

double clamp_curvature(double kappa, double v, const DynamicBounds& b) {
  double lo = b.curvature.lo, hi = b.curvature.hi;
  if (std::abs(v) > 1e-12) {
    double ylo = b.yaw_rate.lo / v, yhi = b.yaw_rate.hi / v;
    if (ylo > yhi) std::swap(ylo, yhi);
    lo = std::max(lo, ylo);
    hi = std::min(hi, yhi);
  }
  if (lo > hi) return 0.0;
  return std::clamp(kappa, lo, hi);
}

}  // namespace

ControlSequence project_forward(const DynState& start, const ControlSequence& u,
                                const DynamicBounds& b) {
  ControlSequence out = u;
  double v = start.speed;
  const double dt = u.dt;
  for (auto& c : out.actions) {
    const double lo = std::max(b.accel.lo, (b.speed.lo - v) / dt);
    const double hi = std::min(b.accel.hi, (b.speed.hi - v) / dt);
    c.accel = lo <= hi ? std::clamp(c.accel, lo, hi) : (v < b.speed.lo ? hi : lo);
    c.curvature = clamp_curvature(c.curvature, v, b);
    v += c.accel * dt;
  }
  return out;
}

ControlSequence project_reverse(const DynState& end, const ControlSequence& u,
                                const DynamicBounds& b) {
  ControlSequence out = u;
  double v_next = end.speed;
  const double dt = u.dt;
  for (std::size_t k = out.size(); k-- > 0;) {
    auto& c = out.actions[k];
    // v_k = v_next - a dt must stay in the speed box.
    const double lo = std::max(b.accel.lo, (v_next - b.speed.hi) / dt);
    const double hi = std::min(b.accel.hi, (v_next - b.speed.lo) / dt);
    c.accel = lo <= hi ? std::clamp(c.accel, lo, hi) : (v_next > b.speed.hi ? hi : lo);
    const double v = v_next - c.accel * dt;
    c.curvature = clamp_curvature(c.curvature, v, b);
    v_next = v;
  }
  return out;
}

}  // namespace advdo::dynamics
