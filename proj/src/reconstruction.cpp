#include "advdo/reconstruction.hpp"

#include "advdo/optim.hpp"

#include <algorithm>
#include <cmath>

namespace advdo::recon {

using namespace dynamics;

Path DenseTrajectory::knots() const {
  Path out;
  for (std::size_t i = 0; i < positions.size(); i += static_cast<std::size_t>(factor))
    out.push_back(positions[i]);
  return out;
}

DynParams DenseTrajectory::params() const { return params_from_rollout(states(), controls); }

DenseTrajectory DenseTrajectory::from_controls(const DynState& start, ControlSequence controls,
                                               int factor) {
  DenseTrajectory d;
  d.factor = factor;
  d.start = start;
  d.positions = positions_of(rollout(start, controls));
  d.controls = std::move(controls);
  return d;
}

void ReconConfig::validate() const {
  if (steps < 0) throw InvalidInput("recon: steps must be >= 0");
  if (!(lr > 0.0)) throw InvalidInput("recon: lr must be > 0");
  if (factor < 1) throw InvalidInput("recon: factor must be >= 1");
  bounds.validate();
}

DenseTrajectory linear_interpolate(std::span<const Vec2> history, int factor, double dt) {
  if (factor < 1) throw InvalidInput("linear_interpolate: factor must be >= 1");
  if (history.size() < 2) throw InvalidInput("linear_interpolate: need at least 2 knots");
  if (!(dt > 0.0)) throw InvalidInput("linear_interpolate: dt must be positive");

  DenseTrajectory d;
  d.factor = factor;
  const double f = factor;
  for (std::size_t k = 0; k + 1 < history.size(); ++k)
    for (int j = 0; j < factor; ++j)
      d.positions.push_back((1.0 - j / f) * history[k] + (j / f) * history[k + 1]);
  d.positions.push_back(history.back());

  const double ddt = dt / f;
  const auto p = inverse(d.positions, ddt);
  d.start.position = d.positions.front();
  d.start.heading = p.heading.front();
  d.start.speed = p.speed.front();
  d.controls.dt = ddt;
  d.controls.actions.resize(d.positions.size() - 1);
  for (std::size_t t = 0; t < p.accel.size(); ++t)
    d.controls.actions[t] = {p.accel[t], p.curvature[t]};
  // The final control does not reach any position.
  if (!p.accel.empty()) d.controls.actions.back() = d.controls.actions[p.accel.size() - 1];
  return d;
}

double recon_loss(const ControlSequence& controls, const DynState& start,
                  std::span<const Vec2> knots, const DynamicBounds& bounds, PenaltyForm penalty,
                  ReconLossGrad* grad) {
  if (knots.size() < 2) throw InvalidInput("recon_loss: need at least 2 knots");
  const std::size_t n = controls.size();
  if (n % (knots.size() - 1) != 0)
    throw InvalidInput("recon_loss: control count is not a multiple of the knot spacing");
  const std::size_t f = n / (knots.size() - 1);
  const auto states = rollout(start, controls);

  const double K = static_cast<double>(knots.size());
  double mse = 0.0;
  std::vector<StateCotangent> cot(states.size());
  for (std::size_t k = 0; k < knots.size(); ++k) {
    const Vec2 e = states[k * f].position - knots[k];
    mse += e.squaredNorm() / K;
    cot[k * f].position = 2.0 * e / K;
  }
  const auto params = params_from_rollout(states, controls);
  ParamsCotangent pg;
  const double dyn = dyn_penalty(params, bounds, penalty, grad ? &pg : nullptr);
  if (grad) {
    std::vector<ControlAction> direct(n);
    params_pullback(states, controls, pg, cot, direct);
    const auto g = rollout_pullback(start, controls, cot);
    grad->controls = g.controls;
    for (std::size_t t = 0; t < n; ++t) {
      grad->controls[t].accel += direct[t].accel;
      grad->controls[t].curvature += direct[t].curvature;
    }
    grad->start = g.anchor;
  }
  return mse + dyn;
}

double knot_mse(const DenseTrajectory& dense, std::span<const Vec2> knots) {
  const auto k = dense.knots();
  if (k.size() != knots.size()) throw InvalidInput("knot_mse: knot count mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) s += (k[i] - knots[i]).squaredNorm();
  return s / static_cast<double>(k.size());
}

namespace {

struct Packed {
  DynState start;
  ControlSequence controls;
};

std::vector<double> pack(const Packed& p, bool with_start) {
  std::vector<double> x;
  x.reserve(2 * p.controls.size() + 2);
  for (const auto& c : p.controls.actions) {
    x.push_back(c.accel);
    x.push_back(c.curvature);
  }
  if (with_start) {
    x.push_back(p.start.heading);
    x.push_back(p.start.speed);
  }
  return x;
}

Packed unpack(const std::vector<double>& x, const Packed& like, bool with_start) {
  Packed p = like;
  for (std::size_t t = 0; t < p.controls.size(); ++t)
    p.controls.actions[t] = {x[2 * t], x[2 * t + 1]};
  if (with_start) {
    p.start.heading = wrap_angle(x[2 * p.controls.size()]);
    p.start.speed = x[2 * p.controls.size() + 1];
  }
  return p;
}

Packed feasible(Packed p, const DynamicBounds& b) {
  p.start.speed = b.speed.clamp(p.start.speed);
  p.controls = project_forward(p.start, p.controls, b);
  return p;
}

}  // namespace

ReconResult reconstruct(std::span<const Vec2> history, double dt, const ReconConfig& cfg) {
  cfg.validate();
  if (history.size() < 3) throw InvalidInput("reconstruct: need at least 3 knots");

  const auto init = linear_interpolate(history, cfg.factor, dt);
  Packed cur = feasible({init.start, init.controls}, cfg.bounds);

  auto loss_at = [&](const Packed& p, ReconLossGrad* g) {
    return recon_loss(p.controls, p.start, history, cfg.bounds, cfg.penalty, g);
  };

  ReconResult res;
  double loss = loss_at(cur, nullptr);
  res.loss_trace.push_back(loss);
  if (!std::isfinite(loss)) throw OptimizationDiverged("reconstruct: non-finite loss", res.loss_trace);

  auto x = pack(cur, cfg.optimize_start);
  std::vector<double> scale(x.size(), 1.0);
  if (cfg.range_scaled_lr) {
    for (std::size_t t = 0; t < cur.controls.size(); ++t) {
      scale[2 * t] = cfg.bounds.accel.width();
      scale[2 * t + 1] = cfg.bounds.curvature.width();
    }
    if (cfg.optimize_start) {
      scale[x.size() - 2] = 2.0 * M_PI;
      scale[x.size() - 1] = cfg.bounds.speed.width();
    }
  }
  optim::Adam adam(x.size());
  for (int step = 0; step < cfg.steps; ++step) {
    ReconLossGrad g;
    loss_at(cur, &g);
    std::vector<double> grad;
    grad.reserve(x.size());
    for (const auto& c : g.controls) {
      grad.push_back(c.accel);
      grad.push_back(c.curvature);
    }
    if (cfg.optimize_start) {
      grad.push_back(g.start.heading);
      grad.push_back(g.start.speed);
    }
    for (double v : grad)
      if (!std::isfinite(v))
        throw OptimizationDiverged("reconstruct: non-finite gradient", res.loss_trace);

    const auto direction = adam.direction(grad);
    double lr = cfg.lr;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h, lr *= 0.5) {
      auto trial = x;
      for (std::size_t i = 0; i < x.size(); ++i) trial[i] -= lr * scale[i] * direction[i];
      Packed cand = feasible(unpack(trial, cur, cfg.optimize_start), cfg.bounds);
      const double l = loss_at(cand, nullptr);
      if (!std::isfinite(l))
        throw OptimizationDiverged("reconstruct: non-finite loss", res.loss_trace);
      if (l <= loss) {
        cur = std::move(cand);
        x = pack(cur, cfg.optimize_start);
        loss = l;
        accepted = true;
        break;
      }
    }
    if (accepted) {
      res.loss_trace.push_back(loss);
      ++res.accepted_steps;
    } else {
      adam = optim::Adam(x.size());
    }
  }

  res.trajectory = DenseTrajectory::from_controls(cur.start, cur.controls, cfg.factor);
  res.params = res.trajectory.params();
  return res;
}

}  // namespace advdo::recon
