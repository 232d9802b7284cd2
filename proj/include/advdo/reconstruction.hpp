#pragma once

// Dense, control-representable reconstruction of a sparse history.

#include "advdo/dynamics.hpp"

#include <span>
#include <vector>

namespace advdo::recon {

using dynamics::ControlSequence;
using dynamics::DynamicBounds;
using dynamics::DynParams;
using dynamics::DynState;

/// Upsampling of H sparse knots at factor f: f (H - 1) controls at dt / f and
/// the f (H - 1) + 1 positions they roll out to. Knot k sits at dense index k f.
struct DenseTrajectory {
  int factor = 1;
  DynState start;
  ControlSequence controls;
  Path positions;

  double dt_dense() const { return controls.dt; }
  std::size_t knot_count() const { return (positions.size() - 1) / factor + 1; }
  Path knots() const;
  std::vector<DynState> states() const { return dynamics::rollout(start, controls); }
  DynParams params() const;

  static DenseTrajectory from_controls(const DynState& start, ControlSequence controls, int factor);
};

struct ReconConfig {
  int steps = 5;
  double lr = 0.05;
  int factor = 5;
  int max_halvings = 20;
  DynamicBounds bounds;
  dynamics::PenaltyForm penalty = dynamics::PenaltyForm::Excess;
  // Also optimize the start heading and speed; the start position stays on
  // the first knot.
  bool optimize_start = true;
  // Per-coordinate step is lr times the width of that coordinate's bound
  // (accel, curvature, speed; 2 pi for heading) when set.
  bool range_scaled_lr = true;

  void validate() const;
};

DenseTrajectory linear_interpolate(std::span<const Vec2> history, int factor, double dt);

struct ReconLossGrad {
  std::vector<dynamics::ControlAction> controls;
  dynamics::StateCotangent start;
};

/// Mean squared knot error plus the dynamic penalty of the rollout. The knot
/// spacing is inferred from the control count.
double recon_loss(const ControlSequence& controls, const DynState& start,
                  std::span<const Vec2> knots, const DynamicBounds& bounds,
                  dynamics::PenaltyForm penalty = dynamics::PenaltyForm::Excess,
                  ReconLossGrad* grad = nullptr);

double knot_mse(const DenseTrajectory& dense, std::span<const Vec2> knots);

struct ReconResult {
  DenseTrajectory trajectory;
  DynParams params;
  std::vector<double> loss_trace;  // initial loss, then one entry per accepted step
  int accepted_steps = 0;
};

ReconResult reconstruct(std::span<const Vec2> history, double dt, const ReconConfig& cfg);

}  // namespace advdo::recon
