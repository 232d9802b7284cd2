#pragma once

// Differentiable kinematic bicycle model driven by acceleration and curvature.
//
// State s = {p, theta, v}, control u = {a, kappa}, explicit Euler at step dt:
//   v'     = v + a dt
//   theta' = theta + v kappa dt
//   p'     = p + v (cos theta, sin theta) dt
//
// A sequence of n controls yields n + 1 states. The last control never reaches
// a position, so only the first n - 1 controls are observable from positions.

#include "advdo/core.hpp"

#include <span>
#include <vector>

namespace advdo::dynamics {

struct DynState {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
};

struct ControlAction {
  double accel = 0.0;
  double curvature = 0.0;
};

struct ControlSequence {
  double dt = 0.1;
  std::vector<ControlAction> actions;

  std::size_t size() const { return actions.size(); }
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
};

/// Box bounds on speed, acceleration, curvature and yaw rate (v kappa).
struct DynamicBounds {
  Range speed{0.0, 40.0};
  Range accel{-10.0, 10.0};
  Range curvature{-0.3, 0.3};
  Range yaw_rate{-1.0, 1.0};

  void validate() const;
};

/// Per-step dynamic parameters aligned to a trajectory of L positions:
/// heading and speed have L - 1 entries (one per displacement); accel,
/// curvature and yaw_rate have L - 2 entries.
struct DynParams {
  std::vector<double> heading;
  std::vector<double> speed;
  std::vector<double> accel;
  std::vector<double> curvature;
  std::vector<double> yaw_rate;
  // True where the speed fell below kStationarySpeed and curvature was zeroed.
  std::vector<bool> stationary;
};

/// Below this speed (m/s) curvature is unobservable and reported as zero.
inline constexpr double kStationarySpeed = 0.05;

std::vector<DynState> rollout(const DynState& start, const ControlSequence& u);

/// Reverse-time rollout anchored at the final state. Returns n + 1 states whose
/// last element is `end`; the result equals rollout(result.front(), u).
std::vector<DynState> rollout_reverse(const DynState& end, const ControlSequence& u);

Path positions_of(const std::vector<DynState>& states);

DynParams inverse(std::span<const Vec2> positions, double dt);

/// Observable parameters read directly off a rollout; numerically equal to
/// inverse(positions_of(states)) but free of finite-difference roundoff.
DynParams params_from_rollout(const std::vector<DynState>& states, const ControlSequence& u);

struct StateCotangent {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
  double speed = 0.0;
};

struct RolloutGradient {
  std::vector<ControlAction> controls;
  // Gradient with respect to the anchor state (start for rollout, end for
  // rollout_reverse).
  StateCotangent anchor;
};

/// Exact vector-Jacobian product of rollout(). `cotangent` has one entry per
/// output state.
RolloutGradient rollout_pullback(const DynState& start, const ControlSequence& u,
                                 std::span<const StateCotangent> cotangent);
RolloutGradient rollout_pullback(const DynState& start, const ControlSequence& u,
                                 std::span<const Vec2> position_cotangent);

RolloutGradient rollout_reverse_pullback(const DynState& end, const ControlSequence& u,
                                         std::span<const StateCotangent> cotangent);

/// z - sigmoid(z) + 0.5, the per-parameter soft-clip term.
double soft_clip_term(double z);
double soft_clip_term_grad(double z);

/// Sum of soft_clip_term((x - lb) / (ub - lb)) over speed, accel, curvature
/// and yaw rate at every step.
double l_dyn(const DynParams& params, const DynamicBounds& bounds);

enum class PenaltyForm {
  // Soft-clip term on the normalized distance beyond the violated bound,
  // squared; zero inside the box.
  Excess,
  // l_dyn as written, applied over the whole range.
  Literal,
};

struct ParamsCotangent {
  std::vector<double> speed, accel, curvature, yaw_rate;
};

double dyn_penalty(const DynParams& params, const DynamicBounds& bounds, PenaltyForm form,
                   ParamsCotangent* grad = nullptr);

/// Chains a cotangent on params_from_rollout() back to state cotangents
/// (accumulated into `states_cot`) and control gradients (accumulated into
/// `control_grad`).
void params_pullback(const std::vector<DynState>& states, const ControlSequence& u,
                     const ParamsCotangent& dparams, std::vector<StateCotangent>& states_cot,
                     std::vector<ControlAction>& control_grad);

/// Max violation of the box, normalized by the parameter range; <= 0 means
/// in-bound.
double max_violation(const DynParams& params, const DynamicBounds& bounds);
bool violates(const DynParams& params, const DynamicBounds& bounds, double tol = 1e-9);

/// Sequentially clamp controls so that every reached speed and yaw rate stays
/// in bounds. Assumes the anchor speed is itself in bounds.
ControlSequence project_forward(const DynState& start, const ControlSequence& u,
                                const DynamicBounds& bounds);
ControlSequence project_reverse(const DynState& end, const ControlSequence& u,
                                const DynamicBounds& bounds);

}  // namespace advdo::dynamics
