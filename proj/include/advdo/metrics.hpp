#pragma once

#include "advdo/attack.hpp"
#include "advdo/map.hpp"
#include "advdo/scene.hpp"

#include <optional>
#include <span>
#include <vector>

namespace advdo::metrics {

struct MetricsConfig {
  double miss_threshold = 2.0;  // m
  double rho = 5.0;             // sensitivity neighbourhood, m
  double sigma = 2.0;           // interaction cost length scale, m

  void validate() const;
};

// Prediction accuracy -------------------------------------------------------

struct DisplacementError {
  double ade = 0.0;
  double fde = 0.0;
};

/// Min over modes of the mean and of the final pointwise distance, minimized
/// independently.
DisplacementError displacement_error(const Prediction& pred, std::size_t agent, const Path& truth);
/// Min over modes of the maximum pointwise distance.
double max_displacement(const Prediction& pred, std::size_t agent, const Path& truth);

bool is_miss(const Prediction& pred, std::size_t agent, const Path& truth, double threshold);
double miss_rate(const Prediction& pred, const std::vector<Path>& truth,
                 std::span<const std::size_t> agents, double threshold);

/// Any waypoint of the most likely mode outside the drivable region.
bool is_offroad(const Prediction& pred, std::size_t agent, const MapModel& map);
double offroad_rate(const Prediction& pred, std::span<const std::size_t> agents, const MapModel& map);

/// Fraction of trajectories whose inverse-dynamics parameters leave `bounds`.
double violation_rate(std::span<const Path> trajectories, double dt,
                      const dynamics::DynamicBounds& bounds);
/// Same over attack outputs, judged on the dense adversarial trajectory.
double violation_rate(std::span<const attack::AttackResult> results,
                      const dynamics::DynamicBounds& bounds);

// Planning sensitivity -----------------------------------------------------

/// Interaction cost sum_t exp(-|a_t - e_t| / sigma) between an agent path and
/// the ego plan (equal lengths). `grad` receives d cost / d a_t.
double interaction_cost(const Path& agent, const Path& ego, double sigma, Path* grad = nullptr);

/// Mean over t of |d cost / d a_t|. At coincident points the one-sided limit
/// 1 / sigma is used.
double sensitivity(const Path& agent, const Path& ego, double sigma);

struct Aggregated {
  double value = 0.0;
  std::size_t count = 0;  // agents within rho
};

/// Mean PI (most likely mode against `ego_plan`) over agents other than adv and
/// ego whose history comes within rho of the adversarial agent's history.
Aggregated aggregated_sensitivity(const Scene& scene, const Prediction& pred, const Path& ego_plan,
                                  const MetricsConfig& cfg);

inline double delta_sensitivity(const Aggregated& benign, const Aggregated& adversarial) {
  return adversarial.value - benign.value;
}

struct Weighted {
  double value = 0.0;
  bool fallback = false;  // all weights zero, unweighted mean returned
};

Weighted weighted_mean(std::span<const double> values, std::span<const double> weights);

// Per-scene evaluation --------------------------------------------------------

struct AgentEval {
  std::size_t agent = 0;
  double ade = 0.0;
  double fde = 0.0;
  double max_disp = 0.0;
  bool miss = false;
  bool offroad = false;
  double pi = 0.0;
};

struct ErrorSummary {
  double ade = 0.0;
  double fde = 0.0;
  double mr = 0.0;
  double orr = 0.0;
};

struct PlanningAware {
  double pi_ade = 0.0;
  double pi_fde = 0.0;
  double pi_mr = 0.0;
  double pi_orr = 0.0;
  bool fallback = false;
};

struct SceneEval {
  std::vector<AgentEval> agents;
  ErrorSummary summary;
  PlanningAware planning;
};

/// Agents scored by the accuracy metrics: everyone but the ego.
std::vector<std::size_t> evaluation_agents(const Scene& scene);

/// Scores `pred` against the scene futures. ORR is 0 when `map` is null. PI
/// weights use the ego's ground-truth future as the plan, or all zero without
/// an ego.
SceneEval evaluate(const Scene& scene, const Prediction& pred, const MapModel* map,
                   const MetricsConfig& cfg);

PlanningAware planning_aware(std::span<const AgentEval> agents);

// Similarity ---------------------------------------------------------------

struct Similarity {
  double dtw = 0.0;
  double frechet = 0.0;
  double pcm = 0.0;
  double area = 0.0;
  double cl = 0.0;
};

/// Sum of point distances along the optimal monotone alignment.
double dtw(std::span<const Vec2> a, std::span<const Vec2> b);
/// Discrete Frechet distance.
double frechet(std::span<const Vec2> a, std::span<const Vec2> b);
/// Area swept between the curves after arc-length resampling.
double area_between(std::span<const Vec2> a, std::span<const Vec2> b);
/// Partial curve mapping: the shorter curve is matched against every
/// equal-length arc of the longer one; the smallest area wins.
double pcm(std::span<const Vec2> a, std::span<const Vec2> b);
/// Absolute difference of polyline lengths.
double curve_length_difference(std::span<const Vec2> a, std::span<const Vec2> b);

Similarity trajectory_similarity(std::span<const Vec2> a, std::span<const Vec2> b);

// Transfer, split, statistics ---------------------------------------------

/// Mean over ADE, FDE, MR, ORR of max(0, (attacked - benign) / benign).
/// Metrics with a zero benign value count as increase 0 if attacked is also 0
/// and are skipped otherwise.
double success_degree(const ErrorSummary& benign, const ErrorSummary& attacked);

/// Target success degree over source success degree.
double transfer_rate(const ErrorSummary& source_benign, const ErrorSummary& source_attacked,
                     const ErrorSummary& target_benign, const ErrorSummary& target_attacked);

struct MotionInteraction {
  DisplacementError motion;
  DisplacementError interaction;
  bool interaction_defined = true;
};

/// Prediction change between benign and adversarial most likely modes; Motion
/// on the adversarial agent, Interaction averaged over the other non-ego agents.
MotionInteraction motion_interaction_split(const Scene& scene, const Prediction& benign,
                                           const Prediction& adversarial);

struct SceneStats {
  double speed = 0.0;
  double curvature = 0.0;
};

SceneStats scene_stats(const Scene& scene);

}  // namespace advdo::metrics
