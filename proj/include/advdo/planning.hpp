#pragma once

#include "advdo/attack.hpp"
#include "advdo/dynamics.hpp"
#include "advdo/map.hpp"
#include "advdo/predictors.hpp"
#include "advdo/scene.hpp"

#include <optional>
#include <string>
#include <vector>

namespace advdo::planning {

/// Control period of every plan, seconds.
inline constexpr double kControlDt = 0.1;

struct AgentForecast {
  int agent = -1;
  Path path;  // positions at dt, 2 dt, ...
  Footprint footprint;
};

struct PlanRequest {
  dynamics::DynState ego;
  Footprint ego_footprint;
  const MapModel* map = nullptr;
  std::vector<AgentForecast> agents;
  double dt = 0.5;        // forecast step
  double horizon = 6.0;   // seconds
  double target_speed = 10.0;
  dynamics::DynamicBounds bounds;
};

struct Plan {
  std::string planner;
  dynamics::DynState start;
  dynamics::ControlSequence controls;  // at kControlDt
  std::vector<dynamics::DynState> states;  // rollout(start, controls)
  double cost = 0.0;
  bool emergency = false;
  double offset = 0.0;  // selected lateral offset, lattice only

  /// States at t = dt, 2 dt, ..., horizon.
  std::vector<dynamics::DynState> sampled(double dt) const;
};

class Planner {
 public:
  virtual ~Planner() = default;
  virtual std::string name() const = 0;
  virtual Plan plan(const PlanRequest& req) const = 0;
};

/// Lane keeping with braking behind agents predicted to block the lane.
class RulePlanner final : public Planner {
 public:
  struct Config {
    double ttc = 3.0;            // s
    double comfort_decel = 3.0;  // m/s^2, raised up to -accel.lo when needed
    double stop_margin = 2.0;    // m, bumper to bumper
    double speed_gain = 0.5;     // 1/s
    double max_accel = 1.5;      // m/s^2 while cruising
  };
  RulePlanner() = default;
  explicit RulePlanner(Config c) : cfg_(c) {}
  std::string name() const override { return "rule"; }
  Plan plan(const PlanRequest& req) const override;
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
};

/// Conformal lattice of laterally offset paths, scored against the forecasts,
/// with the chosen path tracked by a short-horizon MPC.
class LatticeMpcPlanner final : public Planner {
 public:
  struct Config {
    std::vector<double> offsets{0.0, 0.75, -0.75, 1.5, -1.5, 2.25, -2.25};
    double transition = 20.0;  // m, cubic lateral transition length
    double margin = 0.2;       // m, footprint inflation for candidate checks
    double sigma = 2.0;        // interaction cost scale, m
    double w_offset = 1.0;
    double w_effort = 10.0;
    double w_interaction = 5.0;
    int mpc_steps = 12;
    double mpc_dt = 0.5;
    int sweeps = 2;
    double speed_gain = 0.5;
    double max_accel = 1.5;
  };
  LatticeMpcPlanner() = default;
  explicit LatticeMpcPlanner(Config c) : cfg_(std::move(c)) {}
  std::string name() const override { return "lattice-mpc"; }
  Plan plan(const PlanRequest& req) const override;
  const Config& config() const { return cfg_; }

 private:
  Config cfg_;
};

enum class PlannerKind { Rule, LatticeMpc };
PlannerKind planner_from_string(const std::string& s);
std::string to_string(PlannerKind k);
std::unique_ptr<Planner> make_planner(PlannerKind k);

// Collision and off-road ----------------------------------------------------------

struct Pose {
  Vec2 position = Vec2::Zero();
  double heading = 0.0;
};

struct CollisionEvent {
  int step = 0;
  int agent = -1;
  bool operator==(const CollisionEvent&) const = default;
};

/// Box overlap per step between the ego and every agent track (all tracks as
/// long as `ego`).
std::vector<CollisionEvent> detect_collision(const std::vector<Pose>& ego, const Footprint& ego_fp,
                                             const std::vector<std::vector<Pose>>& agents,
                                             const std::vector<Footprint>& footprints);
/// Steps where the ego center is outside every drivable polygon.
std::vector<int> detect_offroad(const std::vector<Pose>& ego, const MapModel& map);

// Simulation -----------------------------------------------------------------

/// Logged positions of every agent at dt; index `start` is t = 0.
struct Episode {
  std::string id;
  double dt = 0.5;
  int history = 4;
  int start = 3;
  int ego = 0;
  int adv = 1;
  std::vector<Path> logs;
  std::vector<Footprint> footprints;
  std::vector<std::string> ids;
  std::string map_ref;
  double target_speed = -1.0;  // < 0: the ego's logged speed at t = 0

  std::size_t agents() const { return logs.size(); }
  Footprint footprint(std::size_t i) const { return i < footprints.size() ? footprints[i] : Footprint{}; }
  void validate() const;
};

enum class SimMode { Open, Closed };
SimMode sim_mode_from_string(const std::string& s);
std::string to_string(SimMode m);

struct SimConfig {
  SimMode mode = SimMode::Closed;
  double duration = 6.0;
  double replan = 0.5;
  int prediction_horizon = 12;
  dynamics::DynamicBounds bounds;
  std::optional<attack::AttackConfig> attack;  // sequential, over cfg.lp frames

  void validate(double dt) const;
};

struct SimOutcome {
  std::vector<dynamics::DynState> ego;  // every kControlDt, from t = 0
  std::vector<CollisionEvent> collisions;
  std::vector<int> offroad;
  int replans = 0;
  int emergency_plans = 0;
  std::string error;  // planner error message; the rollout stops there
  bool attacked = false;
  double attack_deviation = 0.0;
  Path adversarial_history;

  bool failed() const { return !collisions.empty() || !offroad.empty(); }
};

/// Replays the logs for every non-ego agent, predicts at each replan from the
/// last `history` observations, and drives the ego along the plans. With an
/// attack the adversarial agent's logged positions over
/// [start - H + 1, start + lp - 1] are replaced by the sequential attack result
/// before the first prediction.
SimOutcome simulate(const Episode& ep, const MapModel& map, const predictors::PredictionModel& model,
                    const Planner& planner, const SimConfig& cfg);

/// Returns the scene futures as a single certain mode.
class OraclePredictor final : public predictors::PredictionModel {
 public:
  std::string name() const override { return "oracle"; }
  Prediction predict(const Scene& scene) const override;
  HistoryGrad pullback(const Scene& scene, const PredictionCotangent& dY) const override;
  bool has_exact_gradient() const override { return true; }
};

}  // namespace advdo::planning
