#pragma once

// Adversarial history generation by projected signed-gradient descent over the
// control actions of the adversarial agent's reconstructed dense trajectory.

#include "advdo/predictors.hpp"
#include "advdo/reconstruction.hpp"
#include "advdo/scene.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace advdo::attack {

using dynamics::DynamicBounds;
using recon::DenseTrajectory;

enum class Variant { OptInit, OptEnd };
enum class ModeRule { MostLikely, MinError };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct AttackConfig {
  double alpha = 0.3;   // collision
  double beta = 0.1;    // deviation from the benign dense trajectory
  double gamma = 1.0;   // dynamics penalty
  double eps = 1.0;     // m, knot ball radius
  int pgd_steps = 30;
  double pgd_step_scale = 2.0;
  // Denominator of the per-step size scale * (ub - lb) / schedule. Kept apart
  // from pgd_steps so that a longer run extends a shorter one.
  int step_schedule = 30;
  Variant variant = Variant::OptInit;
  int lp = 1;
  ModeRule mode = ModeRule::MostLikely;
  dynamics::PenaltyForm penalty = dynamics::PenaltyForm::Excess;
  recon::ReconConfig recon;  // bounds and factor are shared with the attack
  std::uint64_t seed = 0;

  const DynamicBounds& bounds() const { return recon.bounds; }
  int factor() const { return recon.factor; }
  void validate() const;
};

/// Raw loss terms of one prediction frame and the weighted total
/// -obj + alpha col + beta bh + gamma dyn.
struct LossTerms {
  double obj = 0.0;
  double col = 0.0;
  double bh = 0.0;
  double dyn = 0.0;
  double total = 0.0;
};

LossTerms combine(LossTerms t, const AttackConfig& cfg);
LossTerms operator+(LossTerms a, const LossTerms& b);

// Individual terms ---------------------------------------------------------

/// Mean over steps of the Euclidean error between one predicted path and the
/// ground truth.
double path_error(const Path& truth, const Path& pred);

/// Mean of path_error over `targets` using the selected mode of each.
double l_obj(const std::vector<Path>& truth, const Prediction& pred, const std::vector<std::size_t>& targets,
             ModeRule rule, PredictionCotangent* grad = nullptr);

/// Mean over others of the mean over steps of 1 / (|D - O| + 1); 0 with no
/// others. `grad` receives d/dD.
double l_col(const Path& dense, const std::vector<Path>& others, Path* grad = nullptr);

/// Mean over steps of soft_clip_term(|D - D*| / eps).
double l_bh(const Path& dense, const Path& benign, double eps, Path* grad = nullptr);

/// Linear upsampling of sparse knots by `factor`.
Path upsample(const Path& knots, int factor);

/// Agents scored by l_obj: every agent except the ego.
std::vector<std::size_t> target_agents(const Scene& scene);

/// Terms of one frame for a given adversarial dense trajectory; `benign` is
/// the reconstructed dense trajectory of the same span.
LossTerms adv_loss(const Scene& scene, const predictors::PredictionModel& model, const Path& dense,
                   const dynamics::DynParams& params, const Path& benign, const AttackConfig& cfg);

// Attacks ------------------------------------------------------------------

struct AttackResult {
  DenseTrajectory adversarial;  // D_adv
  DenseTrajectory benign;       // D* of the original history
  dynamics::DynState anchor;    // start (Opt-init) or end (Opt-end) state
  bool reverse = false;         // positions come from rollout_reverse(anchor, controls)
  Path original;                // X_orig of the adversarial agent
  Path history;                 // X_adv, knot subsample of D_adv
  std::vector<LossTerms> trace;        // per iterate; iterate 0 is D*, pulled into the eps ball if outside
  std::vector<LossTerms> frames;       // per prediction frame at the best iterate
  LossTerms best;                      // sum of frames at the best iterate
  int best_iterate = 0;
  int queries = 0;                     // model forward and pullback evaluations
  double max_knot_deviation = 0.0;
  bool violation = false;

  /// The input scene with the adversarial history substituted.
  Scene apply(const Scene& scene) const;
};

/// Single-frame attack on scene.adv; equivalent to attack_sequential with
/// L_p = 1.
AttackResult attack_single(const Scene& scene, const predictors::PredictionModel& model,
                           const AttackConfig& cfg);

/// Sequential attack over L_p = cfg.lp consecutive frames. The histories span
/// H + L_p - 1 observed steps and the futures follow the last of them. Frame
/// w = 0 .. L_p - 1 sees observed[w .. w + H - 1]; frame losses are summed.
AttackResult attack_sequential(const Scene& scene, int H, const predictors::PredictionModel& model,
                               const AttackConfig& cfg);

/// Window `w` (0-based, w = -t) of a sequential scene with its ground-truth
/// futures taken from the concatenated observation and future streams.
Scene window(const Scene& scene, int H, int w);

/// Summed frame terms of the attack objective at `controls` (the
/// reconstructed benign controls when null), with its control gradient.
LossTerms attack_objective(const Scene& scene, int H, const predictors::PredictionModel& model,
                           const AttackConfig& cfg, const dynamics::ControlSequence* controls = nullptr,
                           std::vector<dynamics::ControlAction>* grad = nullptr);

/// Random signed perturbations with the same eps and bound projection and
/// 2 * pgd_steps + 1 forward queries; best sample kept.
AttackResult attack_random_search(const Scene& scene, const predictors::PredictionModel& model,
                                  const AttackConfig& cfg);

// Augmentation ---------------------------------------------------------------

enum class Direction { Forward, Backward, Left, Right };
Direction direction_from_string(const std::string& s);
std::string to_string(Direction d);

/// Unit vector of `d` relative to `heading`.
Vec2 direction_vector(double heading, Direction d);

/// Deviates scene.adv along `direction`: minimizes mean_k (X - X_aug) . d
/// + gamma l_col under the same bounds and eps ball.
AttackResult generate_augmentation(const Scene& scene, const Vec2& direction, const AttackConfig& cfg);

}  // namespace advdo::attack
