#pragma once

// Adversarial training and augmentation of the social-mlp surrogate.

#include "advdo/attack.hpp"
#include "advdo/predictors.hpp"

#include <memory>
#include <vector>

namespace advdo::defense {

struct AdvTrainConfig {
  predictors::TrainConfig train;
  attack::AttackConfig attack;
  double mix = 0.5;  // fraction of scenes replaced by their adversarial version each epoch

  void validate() const;
};

struct AdvTrainResult {
  std::shared_ptr<predictors::SocialMlp> model;
  std::vector<double> loss_trace;
  std::vector<int> attacked;  // scenes attacked per epoch
};

/// Each epoch attacks a seeded share `mix` of the scenes against the current
/// weights and trains one epoch on the mixed set. Scenes whose attack does not
/// improve on the reconstruction stay benign, so zero PGD steps reproduce
/// train_surrogate from `init` exactly.
AdvTrainResult adversarial_train(std::shared_ptr<const predictors::SocialMlp> init,
                                 const std::vector<Scene>& dataset, const AdvTrainConfig& cfg);

struct Augmented {
  std::vector<Scene> scenes;  // one per (scene, direction), adversarial agent deviated
  std::vector<attack::AttackResult> results;
};

/// Deviates every scene's adversarial agent along each direction relative to
/// its current heading.
Augmented augment(const std::vector<Scene>& scenes, const std::vector<attack::Direction>& directions,
                  const attack::AttackConfig& cfg);

}  // namespace advdo::defense
