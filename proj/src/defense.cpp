#include "advdo/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace advdo::defense {

void AdvTrainConfig::validate() const {
  if (!(mix >= 0.0 && mix <= 1.0)) throw InvalidInput("advtrain: mix must lie in [0, 1]");
  if (train.epochs < 0 || !(train.lr >= 0.0)) throw InvalidInput("advtrain: invalid epochs or lr");
  attack.validate();
}

AdvTrainResult adversarial_train(std::shared_ptr<const predictors::SocialMlp> init,
                                 const std::vector<Scene>& dataset, const AdvTrainConfig& cfg) {
  cfg.validate();
  if (!init) throw InvalidInput("advtrain: initial model required");
  if (dataset.empty()) throw InvalidInput("advtrain: empty dataset");
  for (const auto& s : dataset) {
    s.validate();
    if (!s.has_futures()) throw InvalidInput("advtrain: every scene needs futures");
    if (static_cast<int>(s.history_length()) != init->history() || s.horizon != init->horizon())
      throw InvalidInput("advtrain: scene shape differs from the model");
  }

  AdvTrainResult res;
  res.model = std::make_shared<predictors::SocialMlp>(*init);
  predictors::AdamState opt(*res.model);
  // Same epoch seeds as train_surrogate; the attack share has its own stream.
  std::mt19937_64 seeder(cfg.train.seed ^ 0x5eedULL);
  std::mt19937_64 picker(cfg.train.seed ^ 0xad7ULL);
  const std::size_t n_adv = static_cast<std::size_t>(std::llround(cfg.mix * static_cast<double>(dataset.size())));
  std::vector<std::size_t> order(dataset.size());

  for (int e = 0; e < cfg.train.epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), picker);
    std::vector<Scene> mixed = dataset;
    int attacked = 0;
    if (cfg.attack.pgd_steps > 0) {
      for (std::size_t j = 0; j < n_adv; ++j) {
        const std::size_t i = order[j];
        const auto r = attack::attack_single(dataset[i], *res.model, cfg.attack);
        if (r.best_iterate == 0) continue;
        mixed[i] = r.apply(dataset[i]);
        ++attacked;
      }
    }
    const double l = predictors::train_epoch(*res.model, predictors::samples_of(mixed), cfg.train, opt, seeder());
    res.loss_trace.push_back(l);
    res.attacked.push_back(attacked);
    if (!std::isfinite(l)) throw TrainingError("advtrain: non-finite loss", res.loss_trace);
  }
  return res;
}

Augmented augment(const std::vector<Scene>& scenes, const std::vector<attack::Direction>& directions,
                  const attack::AttackConfig& cfg) {
  Augmented out;
  for (const auto& s : scenes) {
    s.validate();
    const Path& h = s.histories[static_cast<std::size_t>(s.adv)];
    const Vec2 d = h.back() - h[h.size() - 2];
    const double heading = d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : 0.0;
    for (auto dir : directions) {
      auto r = attack::generate_augmentation(s, attack::direction_vector(heading, dir), cfg);
      out.scenes.push_back(r.apply(s));
      out.results.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace advdo::defense
