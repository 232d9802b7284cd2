#include "advdo/scene.hpp"

#include <cmath>

namespace advdo {

void Scene::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidInput("scene: dt must be positive");
  if (horizon < 1) throw InvalidInput("scene: horizon must be >= 1");
  const std::size_t n = histories.size();
  if (n == 0) throw InvalidInput("scene: no agents");
  const std::size_t h = histories.front().size();
  if (h < 2) throw InvalidInput("scene: history length must be >= 2");
  for (const auto& p : histories) {
    if (p.size() != h) throw InvalidInput("scene: ragged histories");
    if (!all_finite(p)) throw InvalidInput("scene: non-finite history position");
  }
  if (!futures.empty()) {
    if (futures.size() != n) throw InvalidInput("scene: futures/agents count mismatch");
    for (const auto& p : futures) {
      if (p.size() != static_cast<std::size_t>(horizon))
        throw InvalidInput("scene: future length differs from horizon");
      if (!all_finite(p)) throw InvalidInput("scene: non-finite future position");
    }
  }
  if (adv < 0 || static_cast<std::size_t>(adv) >= n) throw InvalidInput("scene: adv index out of range");
  if (ego != -1) {
    if (ego < 0 || static_cast<std::size_t>(ego) >= n)
      throw InvalidInput("scene: ego index out of range");
    if (ego == adv) throw InvalidInput("scene: adv and ego must differ");
  }
  if (!footprints.empty() && footprints.size() != n)
    throw InvalidInput("scene: footprints/agents count mismatch");
  if (!ids.empty() && ids.size() != n) throw InvalidInput("scene: ids/agents count mismatch");
}

std::size_t Prediction::best_mode(std::size_t agent) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k][agent] > probs[best][agent]) best = k;
  return best;
}

void Prediction::validate(std::size_t n, int horizon) const {
  if (modes.empty()) throw InvalidInput("prediction: no modes");
  if (probs.size() != modes.size()) throw InvalidInput("prediction: probs/modes count mismatch");
  for (std::size_t k = 0; k < modes.size(); ++k) {
    if (modes[k].size() != n || probs[k].size() != n)
      throw InvalidInput("prediction: agent count mismatch");
    for (const auto& p : modes[k]) {
      if (p.size() != static_cast<std::size_t>(horizon))
        throw InvalidInput("prediction: horizon mismatch");
      if (!all_finite(p)) throw InvalidInput("prediction: non-finite position");
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (const auto& pk : probs) {
      if (!(pk[i] >= 0.0)) throw InvalidInput("prediction: negative probability");
      s += pk[i];
    }
    if (std::abs(s - 1.0) > 1e-9) throw InvalidInput("prediction: probabilities do not sum to 1");
  }
}

PredictionCotangent zero_cotangent(const Prediction& p) {
  PredictionCotangent c = p.modes;
  for (auto& m : c)
    for (auto& a : m)
      for (auto& v : a) v.setZero();
  return c;
}

HistoryGrad zero_history_grad(const Scene& s) {
  HistoryGrad g = s.histories;
  for (auto& a : g)
    for (auto& v : a) v.setZero();
  return g;
}

}  // namespace advdo
