#pragma once

#include "advdo/core.hpp"

#include <string>
#include <vector>

namespace advdo {

struct Footprint {
  double length = 4.0;
  double width = 1.8;
};

/// N agents observed over H steps at `dt`, with T-step futures when known.
/// histories[i].back() is the current position of agent i.
struct Scene {
  double dt = 0.5;
  int horizon = 12;
  std::vector<Path> histories;
  std::vector<Path> futures;  // empty, or N paths of `horizon` points
  int adv = 0;
  int ego = 1;
  std::string map_ref;
  std::vector<Footprint> footprints;  // empty, or one per agent
  std::vector<std::string> ids;

  std::size_t agents() const { return histories.size(); }
  std::size_t history_length() const { return histories.empty() ? 0 : histories.front().size(); }
  bool has_futures() const { return !futures.empty(); }
  Footprint footprint(std::size_t i) const { return i < footprints.size() ? footprints[i] : Footprint{}; }

  void validate() const;
};

/// Per-agent tensors shaped like the histories (N x H).
using HistoryGrad = std::vector<Path>;

/// K modes of N agents over T steps, with per-agent mode probabilities.
struct Prediction {
  std::vector<std::vector<Path>> modes;  // [k][agent][t]
  std::vector<std::vector<double>> probs;  // [k][agent]

  std::size_t mode_count() const { return modes.size(); }
  std::size_t agents() const { return modes.empty() ? 0 : modes.front().size(); }
  /// Index of the highest-probability mode of agent i (lowest index on ties).
  std::size_t best_mode(std::size_t agent) const;
  Path most_likely(std::size_t agent) const { return modes[best_mode(agent)][agent]; }
  void validate(std::size_t agents, int horizon) const;
};

/// Cotangent on Prediction::modes, same shape.
using PredictionCotangent = std::vector<std::vector<Path>>;

PredictionCotangent zero_cotangent(const Prediction& p);
HistoryGrad zero_history_grad(const Scene& s);

}  // namespace advdo
