#pragma once

// Synthetic scenes on a four-way intersection from kinematic bicycle rollouts.

#include "advdo/io.hpp"
#include "advdo/map.hpp"
#include "advdo/planning.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace advdo::synth {

enum class Template { LaneFollow, Turn, Cross, Stop };

std::string to_string(Template t);
Template template_from_string(const std::string& s);
/// Comma-separated template names.
std::vector<Template> templates_from_list(const std::string& csv);

struct SynthConfig {
  int count = 100;
  std::uint64_t seed = 0;
  double dt = 0.5;
  int history = 4;
  int horizon = 12;
  int factor = 5;          // rollout substeps per observation step
  int min_agents = 3;
  int max_agents = 6;
  double min_gap = 6.0;    // m, closest approach between any two agents
  std::vector<Template> templates{Template::LaneFollow, Template::Turn, Template::Cross, Template::Stop};
  std::string map = "plus.map.json";

  void validate() const;
};

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kArmLength = 100.0;
inline constexpr double kChamfer = 6.0;

/// Two perpendicular two-lane roads crossing at the origin, right-hand
/// traffic, corners cut by kChamfer. Lanes E, W, N, S.
MapModel plus_intersection();

/// Scene i uses the rng stream of (seed, i) and is named "<i>-<template>".
/// Agent 0 is the ego; the adversarial agent is drawn among the others.
io::ScenarioFile synthesize_scenes(const SynthConfig& cfg);

/// Straight road along x, one lane each way, eastbound lane below the axis.
MapModel two_way_road(double lane_width = 3.0, double length = 150.0);

/// Closed-loop episodes on two_way_road(): the ego drives east with a
/// follower close behind at the same speed while the adversarial agent
/// approaches in the oncoming lane; every other episode adds a lead vehicle
/// further ahead in the ego lane. Logged velocities are constant.
enum class EpisodeFamily { Oncoming, OncomingWithLead };

struct EpisodeSynthConfig {
  int count = 10;
  std::uint64_t seed = 0;
  int history = 4;
  double dt = 0.5;
  int frames = 28;  // logged steps, the first history - 1 precede t = 0
  double lane_width = 3.0;
  std::string map = "two-way.map.json";

  void validate() const;
};

std::vector<planning::Episode> closed_loop_episodes(const EpisodeSynthConfig& cfg);
EpisodeFamily family_of(const planning::Episode& ep);

/// Template of a scene synthesized above, from its name.
Template template_of(const std::string& scene_name);

}  // namespace advdo::synth
