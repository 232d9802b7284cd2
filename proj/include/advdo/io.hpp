#pragma once

// Versioned JSON files for scenarios, maps and closed-loop episodes, and a
// binary sidecar for dense trajectories.

#include "advdo/map.hpp"
#include "advdo/planning.hpp"
#include "advdo/reconstruction.hpp"
#include "advdo/scene.hpp"

#include <string>
#include <vector>

namespace advdo::io {

inline constexpr const char* kScenarioFormat = "advdo-scenario/1";
inline constexpr const char* kMapFormat = "advdo-map/1";
inline constexpr const char* kEpisodesFormat = "advdo-episodes/1";

struct ScenarioFile {
  double dt = 0.5;
  int history = 4;
  int horizon = 12;
  std::string map;  // path relative to the scenario file, may be empty
  std::vector<std::string> names;  // one per scene
  std::vector<Scene> scenes;

  void validate() const;
};

struct EpisodeFile {
  std::string map;
  std::vector<planning::Episode> episodes;

  void validate() const;
};

std::string to_json(const ScenarioFile& f);
std::string to_json(const MapModel& m);
std::string to_json(const EpisodeFile& f);

/// `source` prefixes every error message. Throws ParseError.
ScenarioFile parse_scenario(const std::string& text, const std::string& source = "<string>");
MapModel parse_map(const std::string& text, const std::string& source = "<string>");
EpisodeFile parse_episodes(const std::string& text, const std::string& source = "<string>");

/// Loads and validates; a non-empty map reference must name an existing file.
ScenarioFile load_scenario(const std::string& path);
MapModel load_map(const std::string& path);
EpisodeFile load_episodes(const std::string& path);

void save_scenario(const ScenarioFile& f, const std::string& path);
void save_map(const MapModel& m, const std::string& path);
void save_episodes(const EpisodeFile& f, const std::string& path);

/// `ref` resolved against the directory of `file`; absolute refs unchanged.
std::string resolve(const std::string& file, const std::string& ref);

std::string read_text(const std::string& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::string& path, const std::string& text);

/// Little-endian records: magic, version, count, then per trajectory the
/// factor, start state, controls and positions as doubles.
std::string encode_dense(const std::vector<recon::DenseTrajectory>& trajs);
std::vector<recon::DenseTrajectory> decode_dense(const std::string& bytes, const std::string& source = "<bytes>");
void save_dense(const std::vector<recon::DenseTrajectory>& trajs, const std::string& path);
std::vector<recon::DenseTrajectory> load_dense(const std::string& path);

}  // namespace advdo::io
