#pragma once

// Campaign orchestration: reconstruct, attack and evaluate every scene of a
// scenario file against one or more predictors, optionally simulate
// closed-loop episodes, and persist per-item records plus an aggregate report.
//
// Output directory layout:
//   campaign.json        manifest (config, hash, seed, scene and episode ids)
//   scenes/<name>.json   per-scene record, scenes/<name>.dense sidecar
//   sim/<id>.json        per-episode record
//   report.json          aggregate recomputed from the records
//   bins.csv, transfer.csv, ade_by_speed.svg, ade_by_curvature.svg, transfer.svg

#include "advdo/attack.hpp"
#include "advdo/metrics.hpp"
#include "advdo/planning.hpp"
#include "advdo/predictors.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace advdo::campaign {

inline constexpr const char* kManifestFormat = "advdo-campaign/1";
inline constexpr const char* kSceneRecordFormat = "advdo-scene-result/1";
inline constexpr const char* kSimRecordFormat = "advdo-sim-result/1";
inline constexpr const char* kReportFormat = "advdo-report/1";

/// A predictor: a model file, a built-in surrogate ("builtin:<kind>") or a
/// bridge command.
struct ModelSpec {
  std::string name;
  std::string path;
  std::string command;
};

/// "name=path", or a bare path named after its file stem.
ModelSpec model_spec_from_string(const std::string& s);
predictors::ModelPtr load(const ModelSpec& spec);

struct CampaignConfig {
  std::string scenario;           // empty: no scene stage
  std::string map;                // overrides the scenario's map reference
  std::vector<ModelSpec> models;  // each one is attacked; all score each attack
  bool run_attack = true;
  attack::AttackConfig attack;
  metrics::MetricsConfig metrics;

  std::string episodes;  // empty: no simulation stage
  std::vector<planning::PlannerKind> planners{planning::PlannerKind::Rule, planning::PlannerKind::LatticeMpc};
  planning::SimConfig sim;  // sim.attack is set from `attack` and `lp`
  int lp = 6;

  std::string out;
  std::uint64_t seed = 0;
  int workers = 0;  // 0: hardware concurrency
  // Stop after this many newly finished items, leaving the campaign partial.
  std::optional<int> stop_after;

  void validate() const;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Hash of the result-relevant configuration and the contents of every input
/// file. Output directory, worker count and stop_after are excluded.
std::string config_hash(const CampaignConfig& cfg);

struct CampaignSummary {
  std::string hash;
  int scenes = 0;
  int episodes = 0;
  int skipped = 0;  // already complete in the output directory
  int failed = 0;
  bool partial = false;
};

/// Resumable: records already present with the same hash are kept. A
/// manifest with a different hash is an InvalidInput error.
CampaignSummary run_campaign(const CampaignConfig& cfg);

/// Rebuilds report.json, the CSV tables and the plots of `out` from the
/// manifest and the persisted records.
CampaignSummary write_report(const std::string& out);

/// Scene or episode id as a file name.
std::string file_stem(const std::string& id);

}  // namespace advdo::campaign
