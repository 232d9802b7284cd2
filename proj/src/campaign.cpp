#include "advdo/campaign.hpp"

#include "advdo/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <thread>

namespace advdo::campaign {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const std::vector<double> kSpeedEdges{0.0, 2.0, 4.0, 6.0, 8.0, 10.0, kInf};
const std::vector<double> kCurvatureEdges{0.0, 0.005, 0.01, 0.02, 0.05, kInf};

std::string hex(std::uint64_t h) { return fmt::format("{:016x}", h); }

std::string content_hash(const std::string& path) { return hex(fnv1a(io::read_text(path))); }

ojson range_json(const dynamics::Range& r) { return ojson::array({r.lo, r.hi}); }

ojson bounds_json(const dynamics::DynamicBounds& b) {
  return ojson{{"speed", range_json(b.speed)},
               {"accel", range_json(b.accel)},
               {"curvature", range_json(b.curvature)},
               {"yaw_rate", range_json(b.yaw_rate)}};
}

ojson attack_json(const attack::AttackConfig& a) {
  const auto& r = a.recon;
  return ojson{{"variant", attack::to_string(a.variant)},
               {"alpha", a.alpha},
               {"beta", a.beta},
               {"gamma", a.gamma},
               {"eps", a.eps},
               {"steps", a.pgd_steps},
               {"step_scale", a.pgd_step_scale},
               {"step_schedule", a.step_schedule},
               {"mode", static_cast<int>(a.mode)},
               {"penalty", static_cast<int>(a.penalty)},
               {"seed", a.seed},
               {"recon",
                {{"steps", r.steps},
                 {"lr", r.lr},
                 {"factor", r.factor},
                 {"max_halvings", r.max_halvings},
                 {"penalty", static_cast<int>(r.penalty)},
                 {"optimize_start", r.optimize_start},
                 {"range_scaled_lr", r.range_scaled_lr},
                 {"bounds", bounds_json(r.bounds)}}}};
}

// Result-relevant configuration with input files replaced by content hashes.
ojson canonical(const CampaignConfig& cfg) {
  ojson models = ojson::array();
  for (const auto& m : cfg.models) {
    ojson e{{"name", m.name}};
    if (!m.command.empty())
      e["command"] = m.command;
    else if (m.path.rfind("builtin:", 0) == 0)
      e["builtin"] = m.path.substr(8);
    else
      e["file"] = content_hash(m.path);
    models.push_back(e);
  }
  ojson planners = ojson::array();
  for (auto p : cfg.planners) planners.push_back(planning::to_string(p));
  ojson j{{"seed", cfg.seed},
          {"models", models},
          {"run_attack", cfg.run_attack},
          {"attack", attack_json(cfg.attack)},
          {"metrics",
           {{"miss_threshold", cfg.metrics.miss_threshold},
            {"rho", cfg.metrics.rho},
            {"sigma", cfg.metrics.sigma}}}};
  j["scenario"] = cfg.scenario.empty() ? ojson(nullptr) : ojson(content_hash(cfg.scenario));
  j["map"] = cfg.map.empty() ? ojson(nullptr) : ojson(content_hash(cfg.map));
  if (!cfg.episodes.empty()) {
    j["episodes"] = content_hash(cfg.episodes);
    j["planners"] = planners;
    j["lp"] = cfg.lp;
    j["sim"] = ojson{{"mode", planning::to_string(cfg.sim.mode)},
                     {"duration", cfg.sim.duration},
                     {"replan", cfg.sim.replan},
                     {"prediction_horizon", cfg.sim.prediction_horizon},
                     {"bounds", bounds_json(cfg.sim.bounds)}};
  } else {
    j["episodes"] = nullptr;
  }
  return j;
}

ojson summary_json(const metrics::SceneEval& e, const Scene& s, const Prediction& p) {
  const auto a = static_cast<std::size_t>(s.adv);
  const auto adv = metrics::displacement_error(p, a, s.futures[a]);
  return ojson{{"ade", e.summary.ade},
               {"fde", e.summary.fde},
               {"mr", e.summary.mr},
               {"orr", e.summary.orr},
               {"pi_ade", e.planning.pi_ade},
               {"pi_fde", e.planning.pi_fde},
               {"pi_mr", e.planning.pi_mr},
               {"pi_orr", e.planning.pi_orr},
               {"pi_fallback", e.planning.fallback},
               {"adv_ade", adv.ade},
               {"adv_fde", adv.fde}};
}

Path ego_plan(const Scene& s) {
  return s.ego >= 0 ? s.futures[static_cast<std::size_t>(s.ego)] : Path{};
}

ojson scene_record(const CampaignConfig& cfg, const std::string& hash, const std::string& name, const Scene& scene,
                   const MapModel* map, const std::vector<predictors::ModelPtr>& models,
                   std::vector<recon::DenseTrajectory>* dense) {
  ojson rec{{"format", kSceneRecordFormat}, {"config_hash", hash}, {"seed", cfg.seed}, {"scene", name},
            {"status", "ok"}};
  const auto st = metrics::scene_stats(scene);
  rec["stats"] = {{"speed", st.speed}, {"curvature", st.curvature}};

  std::vector<Prediction> benign;
  for (const auto& m : models) benign.push_back(m->predict(scene));

  ojson out = ojson::array();
  for (std::size_t s = 0; s < models.size(); ++s) {
    const auto eval = metrics::evaluate(scene, benign[s], map, cfg.metrics);
    ojson e{{"model", cfg.models[s].name}, {"benign", summary_json(eval, scene, benign[s])}};
    if (cfg.run_attack) {
      auto acfg = cfg.attack;
      acfg.lp = 1;
      const auto r = attack::attack_single(scene, *models[s], acfg);
      // A run with no improving iterate leaves the scene untouched.
      const Scene adv = r.best_iterate > 0 ? r.apply(scene) : scene;
      const auto sim = metrics::trajectory_similarity(r.original, adv.histories[static_cast<std::size_t>(adv.adv)]);
      ojson a{{"best_iterate", r.best_iterate},
              {"queries", r.queries},
              {"loss", r.best.total},
              {"l_obj", r.best.obj},
              {"max_knot_deviation", r.best_iterate > 0 ? r.max_knot_deviation : 0.0},
              {"violation", r.violation},
              {"similarity",
               {{"dtw", sim.dtw}, {"frechet", sim.frechet}, {"pcm", sim.pcm}, {"area", sim.area}, {"cl", sim.cl}}}};
      ojson attacked = ojson::array();
      for (std::size_t t = 0; t < models.size(); ++t) {
        const Prediction pa = models[t]->predict(adv);
        const auto ev = metrics::evaluate(adv, pa, map, cfg.metrics);
        attacked.push_back(ojson{{"model", cfg.models[t].name}, {"eval", summary_json(ev, adv, pa)}});
        if (t != s) continue;
        const auto mi = metrics::motion_interaction_split(scene, benign[s], pa);
        a["motion"] = {{"ade", mi.motion.ade}, {"fde", mi.motion.fde}};
        a["interaction"] = mi.interaction_defined
                               ? ojson{{"ade", mi.interaction.ade}, {"fde", mi.interaction.fde}}
                               : ojson(nullptr);
        if (scene.ego >= 0) {
          const Path plan = ego_plan(scene);
          const auto b = metrics::aggregated_sensitivity(scene, benign[s], plan, cfg.metrics);
          const auto d = metrics::aggregated_sensitivity(adv, pa, plan, cfg.metrics);
          a["delta_sensitivity"] = metrics::delta_sensitivity(b, d);
        } else {
          a["delta_sensitivity"] = 0.0;
        }
      }
      e["attack"] = a;
      e["attacked"] = attacked;
      dense->push_back(r.benign);
      dense->push_back(r.adversarial);
    }
    out.push_back(e);
  }
  rec["models"] = out;
  return rec;
}

ojson outcome_json(const planning::SimOutcome& o) {
  ojson col = ojson::array();
  for (const auto& c : o.collisions) col.push_back({{"step", c.step}, {"agent", c.agent}});
  return ojson{{"failed", o.failed()},
               {"collisions", col},
               {"offroad_steps", o.offroad.size()},
               {"replans", o.replans},
               {"emergency_plans", o.emergency_plans},
               {"error", o.error},
               {"attack_deviation", o.attack_deviation}};
}

ojson sim_record(const CampaignConfig& cfg, const std::string& hash, const planning::Episode& ep,
                 const MapModel& map, const predictors::PredictionModel& model) {
  ojson rec{{"format", kSimRecordFormat}, {"config_hash", hash}, {"seed", cfg.seed}, {"episode", ep.id},
            {"status", "ok"}};
  ojson runs = ojson::array();
  for (auto kind : cfg.planners) {
    const auto planner = planning::make_planner(kind);
    auto sc = cfg.sim;
    sc.attack.reset();
    const auto benign = planning::simulate(ep, map, model, *planner, sc);
    auto ac = cfg.attack;
    ac.lp = cfg.lp;
    sc.attack = ac;
    const auto attacked = planning::simulate(ep, map, model, *planner, sc);
    runs.push_back({{"planner", planning::to_string(kind)},
                    {"benign", outcome_json(benign)},
                    {"attacked", outcome_json(attacked)}});
  }
  rec["planners"] = runs;
  return rec;
}

ojson failure_record(const char* format, const char* key, const std::string& id, const std::string& hash,
                     std::uint64_t seed, const std::string& what) {
  return ojson{{"format", format}, {"config_hash", hash}, {"seed", seed}, {key, id}, {"status", "failed"},
               {"error", what}};
}

// Complete when the record parses, matches the hash and succeeded.
bool complete(const fs::path& p, const std::string& hash) {
  if (!fs::exists(p)) return false;
  try {
    const auto j = nlohmann::json::parse(io::read_text(p.string()));
    return j.value("config_hash", "") == hash && j.value("status", "") == "ok";
  } catch (const std::exception&) {
    return false;
  }
}

struct Job {
  bool scene = true;
  std::size_t index = 0;
  fs::path record;
};

// Fans jobs out to `workers` threads; `stop` is polled between jobs.
template <class F>
void run_pool(std::size_t n, int workers, const std::atomic<bool>& stop, F&& f) {
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (std::size_t i; !stop.load() && (i = next.fetch_add(1)) < n;) f(i);
  };
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::vector<std::jthread> pool;
  for (int k = 1; k < w; ++k) pool.emplace_back(body);
  body();
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

struct Accum {
  std::map<std::string, std::vector<double>> values;
  void add(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it->is_number()) values[it.key()].push_back(it->get<double>());
  }
  ojson means(std::initializer_list<const char*> order) const {
    ojson out;
    for (const char* k : order) {
      const auto it = values.find(k);
      out[k] = it == values.end() ? 0.0 : mean(it->second);
    }
    return out;
  }
};

constexpr std::initializer_list<const char*> kSummaryKeys{"ade",    "fde",    "mr",     "orr",     "pi_ade",
                                                          "pi_fde", "pi_mr",  "pi_orr", "adv_ade", "adv_fde"};

std::string bin_label(double lo, double hi) {
  return std::isinf(hi) ? fmt::format(">={}", lo) : fmt::format("{}-{}", lo, hi);
}

std::size_t bin_of(double x, const std::vector<double>& edges) {
  for (std::size_t b = 0; b + 1 < edges.size(); ++b)
    if (x < edges[b + 1]) return b;
  return edges.size() - 2;
}

std::string xml_escape(const std::string& s) {
  std::string o;
  for (char c : s) {
    switch (c) {
      case '<': o += "&lt;"; break;
      case '>': o += "&gt;"; break;
      case '&': o += "&amp;"; break;
      case '"': o += "&quot;"; break;
      default: o += c;
    }
  }
  return o;
}

// Grouped bar chart of benign and attacked means per bin.
std::string bar_chart(const std::string& title, const std::string& hash, std::uint64_t seed,
                      const std::vector<std::string>& labels, const std::vector<double>& benign,
                      const std::vector<double>& attacked) {
  const double W = 640, H = 360, left = 60, bottom = 300, top = 40;
  double ymax = 1e-9;
  for (double v : benign) ymax = std::max(ymax, v);
  for (double v : attacked) ymax = std::max(ymax, v);
  const double slot = (W - left - 20) / static_cast<double>(std::max<std::size_t>(1, labels.size()));
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n"
      "<!-- config_hash {} seed {} -->\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n"
      "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n"
      "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n"
      "<text x=\"4\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{:.3g}</text>\n",
      W, H, W, H, hash, seed, left, xml_escape(title), left, bottom, W - 20, bottom, left, top, left, bottom, top + 4,
      ymax);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double x = left + slot * static_cast<double>(i);
    const double bw = slot * 0.35;
    const double hb = (bottom - top) * benign[i] / ymax, ha = (bottom - top) * attacked[i] / ymax;
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#4a7ab5\"/>\n",
                     x + slot * 0.1, bottom - hb, bw, hb);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"#c8553d\"/>\n",
                     x + slot * 0.1 + bw, bottom - ha, bw, ha);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\">{}</text>\n",
                     x + slot * 0.1, bottom + 14, xml_escape(labels[i]));
  }
  s += fmt::format(
      "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#4a7ab5\"/>"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">benign ADE</text>\n"
      "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"#c8553d\"/>"
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">attacked ADE</text>\n</svg>\n",
      left, bottom + 30, left + 14, bottom + 39, left + 120, bottom + 30, left + 134, bottom + 39);
  return s;
}

std::string heatmap(const std::string& hash, std::uint64_t seed, const std::vector<std::string>& names,
                    const std::vector<std::vector<std::optional<double>>>& rate) {
  const double cell = 80, left = 140, top = 60;
  const double n = static_cast<double>(names.size());
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n"
      "<!-- config_hash {} seed {} -->\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"10\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">transfer rate (row: attacked model, "
      "column: target)</text>\n",
      left + cell * n + 20, top + cell * n + 20, hash, seed);
  for (std::size_t i = 0; i < names.size(); ++i) {
    s += fmt::format("<text x=\"4\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                     top + cell * (static_cast<double>(i) + 0.5), xml_escape(names[i]));
    s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                     left + cell * static_cast<double>(i) + 4, top - 6, xml_escape(names[i]));
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& r = rate[i][j];
      const double v = r ? std::clamp(*r, 0.0, 1.0) : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - v)));
      s += fmt::format(
          "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{}\" height=\"{}\" fill=\"rgb(255,{},{})\" stroke=\"gray\"/>"
          "<text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
          left + cell * static_cast<double>(j), top + cell * static_cast<double>(i), cell, cell, shade, shade,
          left + cell * static_cast<double>(j) + 10, top + cell * (static_cast<double>(i) + 0.55),
          r ? fmt::format("{:.3f}", *r) : std::string("n/a"));
    }
  }
  return s + "</svg>\n";
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(io::read_text(p.string()));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ModelSpec model_spec_from_string(const std::string& s) {
  ModelSpec m;
  const auto eq = s.find('=');
  if (eq != std::string::npos) {
    m.name = s.substr(0, eq);
    m.path = s.substr(eq + 1);
  } else {
    m.path = s;
    m.name = m.path.rfind("builtin:", 0) == 0 ? m.path.substr(8) : fs::path(s).stem().stem().string();
  }
  if (m.name.empty() || m.path.empty()) throw InvalidInput("model spec '" + s + "': expected [name=]path");
  return m;
}

predictors::ModelPtr load(const ModelSpec& spec) {
  if (!spec.command.empty()) return std::make_shared<predictors::ExternalModel>(spec.command);
  if (spec.path.rfind("builtin:", 0) == 0)
    return predictors::make_surrogate(predictors::surrogate_kind_from_string(spec.path.substr(8)));
  return predictors::load_model_file(spec.path);
}

void CampaignConfig::validate() const {
  if (scenario.empty() && episodes.empty()) throw InvalidInput("campaign: nothing to do (no scenario or episodes)");
  if (models.empty()) throw InvalidInput("campaign: at least one model is required");
  if (out.empty()) throw InvalidInput("campaign: output directory required");
  std::set<std::string> names;
  for (const auto& m : models) {
    if (!names.insert(m.name).second) throw InvalidInput("campaign: duplicate model name '" + m.name + "'");
    if (m.command.empty() && m.path.rfind("builtin:", 0) != 0 && !fs::exists(m.path))
      throw InvalidInput("campaign: model file '" + m.path + "' does not exist");
  }
  for (const auto* p : {&scenario, &map, &episodes})
    if (!p->empty() && !fs::exists(*p)) throw InvalidInput("campaign: input file '" + *p + "' does not exist");
  if (workers < 0) throw InvalidInput("campaign: workers must be >= 0");
  if (lp < 1) throw InvalidInput("campaign: lp must be >= 1");
  if (stop_after && *stop_after < 0) throw InvalidInput("campaign: stop_after must be >= 0");
  attack.validate();
  metrics.validate();
}

std::string config_hash(const CampaignConfig& cfg) { return hex(fnv1a(canonical(cfg).dump())); }

std::string file_stem(const std::string& id) {
  std::string s;
  for (char c : id) s += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return s.empty() ? "_" : s;
}

CampaignSummary run_campaign(const CampaignConfig& cfg) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const fs::path out(cfg.out);
  const fs::path manifest_path = out / "campaign.json";

  io::ScenarioFile scenario;
  std::optional<MapModel> scene_map;
  if (!cfg.scenario.empty()) {
    scenario = io::load_scenario(cfg.scenario);
    if (!cfg.map.empty())
      scene_map = io::load_map(cfg.map);
    else if (!scenario.map.empty())
      scene_map = io::load_map(io::resolve(cfg.scenario, scenario.map));
    std::set<std::string> stems;
    for (const auto& n : scenario.names)
      if (!stems.insert(file_stem(n)).second) throw InvalidInput("campaign: duplicate scene name '" + n + "'");
  }
  io::EpisodeFile episodes;
  MapModel sim_map;
  if (!cfg.episodes.empty()) {
    episodes = io::load_episodes(cfg.episodes);
    sim_map = io::load_map(io::resolve(cfg.episodes, episodes.map));
    std::set<std::string> stems;
    for (const auto& e : episodes.episodes)
      if (!stems.insert(file_stem(e.id)).second) throw InvalidInput("campaign: duplicate episode id '" + e.id + "'");
  }

  if (fs::exists(manifest_path)) {
    const auto m = read_json(manifest_path);
    if (m.value("config_hash", "") != hash)
      throw InvalidInput("campaign: " + cfg.out + " holds results of a different configuration (hash " +
                         m.value("config_hash", "?") + ", this run " + hash + ")");
  }
  fs::create_directories(out / "scenes");
  fs::create_directories(out / "sim");

  ojson scene_names = ojson::array(), episode_ids = ojson::array(), model_names = ojson::array();
  for (const auto& n : scenario.names) scene_names.push_back(n);
  for (const auto& e : episodes.episodes) episode_ids.push_back(e.id);
  for (const auto& m : cfg.models) model_names.push_back(m.name);
  const ojson manifest{{"format", kManifestFormat}, {"config_hash", hash},       {"seed", cfg.seed},
                       {"config", canonical(cfg)}, {"models", model_names},     {"scenes", scene_names},
                       {"episodes", episode_ids},  {"run_attack", cfg.run_attack}};
  io::write_text(manifest_path.string(), manifest.dump(1) + "\n");

  std::vector<predictors::ModelPtr> models;
  for (const auto& m : cfg.models) models.push_back(load(m));

  std::vector<Job> jobs;
  CampaignSummary sum;
  sum.hash = hash;
  for (std::size_t i = 0; i < scenario.scenes.size(); ++i) {
    Job j{true, i, out / "scenes" / (file_stem(scenario.names[i]) + ".json")};
    if (complete(j.record, hash))
      ++sum.skipped;
    else
      jobs.push_back(j);
  }
  for (std::size_t i = 0; i < episodes.episodes.size(); ++i) {
    Job j{false, i, out / "sim" / (file_stem(episodes.episodes[i].id) + ".json")};
    if (complete(j.record, hash))
      ++sum.skipped;
    else
      jobs.push_back(j);
  }

  auto attack_cfg = cfg;
  attack_cfg.attack.seed = cfg.seed;
  std::mutex store;
  std::atomic<int> finished{0};
  std::atomic<bool> stop{cfg.stop_after && *cfg.stop_after == 0};
  const int workers = cfg.workers > 0 ? cfg.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  run_pool(jobs.size(), workers, stop, [&](std::size_t k) {
    const Job& job = jobs[k];
    ojson rec;
    std::vector<recon::DenseTrajectory> dense;
    if (job.scene) {
      const auto& name = scenario.names[job.index];
      try {
        rec = scene_record(attack_cfg, hash, name, scenario.scenes[job.index], scene_map ? &*scene_map : nullptr,
                           models, &dense);
      } catch (const std::exception& e) {
        rec = failure_record(kSceneRecordFormat, "scene", name, hash, cfg.seed, e.what());
        dense.clear();
      }
    } else {
      const auto& ep = episodes.episodes[job.index];
      try {
        rec = sim_record(attack_cfg, hash, ep, sim_map, *models.front());
      } catch (const std::exception& e) {
        rec = failure_record(kSimRecordFormat, "episode", ep.id, hash, cfg.seed, e.what());
      }
    }
    {
      std::lock_guard lock(store);
      if (!dense.empty()) {
        fs::path d = job.record;
        io::save_dense(dense, d.replace_extension(".dense").string());
      }
      io::write_text(job.record.string(), rec.dump(1) + "\n");
    }
    if (cfg.stop_after && finished.fetch_add(1) + 1 >= *cfg.stop_after) stop.store(true);
  });

  const auto report = write_report(cfg.out);
  sum.scenes = report.scenes;
  sum.episodes = report.episodes;
  sum.failed = report.failed;
  sum.partial = report.partial;
  return sum;
}

CampaignSummary write_report(const std::string& out_dir) {
  const fs::path out(out_dir);
  const auto manifest = read_json(out / "campaign.json");
  if (manifest.value("format", "") != kManifestFormat)
    throw ParseError((out / "campaign.json").string() + ": unsupported format");
  const std::string hash = manifest.at("config_hash").get<std::string>();
  const auto seed = manifest.at("seed").get<std::uint64_t>();
  std::vector<std::string> models = manifest.at("models").get<std::vector<std::string>>();
  std::vector<std::string> scenes = manifest.at("scenes").get<std::vector<std::string>>();
  std::vector<std::string> eps = manifest.at("episodes").get<std::vector<std::string>>();
  const bool attacked_run = manifest.at("run_attack").get<bool>();
  std::sort(scenes.begin(), scenes.end());
  std::sort(eps.begin(), eps.end());
  const std::size_t M = models.size();

  CampaignSummary sum;
  sum.hash = hash;
  ojson failed = ojson::array(), missing = ojson::array();
  std::vector<nlohmann::json> recs;
  for (const auto& n : scenes) {
    const fs::path p = out / "scenes" / (file_stem(n) + ".json");
    if (!fs::exists(p)) {
      missing.push_back(n);
      continue;
    }
    auto j = read_json(p);
    if (j.value("config_hash", "") != hash) {
      missing.push_back(n);
    } else if (j.value("status", "") != "ok") {
      failed.push_back({{"scene", n}, {"error", j.value("error", "")}});
    } else {
      recs.push_back(std::move(j));
    }
  }
  sum.scenes = static_cast<int>(recs.size());

  // Per model: benign, self-attacked and attack statistics.
  ojson model_reports = ojson::array();
  std::vector<metrics::ErrorSummary> benign_mean(M);
  std::vector<std::vector<metrics::ErrorSummary>> attacked_mean(M, std::vector<metrics::ErrorSummary>(M));
  for (std::size_t s = 0; s < M; ++s) {
    Accum benign, self, motion, interaction, similarity;
    std::vector<Accum> cross(M);
    std::vector<double> delta, dev;
    int violations = 0, fallback = 0;
    double max_dev = 0.0;
    for (const auto& r : recs) {
      const auto& e = r.at("models").at(s);
      benign.add(e.at("benign"));
      if (e.at("benign").at("pi_fallback").get<bool>()) ++fallback;
      if (!attacked_run) continue;
      const auto& a = e.at("attack");
      for (std::size_t t = 0; t < M; ++t) cross[t].add(e.at("attacked").at(t).at("eval"));
      self.add(e.at("attacked").at(s).at("eval"));
      motion.add(a.at("motion"));
      if (!a.at("interaction").is_null()) interaction.add(a.at("interaction"));
      similarity.add(a.at("similarity"));
      delta.push_back(a.at("delta_sensitivity").get<double>());
      const double d = a.at("max_knot_deviation").get<double>();
      dev.push_back(d);
      max_dev = std::max(max_dev, d);
      if (a.at("violation").get<bool>()) ++violations;
    }
    ojson m{{"model", models[s]}, {"benign", benign.means(kSummaryKeys)}, {"pi_fallback_scenes", fallback}};
    const auto b = benign.means({"ade", "fde", "mr", "orr"});
    benign_mean[s] = {b["ade"].get<double>(), b["fde"].get<double>(), b["mr"].get<double>(), b["orr"].get<double>()};
    if (attacked_run) {
      m["attacked"] = self.means(kSummaryKeys);
      m["vr"] = recs.empty() ? 0.0 : static_cast<double>(violations) / static_cast<double>(recs.size());
      m["mean_knot_deviation"] = mean(dev);
      m["max_knot_deviation"] = max_dev;
      m["delta_sensitivity"] = mean(delta);
      m["motion"] = motion.means({"ade", "fde"});
      m["interaction"] = interaction.means({"ade", "fde"});
      m["similarity"] = similarity.means({"dtw", "frechet", "pcm", "area", "cl"});
      for (std::size_t t = 0; t < M; ++t) {
        const auto c = cross[t].means({"ade", "fde", "mr", "orr"});
        attacked_mean[s][t] = {c["ade"].get<double>(), c["fde"].get<double>(), c["mr"].get<double>(),
                               c["orr"].get<double>()};
      }
    }
    model_reports.push_back(m);
  }

  std::vector<std::vector<std::optional<double>>> rate(M, std::vector<std::optional<double>>(M));
  ojson transfer = nullptr;
  if (attacked_run && !recs.empty()) {
    ojson rows = ojson::array();
    for (std::size_t s = 0; s < M; ++s) {
      ojson row = ojson::array();
      for (std::size_t t = 0; t < M; ++t) {
        try {
          rate[s][t] = metrics::transfer_rate(benign_mean[s], attacked_mean[s][s], benign_mean[t], attacked_mean[s][t]);
          row.push_back(*rate[s][t]);
        } catch (const UndefinedTransfer&) {
          row.push_back(nullptr);
        }
      }
      rows.push_back(row);
    }
    transfer = ojson{{"models", models}, {"rate", rows}};
  }

  // Speed and curvature bins of the first model.
  std::string bins_csv = fmt::format("# config_hash {} seed {}\nstat,bin,lo,hi,count,model,benign_ade,attacked_ade,"
                                     "benign_adv_ade,attacked_adv_ade\n",
                                     hash, seed);
  ojson bins;
  std::map<std::string, std::pair<std::vector<std::string>, std::array<std::vector<double>, 2>>> charts;
  for (const char* stat : {"speed", "curvature"}) {
    const auto& edges = std::string(stat) == "speed" ? kSpeedEdges : kCurvatureEdges;
    const std::size_t B = edges.size() - 1;
    ojson list = ojson::array();
    for (std::size_t b = 0; b < B; ++b) {
      ojson entry{{"lo", edges[b]}, {"hi", std::isinf(edges[b + 1]) ? ojson(nullptr) : ojson(edges[b + 1])}};
      ojson per_model = ojson::array();
      int count = 0;
      for (std::size_t s = 0; s < M; ++s) {
        Accum be, at;
        count = 0;
        for (const auto& r : recs) {
          if (bin_of(r.at("stats").at(stat).get<double>(), edges) != b) continue;
          ++count;
          const auto& e = r.at("models").at(s);
          be.add(e.at("benign"));
          if (attacked_run) at.add(e.at("attacked").at(s).at("eval"));
        }
        const auto bm = be.means({"ade", "adv_ade"});
        const auto am = at.means({"ade", "adv_ade"});
        per_model.push_back({{"model", models[s]},
                             {"benign_ade", bm["ade"]},
                             {"attacked_ade", am["ade"]},
                             {"benign_adv_ade", bm["adv_ade"]},
                             {"attacked_adv_ade", am["adv_ade"]}});
        bins_csv += fmt::format("{},{},{},{},{},{},{},{},{},{}\n", stat, bin_label(edges[b], edges[b + 1]), edges[b],
                                edges[b + 1], count, models[s], bm["ade"].dump(), am["ade"].dump(),
                                bm["adv_ade"].dump(), am["adv_ade"].dump());
        if (s == 0) {
          auto& c = charts[stat];
          c.first.push_back(bin_label(edges[b], edges[b + 1]));
          c.second[0].push_back(bm["ade"].get<double>());
          c.second[1].push_back(am["ade"].get<double>());
        }
      }
      entry["count"] = count;
      entry["models"] = per_model;
      list.push_back(entry);
    }
    bins[stat] = list;
  }

  // Closed-loop episodes.
  ojson sim = nullptr;
  int sim_ok = 0;
  if (!eps.empty()) {
    std::map<std::string, std::array<int, 6>> counts;  // episodes, benign/attacked failures, collisions, offroad
    std::vector<std::string> order;
    for (const auto& id : eps) {
      const fs::path p = out / "sim" / (file_stem(id) + ".json");
      if (!fs::exists(p)) {
        missing.push_back(id);
        continue;
      }
      const auto j = read_json(p);
      if (j.value("config_hash", "") != hash) {
        missing.push_back(id);
        continue;
      }
      if (j.value("status", "") != "ok") {
        failed.push_back({{"episode", id}, {"error", j.value("error", "")}});
        continue;
      }
      ++sim_ok;
      for (const auto& run : j.at("planners")) {
        const auto name = run.at("planner").get<std::string>();
        if (!counts.count(name)) order.push_back(name);
        auto& c = counts[name];
        ++c[0];
        const auto& b = run.at("benign");
        const auto& a = run.at("attacked");
        c[1] += b.at("failed").get<bool>();
        c[2] += a.at("failed").get<bool>();
        c[3] += !b.at("collisions").empty();
        c[4] += !a.at("collisions").empty();
        c[5] += a.at("offroad_steps").get<int>() > 0;
      }
    }
    ojson planners = ojson::array();
    for (const auto& n : order) {
      const auto& c = counts[n];
      planners.push_back({{"planner", n},
                          {"episodes", c[0]},
                          {"benign_failures", c[1]},
                          {"attacked_failures", c[2]},
                          {"benign_collisions", c[3]},
                          {"attacked_collisions", c[4]},
                          {"attacked_offroad", c[5]}});
    }
    sim = ojson{{"episodes", sim_ok}, {"planners", planners}};
  }
  sum.episodes = sim_ok;
  sum.failed = static_cast<int>(failed.size());
  sum.partial = !failed.empty() || !missing.empty();

  const ojson report{{"format", kReportFormat},
                     {"config_hash", hash},
                     {"seed", seed},
                     {"partial", sum.partial},
                     {"scenes", recs.size()},
                     {"failed", failed},
                     {"missing", missing},
                     {"models", model_reports},
                     {"transfer", transfer},
                     {"bins", bins},
                     {"simulation", sim}};
  io::write_text((out / "report.json").string(), report.dump(1) + "\n");
  io::write_text((out / "bins.csv").string(), bins_csv);

  std::string tcsv = fmt::format("# config_hash {} seed {}\nattacked_model", hash, seed);
  for (const auto& m : models) tcsv += "," + m;
  tcsv += "\n";
  for (std::size_t s = 0; s < M; ++s) {
    tcsv += models[s];
    for (std::size_t t = 0; t < M; ++t) tcsv += "," + (rate[s][t] ? ojson(*rate[s][t]).dump() : std::string("nan"));
    tcsv += "\n";
  }
  io::write_text((out / "transfer.csv").string(), tcsv);
  io::write_text((out / "transfer.svg").string(), heatmap(hash, seed, models, rate));
  for (const auto& [stat, c] : charts)
    io::write_text((out / ("ade_by_" + stat + ".svg")).string(),
                   bar_chart("ADE by scene " + stat + " (" + models[0] + ")", hash, seed, c.first, c.second[0],
                             c.second[1]));
  return sum;
}

}  // namespace advdo::campaign
