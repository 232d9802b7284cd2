// advdo: command-line front end of the workbench.
//
// Exit codes: 0 success, 1 campaign finished with failures or runtime error,
// 2 configuration error. Every flag can be set through ADVDO_<FLAG> (upper
// case, dashes as underscores).

#include "advdo/campaign.hpp"
#include "advdo/defense.hpp"
#include "advdo/io.hpp"
#include "advdo/metrics.hpp"
#include "advdo/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <functional>
#include <sstream>

using namespace advdo;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string env_name(const std::string& flag) {
  std::string e = "ADVDO_";
  for (char c : flag.substr(2)) e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return e;
}

template <class T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& var, const std::string& help) {
  return app->add_option(name, var, help)->envname(env_name(name))->capture_default_str();
}

struct Common {
  std::string scenario, map, bridge_cmd, variant = "opt-init", out;
  std::vector<std::string> models;
  double alpha = 0.3, beta = 0.1, gamma = 1.0, eps = 1.0;
  int steps = 30, lp = 6, workers = 0;
  std::uint64_t seed = 0;
};

void model_flags(CLI::App* app, Common& c) {
  flag(app, "--model", c.models, "model file, builtin:<kind>, or name=path; repeatable");
  flag(app, "--bridge-cmd", c.bridge_cmd, "external predictor command (line-delimited JSON)");
}

void attack_flags(CLI::App* app, Common& c) {
  flag(app, "--variant", c.variant, "opt-init or opt-end")->check(CLI::IsMember({"opt-init", "opt-end"}));
  flag(app, "--alpha", c.alpha, "collision weight");
  flag(app, "--beta", c.beta, "deviation weight");
  flag(app, "--gamma", c.gamma, "dynamics penalty weight");
  flag(app, "--eps", c.eps, "knot ball radius (m)");
  flag(app, "--steps", c.steps, "PGD steps");
}

attack::AttackConfig attack_config(const Common& c) {
  attack::AttackConfig a;
  a.alpha = c.alpha;
  a.beta = c.beta;
  a.gamma = c.gamma;
  a.eps = c.eps;
  a.pgd_steps = c.steps;
  a.variant = attack::variant_from_string(c.variant);
  a.seed = c.seed;
  a.validate();
  return a;
}

std::vector<campaign::ModelSpec> model_specs(const Common& c) {
  std::vector<campaign::ModelSpec> v;
  for (const auto& m : c.models) v.push_back(campaign::model_spec_from_string(m));
  if (!c.bridge_cmd.empty()) v.push_back({"bridge", "", c.bridge_cmd});
  if (v.empty()) throw ConfigError("a --model or --bridge-cmd is required");
  return v;
}

void require(const std::string& value, const char* name) {
  if (value.empty()) throw ConfigError(std::string(name) + " is required");
}

io::ScenarioFile scenario_of(const Common& c) {
  require(c.scenario, "--scenario");
  return io::load_scenario(c.scenario);
}

int run_campaign_command(campaign::CampaignConfig cfg, const Common& c) {
  require(c.out, "--out");
  cfg.out = c.out;
  cfg.seed = c.seed;
  cfg.workers = c.workers;
  cfg.models = model_specs(c);
  const auto s = campaign::run_campaign(cfg);
  fmt::print("config {} seed {}: {} scenes, {} episodes ({} reused), {} failed{}\n", s.hash, c.seed, s.scenes,
             s.episodes, s.skipped, s.failed, s.partial ? ", partial" : "");
  const auto report = nlohmann::json::parse(io::read_text((fs::path(c.out) / "report.json").string()));
  for (const auto& m : report.at("models")) {
    if (report.at("scenes").get<int>() == 0) break;
    fmt::print("{}: benign ADE {:.4f}", m.at("model").get<std::string>(), m.at("benign").at("ade").get<double>());
    if (m.contains("attacked"))
      fmt::print(", attacked ADE {:.4f}, VR {:.4f}", m.at("attacked").at("ade").get<double>(),
                 m.at("vr").get<double>());
    fmt::print("\n");
  }
  if (!report.at("simulation").is_null())
    for (const auto& p : report.at("simulation").at("planners"))
      fmt::print("{}: failures benign {}/{}, attacked {}/{}\n", p.at("planner").get<std::string>(),
                 p.at("benign_failures").get<int>(), p.at("episodes").get<int>(),
                 p.at("attacked_failures").get<int>(), p.at("episodes").get<int>());
  return s.partial ? 1 : 0;
}

std::vector<Scene> with_futures(const io::ScenarioFile& f) {
  for (std::size_t i = 0; i < f.scenes.size(); ++i)
    if (!f.scenes[i].has_futures()) throw ConfigError("scene '" + f.names[i] + "' has no futures");
  return f.scenes;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial trajectory-prediction workbench"};
  app.require_subcommand(1);
  Common c;
  std::function<int()> action;

  // synth ---------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic scenes or closed-loop episodes");
  synth::SynthConfig sc;
  synth::EpisodeSynthConfig ec;
  std::string templates = "lane-follow,turn,cross,stop";
  bool episodes = false;
  int count = -1;
  flag(synth_cmd, "--out", c.out, "output file")->required();
  flag(synth_cmd, "--seed", c.seed, "generator seed");
  flag(synth_cmd, "--count", count, "number of scenes or episodes");
  flag(synth_cmd, "--templates", templates, "comma-separated scene templates");
  synth_cmd->add_flag("--episodes", episodes, "closed-loop episodes on a two-way road")->envname("ADVDO_EPISODES");
  synth_cmd->callback([&] {
    action = [&] {
      const fs::path out(c.out);
      if (episodes) {
        ec.seed = c.seed;
        if (count >= 0) ec.count = count;
        io::EpisodeFile f{ec.map, synth::closed_loop_episodes(ec)};
        io::save_map(synth::two_way_road(ec.lane_width), (out.parent_path() / ec.map).string());
        io::save_episodes(f, c.out);
        fmt::print("{} episodes -> {}\n", f.episodes.size(), c.out);
      } else {
        sc.seed = c.seed;
        if (count >= 0) sc.count = count;
        sc.templates = synth::templates_from_list(templates);
        const auto f = synth::synthesize_scenes(sc);
        io::save_map(synth::plus_intersection(), (out.parent_path() / sc.map).string());
        io::save_scenario(f, c.out);
        fmt::print("{} scenes -> {}\n", f.scenes.size(), c.out);
      }
      return 0;
    };
  });

  // reconstruct ---------------------------------------------------------------
  auto* recon_cmd = app.add_subcommand("reconstruct", "dense reconstruction of every history");
  recon::ReconConfig rc;
  flag(recon_cmd, "--scenario", c.scenario, "scenario file")->required();
  flag(recon_cmd, "--out", c.out, "output directory")->required();
  flag(recon_cmd, "--steps", rc.steps, "optimizer steps");
  flag(recon_cmd, "--seed", c.seed, "recorded seed");
  recon_cmd->callback([&] {
    action = [&] {
      const auto f = scenario_of(c);
      rc.validate();
      fs::create_directories(c.out);
      nlohmann::ordered_json rep{{"format", "advdo-reconstruction/1"}};
      std::ostringstream cfg;
      cfg << rc.steps << ' ' << rc.lr << ' ' << rc.factor << ' ' << io::read_text(c.scenario);
      rep["config_hash"] = fmt::format("{:016x}", campaign::fnv1a(cfg.str()));
      rep["seed"] = c.seed;
      std::vector<recon::DenseTrajectory> dense;
      nlohmann::ordered_json scenes = nlohmann::ordered_json::array();
      double worst = 0.0;
      int violating = 0, total = 0;
      for (std::size_t i = 0; i < f.scenes.size(); ++i) {
        nlohmann::ordered_json agents = nlohmann::ordered_json::array();
        for (const auto& h : f.scenes[i].histories) {
          const auto r = recon::reconstruct(h, f.dt, rc);
          const double mse = recon::knot_mse(r.trajectory, h);
          const bool bad = dynamics::violates(r.params, rc.bounds);
          worst = std::max(worst, mse);
          violating += bad;
          ++total;
          agents.push_back({{"knot_mse", mse}, {"violation", bad}});
          dense.push_back(r.trajectory);
        }
        scenes.push_back({{"scene", f.names[i]}, {"agents", agents}});
      }
      rep["scenes"] = scenes;
      io::write_text((fs::path(c.out) / "reconstruction.json").string(), rep.dump(1) + "\n");
      io::save_dense(dense, (fs::path(c.out) / "reconstruction.dense").string());
      fmt::print("{} trajectories, max knot MSE {:.3g}, {} violating\n", total, worst, violating);
      return 0;
    };
  });

  // attack, eval, transfer ----------------------------------------------------
  auto* attack_cmd = app.add_subcommand("attack", "attack every scene and evaluate");
  auto* eval_cmd = app.add_subcommand("eval", "benign evaluation only");
  auto* transfer_cmd = app.add_subcommand("transfer", "attack each model, score on all, emit the transfer matrix");
  for (auto* cmd : {attack_cmd, eval_cmd, transfer_cmd}) {
    flag(cmd, "--scenario", c.scenario, "scenario file")->required();
    flag(cmd, "--map", c.map, "map file overriding the scenario's reference");
    flag(cmd, "--out", c.out, "output directory")->required();
    flag(cmd, "--seed", c.seed, "campaign seed");
    flag(cmd, "--workers", c.workers, "worker threads, 0 for all cores");
    model_flags(cmd, c);
    if (cmd != eval_cmd) attack_flags(cmd, c);
    cmd->callback([&, cmd] {
      action = [&, cmd] {
        campaign::CampaignConfig cfg;
        cfg.scenario = c.scenario;
        cfg.map = c.map;
        cfg.run_attack = cmd != eval_cmd;
        if (cfg.run_attack) cfg.attack = attack_config(c);
        if (cmd == transfer_cmd && model_specs(c).size() < 2) throw ConfigError("transfer needs at least two models");
        return run_campaign_command(cfg, c);
      };
    });
  }

  // simulate ------------------------------------------------------------------
  auto* sim_cmd = app.add_subcommand("simulate", "closed-loop simulation, benign and attacked");
  std::string episodes_path, planners = "rule,lattice-mpc", mode = "closed";
  flag(sim_cmd, "--episodes", episodes_path, "episodes file")->required();
  flag(sim_cmd, "--planner", planners, "comma-separated planners");
  flag(sim_cmd, "--mode", mode, "open or closed loop");
  flag(sim_cmd, "--lp", c.lp, "attacked prediction frames");
  flag(sim_cmd, "--out", c.out, "output directory")->required();
  flag(sim_cmd, "--seed", c.seed, "campaign seed");
  flag(sim_cmd, "--workers", c.workers, "worker threads, 0 for all cores");
  model_flags(sim_cmd, c);
  attack_flags(sim_cmd, c);
  sim_cmd->callback([&] {
    action = [&] {
      campaign::CampaignConfig cfg;
      cfg.episodes = episodes_path;
      cfg.attack = attack_config(c);
      cfg.lp = c.lp;
      cfg.sim.mode = planning::sim_mode_from_string(mode);
      cfg.planners.clear();
      std::stringstream ss(planners);
      for (std::string p; std::getline(ss, p, ',');) cfg.planners.push_back(planning::planner_from_string(p));
      return run_campaign_command(cfg, c);
    };
  });

  // augment -------------------------------------------------------------------
  auto* aug_cmd = app.add_subcommand("augment", "deviate adversarial agents along fixed directions");
  std::string directions = "forward,backward,left,right";
  flag(aug_cmd, "--scenario", c.scenario, "scenario file")->required();
  flag(aug_cmd, "--out", c.out, "output scenario file")->required();
  flag(aug_cmd, "--directions", directions, "comma-separated directions");
  flag(aug_cmd, "--seed", c.seed, "recorded seed");
  attack_flags(aug_cmd, c);
  aug_cmd->callback([&] {
    action = [&] {
      auto f = scenario_of(c);
      std::vector<attack::Direction> dirs;
      std::stringstream ss(directions);
      for (std::string d; std::getline(ss, d, ',');) dirs.push_back(attack::direction_from_string(d));
      const auto cfg = attack_config(c);
      const auto aug = defense::augment(f.scenes, dirs, cfg);
      io::ScenarioFile g = f;
      g.scenes = aug.scenes;
      g.names.clear();
      for (const auto& n : f.names)
        for (auto d : dirs) g.names.push_back(n + "+" + attack::to_string(d));
      if (!g.map.empty()) g.map = fs::absolute(io::resolve(c.scenario, f.map)).lexically_relative(
                                     fs::absolute(fs::path(c.out)).parent_path()).string();
      io::save_scenario(g, c.out);
      const double vr = metrics::violation_rate(aug.results, cfg.bounds());
      fmt::print("{} augmented scenes -> {}, VR {:.4f}\n", g.scenes.size(), c.out, vr);
      return 0;
    };
  });

  // train, advtrain -----------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train the social-mlp surrogate");
  auto* adv_cmd = app.add_subcommand("advtrain", "adversarially fine-tune a social-mlp surrogate");
  predictors::TrainConfig tc;
  double mix = 0.5;
  for (auto* cmd : {train_cmd, adv_cmd}) {
    flag(cmd, "--scenario", c.scenario, "training scenario file")->required();
    flag(cmd, "--out", c.out, "output model file")->required();
    flag(cmd, "--seed", c.seed, "training seed");
    flag(cmd, "--epochs", tc.epochs, "epochs");
    flag(cmd, "--lr", tc.lr, "Adam learning rate");
  }
  flag(train_cmd, "--hidden", tc.hidden, "hidden width");
  flag(adv_cmd, "--mix", mix, "attacked fraction per epoch");
  model_flags(adv_cmd, c);
  attack_flags(adv_cmd, c);
  train_cmd->callback([&] {
    action = [&] {
      tc.seed = c.seed;
      const auto r = predictors::train_surrogate(with_futures(scenario_of(c)), tc);
      predictors::save_model_file(*r.model, c.out);
      fmt::print("trained {} epochs, final loss {:.5f} -> {}\n", tc.epochs, r.loss_trace.back(), c.out);
      return 0;
    };
  });
  adv_cmd->callback([&] {
    action = [&] {
      tc.seed = c.seed;
      if (c.models.size() != 1) throw ConfigError("advtrain needs exactly one --model to start from");
      auto init = std::dynamic_pointer_cast<const predictors::SocialMlp>(
          campaign::load(campaign::model_spec_from_string(c.models[0])));
      if (!init) throw ConfigError("advtrain: the initial model must be a social-mlp");
      defense::AdvTrainConfig cfg{tc, attack_config(c), mix};
      const auto r = defense::adversarial_train(init, with_futures(scenario_of(c)), cfg);
      predictors::save_model_file(*r.model, c.out);
      fmt::print("adversarially trained {} epochs, final loss {:.5f} -> {}\n", tc.epochs, r.loss_trace.back(), c.out);
      return 0;
    };
  });

  // report --------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "rebuild report, tables and plots from stored records");
  flag(report_cmd, "--out", c.out, "campaign directory")->required();
  report_cmd->callback([&] {
    action = [&] {
      const auto s = campaign::write_report(c.out);
      fmt::print("config {}: {} scenes, {} episodes, {} failed{}\n", s.hash, s.scenes, s.episodes, s.failed,
                 s.partial ? ", partial" : "");
      return s.partial ? 1 : 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    return action();
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const InvalidInput& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
