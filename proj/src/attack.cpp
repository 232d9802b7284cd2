#include "advdo/attack.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace advdo::attack {

using namespace dynamics;

std::string to_string(Variant v) { return v == Variant::OptInit ? "opt-init" : "opt-end"; }

Variant variant_from_string(const std::string& s) {
  if (s == "opt-init") return Variant::OptInit;
  if (s == "opt-end") return Variant::OptEnd;
  throw InvalidInput("unknown attack variant '" + s + "'");
}

void AttackConfig::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) throw InvalidInput("attack: weights must be >= 0");
  if (!(eps > 0)) throw InvalidInput("attack: eps must be > 0");
  if (pgd_steps < 0) throw InvalidInput("attack: pgd_steps must be >= 0");
  if (!(pgd_step_scale > 0)) throw InvalidInput("attack: pgd_step_scale must be > 0");
  if (step_schedule < 1) throw InvalidInput("attack: step_schedule must be >= 1");
  if (lp < 1) throw InvalidInput("attack: lp must be >= 1");
  if (variant == Variant::OptEnd && lp > 1)
    throw InvalidInput("attack: opt-end anchors the current state and supports lp = 1 only");
  recon.validate();
}

LossTerms combine(LossTerms t, const AttackConfig& cfg) {
  t.total = -t.obj + cfg.alpha * t.col + cfg.beta * t.bh + cfg.gamma * t.dyn;
  return t;
}

LossTerms operator+(LossTerms a, const LossTerms& b) {
  a.obj += b.obj;
  a.col += b.col;
  a.bh += b.bh;
  a.dyn += b.dyn;
  a.total += b.total;
  return a;
}

// ------------------------------------------------------------------ terms

double path_error(const Path& truth, const Path& pred) {
  if (truth.size() != pred.size() || truth.empty()) throw InvalidInput("path_error: shape mismatch");
  double s = 0.0;
  for (std::size_t t = 0; t < truth.size(); ++t) s += (truth[t] - pred[t]).norm();
  return s / static_cast<double>(truth.size());
}

double l_obj(const std::vector<Path>& truth, const Prediction& pred, const std::vector<std::size_t>& targets,
             ModeRule rule, PredictionCotangent* grad) {
  if (grad) *grad = zero_cotangent(pred);
  if (targets.empty()) return 0.0;
  double total = 0.0;
  const double w = 1.0 / static_cast<double>(targets.size());
  for (std::size_t i : targets) {
    std::size_t k = pred.best_mode(i);
    if (rule == ModeRule::MinError) {
      double best = path_error(truth[i], pred.modes[0][i]);
      k = 0;
      for (std::size_t m = 1; m < pred.mode_count(); ++m) {
        const double e = path_error(truth[i], pred.modes[m][i]);
        if (e < best) best = e, k = m;
      }
    }
    const Path& y = pred.modes[k][i];
    total += w * path_error(truth[i], y);
    if (grad) {
      const double T = static_cast<double>(y.size());
      for (std::size_t t = 0; t < y.size(); ++t) {
        const Vec2 d = y[t] - truth[i][t];
        const double n = d.norm();
        if (n > 0) (*grad)[k][i][t] = w * d / (n * T);
      }
    }
  }
  return total;
}

double l_col(const Path& dense, const std::vector<Path>& others, Path* grad) {
  if (grad) grad->assign(dense.size(), Vec2::Zero());
  if (others.empty()) return 0.0;
  const double w = 1.0 / (static_cast<double>(others.size()) * static_cast<double>(dense.size()));
  double s = 0.0;
  for (const auto& o : others) {
    if (o.size() != dense.size()) throw InvalidInput("l_col: others must be aligned to the dense steps");
    for (std::size_t t = 0; t < dense.size(); ++t) {
      const Vec2 d = dense[t] - o[t];
      const double n = d.norm();
      s += w / (n + 1.0);
      if (grad && n > 0) (*grad)[t] -= w * d / (n * (n + 1.0) * (n + 1.0));
    }
  }
  return s;
}

double l_bh(const Path& dense, const Path& benign, double eps, Path* grad) {
  if (dense.size() != benign.size() || dense.empty()) throw InvalidInput("l_bh: length mismatch");
  if (grad) grad->assign(dense.size(), Vec2::Zero());
  const double w = 1.0 / static_cast<double>(dense.size());
  double s = 0.0;
  for (std::size_t t = 0; t < dense.size(); ++t) {
    const Vec2 d = dense[t] - benign[t];
    const double n = d.norm();
    s += w * soft_clip_term(n / eps);
    if (grad && n > 0) (*grad)[t] = w * soft_clip_term_grad(n / eps) / eps * d / n;
  }
  return s;
}

Path upsample(const Path& knots, int factor) {
  if (knots.empty()) return {};
  Path out;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k)
    for (int j = 0; j < factor; ++j)
      out.push_back((1.0 - j / double(factor)) * knots[k] + (j / double(factor)) * knots[k + 1]);
  out.push_back(knots.back());
  return out;
}

std::vector<std::size_t> target_agents(const Scene& scene) {
  std::vector<std::size_t> t;
  for (std::size_t i = 0; i < scene.agents(); ++i)
    if (static_cast<int>(i) != scene.ego) t.push_back(i);
  return t;
}

namespace {

std::vector<Path> others_dense(const Scene& s, int factor) {
  std::vector<Path> o;
  for (std::size_t i = 0; i < s.agents(); ++i)
    if (static_cast<int>(i) != s.adv) o.push_back(upsample(s.histories[i], factor));
  return o;
}

DynParams slice_params(const DynParams& p, std::size_t a, std::size_t b) {
  // Parameters of the sub-trajectory spanning states a..b.
  DynParams s;
  s.heading.assign(p.heading.begin() + a, p.heading.begin() + b);
  s.speed.assign(p.speed.begin() + a, p.speed.begin() + b);
  s.accel.assign(p.accel.begin() + a, p.accel.begin() + (b - 1));
  s.curvature.assign(p.curvature.begin() + a, p.curvature.begin() + (b - 1));
  s.yaw_rate.assign(p.yaw_rate.begin() + a, p.yaw_rate.begin() + (b - 1));
  s.stationary.assign(p.stationary.begin() + a, p.stationary.begin() + (b - 1));
  return s;
}

Path slice(const Path& p, std::size_t a, std::size_t b) { return Path(p.begin() + a, p.begin() + b + 1); }

double max_deviation(const Path& knots, const Path& orig) {
  double m = 0.0;
  for (std::size_t k = 0; k < knots.size(); ++k) m = std::max(m, (knots[k] - orig[k]).norm());
  return m;
}

Path knots_of(const Path& dense, int f) {
  Path k;
  for (std::size_t i = 0; i < dense.size(); i += static_cast<std::size_t>(f)) k.push_back(dense[i]);
  return k;
}

enum class Objective { Attack, Augment };

class Engine {
 public:
  Engine(const Scene& scene, int H, const predictors::PredictionModel* model, const AttackConfig& cfg,
         Objective obj, Vec2 direction = Vec2::Zero())
      : H_(H), model_(model), cfg_(cfg), objective_(obj), dir_(direction) {
    cfg.validate();
    scene.validate();
    f_ = cfg.factor();
    lp_ = cfg.lp;
    if (H_ < 2) throw InvalidInput("attack: window length must be >= 2");
    if (static_cast<int>(scene.history_length()) != H_ + lp_ - 1)
      throw InvalidInput("attack: scene needs " + std::to_string(H_ + lp_ - 1) +
                         " observed steps for the requested windows");
    if (obj == Objective::Attack && !scene.has_futures())
      throw InvalidInput("attack: ground-truth futures are required");
    reverse_ = cfg.variant == Variant::OptEnd;
    original_ = scene.histories[scene.adv];

    const auto rec = recon::reconstruct(original_, scene.dt, cfg.recon);
    if (!reverse_) {
      anchor_ = rec.trajectory.start;
      u0_ = rec.trajectory.controls;
    } else {
      const auto states = rec.trajectory.states();
      anchor_ = states.back();
      anchor_.position = original_.back();
      u0_ = project_reverse(anchor_, rec.trajectory.controls, cfg.bounds());
    }
    benign_ = make_dense(u0_);

    for (int w = 0; w < lp_; ++w) {
      Scene ws = obj == Objective::Attack ? window(scene, H_, w) : scene;
      others_.push_back(others_dense(ws, f_));
      windows_.push_back(std::move(ws));
    }
    if (obj == Objective::Attack) targets_ = target_agents(scene);
    // Step sizes per control coordinate.
    const auto& b = cfg.bounds();
    step_a_ = cfg.pgd_step_scale * b.accel.width() / cfg.step_schedule;
    step_k_ = cfg.pgd_step_scale * b.curvature.width() / cfg.step_schedule;
    start_ = deviation(u0_) <= cfg.eps ? u0_ : pull_in(u0_, 200);
  }

  struct Eval {
    std::vector<LossTerms> frames;
    LossTerms total;
    std::vector<ControlAction> grad;
  };

  DenseTrajectory make_dense(const ControlSequence& u) const {
    DenseTrajectory d;
    d.factor = f_;
    d.controls = u;
    const auto st = reverse_ ? rollout_reverse(anchor_, u) : rollout(anchor_, u);
    d.start = st.front();
    d.positions = positions_of(st);
    return d;
  }

  Eval evaluate(const ControlSequence& u, bool want_grad) {
    const auto states = reverse_ ? rollout_reverse(anchor_, u) : rollout(anchor_, u);
    const Path P = positions_of(states);
    const auto params = params_from_rollout(states, u);
    std::vector<StateCotangent> cot(states.size());
    ParamsCotangent pcot;
    if (want_grad) {
      pcot.speed.assign(params.speed.size(), 0.0);
      pcot.accel.assign(params.accel.size(), 0.0);
      pcot.curvature.assign(params.curvature.size(), 0.0);
      pcot.yaw_rate.assign(params.yaw_rate.size(), 0.0);
    }
    Eval ev;
    const AttackConfig wcfg = weights();
    for (int w = 0; w < lp_; ++w) {
      const std::size_t a = static_cast<std::size_t>(w * f_), b = static_cast<std::size_t>((w + H_ - 1) * f_);
      const Path seg = slice(P, a, b);
      LossTerms t;
      Scene& ws = windows_[w];
      ws.histories[ws.adv] = knots_of(seg, f_);

      if (objective_ == Objective::Attack) {
        const auto pred = model_->predict(ws);
        ++queries_;
        PredictionCotangent dobj;
        t.obj = l_obj(ws.futures, pred, targets_, cfg_.mode, want_grad ? &dobj : nullptr);
        if (want_grad) {
          for (auto& m : dobj)
            for (auto& ag : m)
              for (auto& v : ag) v = -v;
          const auto dX = model_->pullback(ws, dobj);
          ++queries_;
          for (int k = 0; k < H_; ++k) cot[a + k * f_].position += dX[ws.adv][k];
        }
      } else {
        const Path knots = knots_of(seg, f_);
        const Path& orig = original_;
        const double K = static_cast<double>(knots.size());
        for (std::size_t k = 0; k < knots.size(); ++k) {
          t.obj += (knots[k] - orig[k]).dot(dir_) / K;
          if (want_grad) cot[a + k * f_].position -= dir_ / K;
        }
      }

      Path g;
      t.col = l_col(seg, others_[w], want_grad ? &g : nullptr);
      if (want_grad)
        for (std::size_t s = 0; s < g.size(); ++s) cot[a + s].position += wcfg.alpha * g[s];
      t.bh = l_bh(seg, slice(benign_.positions, a, b), cfg_.eps, want_grad ? &g : nullptr);
      if (want_grad)
        for (std::size_t s = 0; s < g.size(); ++s) cot[a + s].position += wcfg.beta * g[s];
      ParamsCotangent pg;
      t.dyn = dyn_penalty(slice_params(params, a, b), cfg_.bounds(), cfg_.penalty, want_grad ? &pg : nullptr);
      if (want_grad) {
        for (std::size_t s = 0; s < pg.speed.size(); ++s) pcot.speed[a + s] += wcfg.gamma * pg.speed[s];
        for (std::size_t s = 0; s < pg.accel.size(); ++s) {
          pcot.accel[a + s] += wcfg.gamma * pg.accel[s];
          pcot.curvature[a + s] += wcfg.gamma * pg.curvature[s];
          pcot.yaw_rate[a + s] += wcfg.gamma * pg.yaw_rate[s];
        }
      }
      t = combine(t, wcfg);
      ev.frames.push_back(t);
      ev.total = ev.total + t;
    }
    if (want_grad) {
      std::vector<ControlAction> direct(u.size());
      params_pullback(states, u, pcot, cot, direct);
      const auto rg = reverse_ ? rollout_reverse_pullback(anchor_, u, cot) : rollout_pullback(anchor_, u, cot);
      ev.grad = rg.controls;
      for (std::size_t i = 0; i < u.size(); ++i) {
        ev.grad[i].accel += direct[i].accel;
        ev.grad[i].curvature += direct[i].curvature;
      }
    }
    return ev;
  }

  ControlSequence bound_project(const ControlSequence& u) const {
    return reverse_ ? project_reverse(anchor_, u, cfg_.bounds()) : project_forward(anchor_, u, cfg_.bounds());
  }

  double deviation(const ControlSequence& u) const {
    return max_deviation(knots_of(make_dense(u).positions, f_), original_);
  }

  /// Pulls knots outside the eps ball back toward its surface with a few
  /// Gauss-Newton steps on the summed squared excess, so the other knots keep
  /// their motion.
  ControlSequence pull_in(ControlSequence u, int iterations = 8) const {
    const double target = cfg_.eps * (1.0 - 1e-3);
    const double wa = step_a_ * step_a_, wk = step_k_ * step_k_;
    for (int it = 0; it < iterations; ++it) {
      const auto st = reverse_ ? rollout_reverse(anchor_, u) : rollout(anchor_, u);
      std::vector<StateCotangent> cot(st.size());
      double J = 0.0;
      for (std::size_t k = 0; k < original_.size(); ++k) {
        const Vec2 d = st[k * f_].position - original_[k];
        const double e = d.norm() - target;
        if (e <= 0.0) continue;
        J += 0.5 * e * e;
        cot[k * f_].position = e * d / d.norm();
      }
      if (J == 0.0) break;
      const auto g = reverse_ ? rollout_reverse_pullback(anchor_, u, cot) : rollout_pullback(anchor_, u, cot);
      double gPg = 0.0;
      for (const auto& c : g.controls) gPg += wa * c.accel * c.accel + wk * c.curvature * c.curvature;
      if (!(gPg > 0.0)) break;
      const double t = 2.0 * J / gPg;
      for (std::size_t i = 0; i < u.size(); ++i) {
        u.actions[i].accel -= t * wa * g.controls[i].accel;
        u.actions[i].curvature -= t * wk * g.controls[i].curvature;
      }
      u = bound_project(u);
    }
    return u;
  }

  /// Bounds, then the eps ball: knot pull-in, and bisection toward the
  /// feasible `from` when that is not enough.
  ControlSequence project(const ControlSequence& cand, const ControlSequence& from) const {
    ControlSequence u = bound_project(cand);
    if (deviation(u) <= cfg_.eps) return u;
    u = pull_in(std::move(u));
    if (deviation(u) <= cfg_.eps) return u;
    auto mix = [&](double lam) {
      ControlSequence m = from;
      for (std::size_t i = 0; i < m.size(); ++i) {
        m.actions[i].accel += lam * (u.actions[i].accel - from.actions[i].accel);
        m.actions[i].curvature += lam * (u.actions[i].curvature - from.actions[i].curvature);
      }
      return bound_project(m);
    };
    double lo = 0.0, hi = 1.0;
    ControlSequence best = from;
    for (int it = 0; it < 40; ++it) {
      const double mid = 0.5 * (lo + hi);
      auto m = mix(mid);
      if (deviation(m) <= cfg_.eps) {
        lo = mid;
        best = std::move(m);
      } else {
        hi = mid;
      }
    }
    return best;
  }

  AttackResult finish(const ControlSequence& u, const Eval& ev, std::vector<LossTerms> trace, int best_it) const {
    AttackResult r;
    r.adversarial = make_dense(u);
    r.benign = benign_;
    r.anchor = anchor_;
    r.reverse = reverse_;
    r.original = original_;
    r.history = knots_of(r.adversarial.positions, f_);
    r.trace = std::move(trace);
    r.frames = ev.frames;
    r.best = ev.total;
    r.best_iterate = best_it;
    r.queries = queries_;
    r.max_knot_deviation = max_deviation(r.history, original_);
    r.violation = violates(r.adversarial.params(), cfg_.bounds());
    return r;
  }

  ControlSequence signed_step(const ControlSequence& u, const std::vector<ControlAction>& g) const {
    ControlSequence n = u;
    auto sgn = [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); };
    for (std::size_t i = 0; i < n.size(); ++i) {
      n.actions[i].accel -= step_a_ * sgn(g[i].accel);
      n.actions[i].curvature -= step_k_ * sgn(g[i].curvature);
    }
    return n;
  }

  const ControlSequence& initial_controls() const { return u0_; }

  AttackResult run_pgd() {
    ControlSequence u = start_;
    Eval cur = evaluate(u, cfg_.pgd_steps > 0);
    std::vector<LossTerms> trace{cur.total};
    ControlSequence best_u = u;
    Eval best = cur;
    int best_it = 0;
    for (int it = 1; it <= cfg_.pgd_steps; ++it) {
      for (const auto& g : cur.grad)
        if (!std::isfinite(g.accel) || !std::isfinite(g.curvature)) {
          std::vector<double> tr;
          for (const auto& t : trace) tr.push_back(t.total);
          throw OptimizationDiverged("attack: non-finite gradient", tr);
        }
      u = project(signed_step(u, cur.grad), start_);
      cur = evaluate(u, it < cfg_.pgd_steps);
      trace.push_back(cur.total);
      if (!std::isfinite(cur.total.total)) {
        std::vector<double> tr;
        for (const auto& t : trace) tr.push_back(t.total);
        throw OptimizationDiverged("attack: non-finite loss", tr);
      }
      if (cur.total.total < best.total.total) {
        best = cur;
        best_u = u;
        best_it = it;
      }
    }
    return finish(best_u, best, std::move(trace), best_it);
  }

  AttackResult run_random() {
    std::mt19937_64 rng(cfg_.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    Eval best = evaluate(start_, false);
    std::vector<LossTerms> trace{best.total};
    ControlSequence best_u = start_;
    int best_it = 0;
    const double amp = static_cast<double>(cfg_.pgd_steps);  // a full run of signed steps
    for (int q = 1; q <= 2 * cfg_.pgd_steps; ++q) {
      ControlSequence c = start_;
      for (auto& a : c.actions) {
        a.accel += amp * step_a_ * U(rng);
        a.curvature += amp * step_k_ * U(rng);
      }
      c = project(c, start_);
      const Eval ev = evaluate(c, false);
      trace.push_back(ev.total);
      if (ev.total.total < best.total.total) {
        best = ev;
        best_u = c;
        best_it = q;
      }
    }
    return finish(best_u, best, std::move(trace), best_it);
  }

 private:
  AttackConfig weights() const {
    if (objective_ == Objective::Attack) return cfg_;
    AttackConfig w = cfg_;
    w.alpha = cfg_.gamma;
    w.beta = 0.0;
    w.gamma = 0.0;
    return w;
  }

  int H_;
  const predictors::PredictionModel* model_;
  AttackConfig cfg_;
  Objective objective_;
  Vec2 dir_;
  int f_ = 1, lp_ = 1;
  bool reverse_ = false;
  Path original_;
  DynState anchor_;
  ControlSequence u0_;
  ControlSequence start_;  // first iterate: u0_ pulled into the eps ball when D* is not inside
  DenseTrajectory benign_;
  std::vector<Scene> windows_;
  std::vector<std::vector<Path>> others_;
  std::vector<std::size_t> targets_;
  double step_a_ = 0, step_k_ = 0;
  int queries_ = 0;
};

}  // namespace

LossTerms adv_loss(const Scene& scene, const predictors::PredictionModel& model, const Path& dense,
                   const DynParams& params, const Path& benign, const AttackConfig& cfg) {
  Scene s = scene;
  s.histories[s.adv] = knots_of(dense, cfg.factor());
  LossTerms t;
  t.obj = l_obj(s.futures, model.predict(s), target_agents(s), cfg.mode);
  t.col = l_col(dense, others_dense(s, cfg.factor()));
  t.bh = l_bh(dense, benign, cfg.eps);
  t.dyn = dyn_penalty(params, cfg.bounds(), cfg.penalty);
  return combine(t, cfg);
}

Scene AttackResult::apply(const Scene& scene) const {
  Scene s = scene;
  s.histories[s.adv] = history;
  return s;
}

Scene window(const Scene& scene, int H, int w) {
  if (!scene.has_futures()) throw InvalidInput("window: futures required");
  const int L = static_cast<int>(scene.history_length());
  if (w < 0 || w + H > L) throw InvalidInput("window: out of range");
  Scene s = scene;
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    Path all = scene.histories[i];
    all.insert(all.end(), scene.futures[i].begin(), scene.futures[i].end());
    s.histories[i] = Path(all.begin() + w, all.begin() + w + H);
    s.futures[i] = Path(all.begin() + w + H, all.begin() + w + H + scene.horizon);
  }
  return s;
}

AttackResult attack_single(const Scene& scene, const predictors::PredictionModel& model,
                           const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.lp = 1;
  Engine e(scene, static_cast<int>(scene.history_length()), &model, c, Objective::Attack);
  return e.run_pgd();
}

AttackResult attack_sequential(const Scene& scene, int H, const predictors::PredictionModel& model,
                               const AttackConfig& cfg) {
  Engine e(scene, H, &model, cfg, Objective::Attack);
  return e.run_pgd();
}

LossTerms attack_objective(const Scene& scene, int H, const predictors::PredictionModel& model,
                           const AttackConfig& cfg, const dynamics::ControlSequence* controls,
                           std::vector<dynamics::ControlAction>* grad) {
  Engine e(scene, H, &model, cfg, Objective::Attack);
  const auto ev = e.evaluate(controls ? *controls : e.initial_controls(), grad != nullptr);
  if (grad) *grad = ev.grad;
  return ev.total;
}

AttackResult attack_random_search(const Scene& scene, const predictors::PredictionModel& model,
                                  const AttackConfig& cfg) {
  AttackConfig c = cfg;
  c.lp = 1;
  Engine e(scene, static_cast<int>(scene.history_length()), &model, c, Objective::Attack);
  return e.run_random();
}

Direction direction_from_string(const std::string& s) {
  if (s == "forward") return Direction::Forward;
  if (s == "backward") return Direction::Backward;
  if (s == "left") return Direction::Left;
  if (s == "right") return Direction::Right;
  throw InvalidInput("unknown direction '" + s + "'");
}

std::string to_string(Direction d) {
  switch (d) {
    case Direction::Forward: return "forward";
    case Direction::Backward: return "backward";
    case Direction::Left: return "left";
    case Direction::Right: return "right";
  }
  return "?";
}

Vec2 direction_vector(double heading, Direction d) {
  const Vec2 f(std::cos(heading), std::sin(heading));
  switch (d) {
    case Direction::Forward: return f;
    case Direction::Backward: return -f;
    case Direction::Left: return {-f.y(), f.x()};
    case Direction::Right: return {f.y(), -f.x()};
  }
  return f;
}

AttackResult generate_augmentation(const Scene& scene, const Vec2& direction, const AttackConfig& cfg) {
  if (std::abs(direction.norm() - 1.0) > 1e-9) throw InvalidInput("augmentation: direction must be a unit vector");
  AttackConfig c = cfg;
  c.lp = 1;
  Engine e(scene, static_cast<int>(scene.history_length()), nullptr, c, Objective::Augment, direction);
  return e.run_pgd();
}

}  // namespace advdo::attack
