#include "advdo/predictors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace advdo::predictors {

namespace {

Vec2 perp(const Vec2& v) { return {-v.y(), v.x()}; }       // J v
Vec2 perp_t(const Vec2& v) { return {v.y(), -v.x()}; }     // J^T v
Vec2 rotate(const Vec2& v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}
double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

void check_cotangent(const Scene& scene, const PredictionCotangent& dY, std::size_t modes) {
  if (dY.size() != modes) throw InvalidInput("pullback: cotangent mode count mismatch");
  for (const auto& m : dY) {
    if (m.size() != scene.agents()) throw InvalidInput("pullback: cotangent agent count mismatch");
    for (const auto& p : m)
      if (p.size() != static_cast<std::size_t>(scene.horizon))
        throw InvalidInput("pullback: cotangent horizon mismatch");
  }
}

double inner(const PredictionCotangent& dY, const Prediction& p) {
  double s = 0.0;
  for (std::size_t k = 0; k < dY.size(); ++k)
    for (std::size_t i = 0; i < dY[k].size(); ++i)
      for (std::size_t t = 0; t < dY[k][i].size(); ++t) s += dY[k][i][t].dot(p.modes[k][i][t]);
  return s;
}

Prediction single_mode(std::vector<Path> futures) {
  Prediction p;
  p.probs.assign(1, std::vector<double>(futures.size(), 1.0));
  p.modes.push_back(std::move(futures));
  return p;
}

}  // namespace

HistoryGrad fd_pullback(const PredictionModel& model, const Scene& scene,
                        const PredictionCotangent& dY, double h) {
  HistoryGrad g = zero_history_grad(scene);
  Scene s = scene;
  for (std::size_t i = 0; i < s.agents(); ++i)
    for (std::size_t j = 0; j < s.histories[i].size(); ++j)
      for (int c = 0; c < 2; ++c) {
        const double x0 = s.histories[i][j][c];
        s.histories[i][j][c] = x0 + h;
        const double fp = inner(dY, model.predict(s));
        s.histories[i][j][c] = x0 - h;
        const double fm = inner(dY, model.predict(s));
        s.histories[i][j][c] = x0;
        g[i][j][c] = (fp - fm) / (2.0 * h);
      }
  return g;
}

// ---------------------------------------------------------------- analytic

Prediction ConstantVelocity::predict(const Scene& scene) const {
  scene.validate();
  std::vector<Path> fut(scene.agents());
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    const auto& h = scene.histories[i];
    const Vec2 x0 = h.back();
    const Vec2 d = x0 - h[h.size() - 2];
    for (int t = 1; t <= scene.horizon; ++t) fut[i].push_back(x0 + t * d);
  }
  return single_mode(std::move(fut));
}

HistoryGrad ConstantVelocity::pullback(const Scene& scene, const PredictionCotangent& dY) const {
  scene.validate();
  check_cotangent(scene, dY, 1);
  HistoryGrad g = zero_history_grad(scene);
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    const std::size_t H = g[i].size();
    for (int t = 1; t <= scene.horizon; ++t) {
      const Vec2& c = dY[0][i][t - 1];
      g[i][H - 1] += (1.0 + t) * c;
      g[i][H - 2] -= t * c;
    }
  }
  return g;
}

namespace {

struct Turn {
  Vec2 d, dp;  // last and previous displacement
  double phi = 0.0;
  bool turning = false;
};

Turn turn_of(const Path& h) {
  Turn r;
  const std::size_t H = h.size();
  r.d = h[H - 1] - h[H - 2];
  if (H >= 3) {
    r.dp = h[H - 2] - h[H - 3];
    const double c = cross(r.dp, r.d), p = r.dp.dot(r.d);
    if (c * c + p * p > 1e-18) {
      r.phi = std::atan2(c, p);
      r.turning = true;
    }
  }
  return r;
}

}  // namespace

Prediction KinematicExtrapolation::predict(const Scene& scene) const {
  scene.validate();
  std::vector<Path> fut(scene.agents());
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    const auto& h = scene.histories[i];
    const Turn tr = turn_of(h);
    Vec2 x = h.back();
    for (int t = 1; t <= scene.horizon; ++t) {
      x += rotate(tr.d, t * tr.phi);
      fut[i].push_back(x);
    }
  }
  return single_mode(std::move(fut));
}

HistoryGrad KinematicExtrapolation::pullback(const Scene& scene,
                                             const PredictionCotangent& dY) const {
  scene.validate();
  check_cotangent(scene, dY, 1);
  HistoryGrad g = zero_history_grad(scene);
  const int T = scene.horizon;
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    const auto& h = scene.histories[i];
    const std::size_t H = h.size();
    const Turn tr = turn_of(h);
    // Y_t = x0 + sum_{s<=t} R(s phi) d; G_s = sum_{t>=s} dY_t.
    Vec2 G = Vec2::Zero();
    Vec2 dd = Vec2::Zero();
    double dphi = 0.0;
    for (int s = T; s >= 1; --s) {
      G += dY[0][i][s - 1];
      const Vec2 rd = rotate(tr.d, s * tr.phi);
      dd += rotate(G, -s * tr.phi);
      dphi += s * G.dot(perp(rd));
    }
    g[i][H - 1] += G;  // G is now the sum over all t
    Vec2 ddp = Vec2::Zero();
    if (tr.turning) {
      const double c = cross(tr.dp, tr.d), p = tr.dp.dot(tr.d);
      const double q = c * c + p * p;
      const double dc = dphi * p / q, dpp = -dphi * c / q;
      dd += dc * Vec2(-tr.dp.y(), tr.dp.x()) + dpp * tr.dp;
      ddp += dc * Vec2(tr.d.y(), -tr.d.x()) + dpp * tr.d;
    }
    g[i][H - 1] += dd;
    g[i][H - 2] -= dd;
    if (H >= 3) {
      g[i][H - 2] += ddp;
      g[i][H - 3] -= ddp;
    }
  }
  return g;
}

// ---------------------------------------------------------------- social-mlp

namespace {

constexpr double kStationaryDisp = 1e-3;   // m per step
constexpr double kNeighbourRange = 30.0;   // m

Eigen::MatrixXd xavier(int rows, int cols, std::mt19937_64& rng, double gain) {
  const double a = gain * std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> U(-a, a);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = U(rng);
  return m;
}

Vec2 to_local(const SocialMlp::Frame& f, const Vec2& q) {
  const Vec2 r = q - f.origin;
  return {f.axis.dot(r), perp(f.axis).dot(r)};
}

Vec2 to_world_dir(const SocialMlp::Frame& f, const Vec2& l) { return l.x() * f.axis + l.y() * perp(f.axis); }

// Cotangent dl on to_local(f, q), scattered to q, the origin and the axis.
void local_pullback(const SocialMlp::Frame& f, const Vec2& q, const Vec2& dl, Vec2& dq, Vec2& dorigin,
                    Vec2& daxis) {
  const Vec2 w = to_world_dir(f, dl);
  dq += w;
  dorigin -= w;
  const Vec2 r = q - f.origin;
  daxis += dl.x() * r + dl.y() * perp_t(r);
}

}  // namespace

SocialMlp::SocialMlp(int history, int horizon, int modes, int hidden, std::uint64_t seed)
    : h_(history), t_(horizon), k_(modes), seed_(seed) {
  if (history < 2 || horizon < 1 || modes < 1 || hidden < 1)
    throw InvalidInput("social-mlp: invalid shape");
  std::mt19937_64 rng(seed);
  w_.W1 = xavier(hidden, input_size(), rng, 1.0);
  w_.W2 = xavier(hidden, hidden, rng, 1.0);
  w_.W3 = xavier(output_size(), hidden, rng, 0.1);
  w_.b1 = Eigen::VectorXd::Zero(hidden);
  w_.b2 = Eigen::VectorXd::Zero(hidden);
  w_.b3 = Eigen::VectorXd::Zero(output_size());
}

SocialMlp::SocialMlp(int history, int horizon, int modes, Weights w, std::uint64_t seed)
    : h_(history), t_(horizon), k_(modes), w_(std::move(w)), seed_(seed) {
  if (history < 2 || horizon < 1 || modes < 1) throw InvalidInput("social-mlp: invalid shape");
  const auto hidden = w_.W1.rows();
  if (w_.W1.cols() != input_size() || w_.b1.size() != hidden || w_.W2.rows() != hidden ||
      w_.W2.cols() != hidden || w_.b2.size() != hidden || w_.W3.rows() != output_size() ||
      w_.W3.cols() != hidden || w_.b3.size() != output_size())
    throw InvalidInput("social-mlp: weight shapes do not match the declared sizes");
  auto finite = [](const auto& m) { return m.allFinite(); };
  if (!finite(w_.W1) || !finite(w_.W2) || !finite(w_.W3) || !finite(w_.b1) || !finite(w_.b2) ||
      !finite(w_.b3))
    throw InvalidInput("social-mlp: non-finite weights");
}

void SocialMlp::check(const Scene& scene) const {
  scene.validate();
  if (scene.history_length() != static_cast<std::size_t>(h_))
    throw InvalidInput("social-mlp: scene history length differs from the model");
  if (scene.horizon != t_) throw InvalidInput("social-mlp: scene horizon differs from the model");
}

SocialMlp::Features SocialMlp::features(const Scene& scene, std::size_t agent) const {
  Features ft;
  const auto& h = scene.histories[agent];
  const std::size_t H = h.size();
  Frame& f = ft.frame;
  f.origin = h[H - 1];
  f.disp = h[H - 1] - h[H - 2];
  const double n = f.disp.norm();
  f.fallback = n < kStationaryDisp;
  f.axis = f.fallback ? Vec2(1.0, 0.0) : Vec2(f.disp / n);

  ft.x = Eigen::VectorXd::Zero(input_size());
  int c = 0;
  for (std::size_t s = 1; s < H; ++s) {
    const Vec2 l = to_local(f, h[H - 1 - s]) / kPosScale;
    ft.x[c++] = l.x();
    ft.x[c++] = l.y();
  }
  std::vector<std::pair<double, int>> others;
  for (std::size_t j = 0; j < scene.agents(); ++j) {
    if (j == agent) continue;
    const double d = (scene.histories[j].back() - f.origin).norm();
    if (d <= kNeighbourRange) others.emplace_back(d, static_cast<int>(j));
  }
  std::sort(others.begin(), others.end());
  ft.neighbours.assign(kNeighbours, -1);
  for (int m = 0; m < kNeighbours; ++m) {
    if (m < static_cast<int>(others.size())) {
      const int j = others[m].second;
      ft.neighbours[m] = j;
      const auto& hj = scene.histories[j];
      const Vec2 l0 = to_local(f, hj[H - 1]) / kPosScale;
      const Vec2 l1 = to_local(f, hj[H - 2]) / kPosScale;
      ft.x[c] = 1.0;
      ft.x[c + 1] = l0.x();
      ft.x[c + 2] = l0.y();
      ft.x[c + 3] = l1.x();
      ft.x[c + 4] = l1.y();
    }
    c += 5;
  }
  return ft;
}

SocialMlp::Forward SocialMlp::forward(const Eigen::VectorXd& x) const {
  Forward f;
  f.a1 = (w_.W1 * x + w_.b1).array().tanh().matrix();
  f.a2 = (w_.W2 * f.a1 + w_.b2).array().tanh().matrix();
  f.out = w_.W3 * f.a2 + w_.b3;
  return f;
}

Eigen::VectorXd SocialMlp::backward(const Eigen::VectorXd& x, const Forward& f,
                                    const Eigen::VectorXd& dout, Weights* wg) const {
  const Eigen::VectorXd da2 = w_.W3.transpose() * dout;
  const Eigen::VectorXd dz2 = (da2.array() * (1.0 - f.a2.array().square())).matrix();
  const Eigen::VectorXd da1 = w_.W2.transpose() * dz2;
  const Eigen::VectorXd dz1 = (da1.array() * (1.0 - f.a1.array().square())).matrix();
  if (wg) {
    wg->W3.noalias() += dout * f.a2.transpose();
    wg->b3 += dout;
    wg->W2.noalias() += dz2 * f.a1.transpose();
    wg->b2 += dz2;
    wg->W1.noalias() += dz1 * x.transpose();
    wg->b1 += dz1;
  }
  return w_.W1.transpose() * dz1;
}

void SocialMlp::decode(const Features& ft, const Eigen::VectorXd& out, std::vector<Path>& modes,
                       std::vector<double>& probs) const {
  modes.assign(k_, Path(t_));
  probs.assign(k_, 0.0);
  const auto logits = out.tail(k_);
  const double mx = logits.maxCoeff();
  double z = 0.0;
  for (int k = 0; k < k_; ++k) z += std::exp(logits[k] - mx);
  for (int k = 0; k < k_; ++k) {
    probs[k] = std::exp(logits[k] - mx) / z;
    for (int t = 0; t < t_; ++t) {
      const Vec2 r(out[k * 2 * t_ + 2 * t], out[k * 2 * t_ + 2 * t + 1]);
      modes[k][t] = ft.frame.origin + (t + 1.0) * ft.frame.disp + kPosScale * to_world_dir(ft.frame, r);
    }
  }
}

Prediction SocialMlp::predict(const Scene& scene) const {
  check(scene);
  Prediction p;
  p.modes.assign(k_, std::vector<Path>(scene.agents()));
  p.probs.assign(k_, std::vector<double>(scene.agents()));
  std::vector<Path> modes;
  std::vector<double> probs;
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    const auto ft = features(scene, i);
    decode(ft, forward(ft.x).out, modes, probs);
    for (int k = 0; k < k_; ++k) {
      p.modes[k][i] = std::move(modes[k]);
      p.probs[k][i] = probs[k];
    }
  }
  return p;
}

HistoryGrad SocialMlp::pullback(const Scene& scene, const PredictionCotangent& dY) const {
  check(scene);
  check_cotangent(scene, dY, k_);
  HistoryGrad g = zero_history_grad(scene);
  const std::size_t H = h_;
  for (std::size_t i = 0; i < scene.agents(); ++i) {
    const auto ft = features(scene, i);
    const auto fw = forward(ft.x);
    const Frame& f = ft.frame;
    Vec2 dorigin = Vec2::Zero(), ddisp = Vec2::Zero(), daxis = Vec2::Zero();
    Eigen::VectorXd dout = Eigen::VectorXd::Zero(output_size());
    for (int k = 0; k < k_; ++k)
      for (int t = 0; t < t_; ++t) {
        const Vec2& c = dY[k][i][t];
        const Vec2 r = kPosScale * Vec2(fw.out[k * 2 * t_ + 2 * t], fw.out[k * 2 * t_ + 2 * t + 1]);
        dorigin += c;
        ddisp += (t + 1.0) * c;
        daxis += r.x() * c + r.y() * perp_t(c);
        dout[k * 2 * t_ + 2 * t] = kPosScale * f.axis.dot(c);
        dout[k * 2 * t_ + 2 * t + 1] = kPosScale * perp(f.axis).dot(c);
      }
    const Eigen::VectorXd dx = backward(ft.x, fw, dout, nullptr);

    const auto& h = scene.histories[i];
    int col = 0;
    for (std::size_t s = 1; s < H; ++s) {
      const Vec2 dl = Vec2(dx[col], dx[col + 1]) / kPosScale;
      local_pullback(f, h[H - 1 - s], dl, g[i][H - 1 - s], dorigin, daxis);
      col += 2;
    }
    for (int m = 0; m < kNeighbours; ++m, col += 5) {
      const int j = ft.neighbours[m];
      if (j < 0) continue;
      const auto& hj = scene.histories[j];
      local_pullback(f, hj[H - 1], Vec2(dx[col + 1], dx[col + 2]) / kPosScale, g[j][H - 1], dorigin,
                     daxis);
      local_pullback(f, hj[H - 2], Vec2(dx[col + 3], dx[col + 4]) / kPosScale, g[j][H - 2], dorigin,
                     daxis);
    }
    if (!f.fallback) {
      const double n = f.disp.norm();
      ddisp += (daxis - f.axis * f.axis.dot(daxis)) / n;
    }
    g[i][H - 1] += dorigin + ddisp;
    g[i][H - 2] -= ddisp;
  }
  return g;
}

// ---------------------------------------------------------------- training

std::vector<Sample> samples_of(const std::vector<Scene>& scenes) {
  std::vector<Sample> out;
  for (const auto& s : scenes)
    if (s.has_futures())
      for (std::size_t i = 0; i < s.agents(); ++i) out.push_back({&s, i});
  return out;
}

namespace {

SocialMlp::Weights zeros_like(const SocialMlp::Weights& w) {
  return {Eigen::MatrixXd::Zero(w.W1.rows(), w.W1.cols()),
          Eigen::MatrixXd::Zero(w.W2.rows(), w.W2.cols()),
          Eigen::MatrixXd::Zero(w.W3.rows(), w.W3.cols()),
          Eigen::VectorXd::Zero(w.b1.size()),
          Eigen::VectorXd::Zero(w.b2.size()),
          Eigen::VectorXd::Zero(w.b3.size())};
}

template <typename M>
void adam_update(M& x, M& m, M& v, const M& g, double lr, double c1, double c2) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  x.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

// WTA loss of one sample; accumulates weight gradients scaled by `w`.
double sample_loss(const SocialMlp& model, const Sample& s, double ce_weight, double w,
                   SocialMlp::Weights& grad) {
  const auto ft = model.features(*s.scene, s.agent);
  const auto fw = model.forward(ft.x);
  std::vector<Path> modes;
  std::vector<double> probs;
  model.decode(ft, fw.out, modes, probs);
  const Path& gt = s.scene->futures[s.agent];
  const int K = model.modes(), T = model.horizon();
  int best = 0;
  std::vector<double> err(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int t = 0; t < T; ++t) err[k] += (modes[k][t] - gt[t]).squaredNorm() / T;
    if (err[k] < err[best]) best = k;
  }
  const double loss = err[best] - ce_weight * std::log(std::max(probs[best], 1e-300));
  Eigen::VectorXd dout = Eigen::VectorXd::Zero(model.output_size());
  const auto& f = ft.frame;
  for (int t = 0; t < T; ++t) {
    const Vec2 c = 2.0 * (modes[best][t] - gt[t]) / T * w;
    dout[best * 2 * T + 2 * t] = SocialMlp::kPosScale * f.axis.dot(c);
    dout[best * 2 * T + 2 * t + 1] = SocialMlp::kPosScale * perp(f.axis).dot(c);
  }
  for (int k = 0; k < K; ++k) dout[K * 2 * T + k] = w * ce_weight * (probs[k] - (k == best ? 1.0 : 0.0));
  model.backward(ft.x, fw, dout, &grad);
  return loss;
}

}  // namespace

AdamState::AdamState(const SocialMlp& m) : m1_(zeros_like(m.weights())), m2_(zeros_like(m.weights())) {}

void AdamState::step(SocialMlp& model, const SocialMlp::Weights& g, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(0.9, t_), c2 = 1.0 - std::pow(0.999, t_);
  auto& w = model.weights();
  adam_update(w.W1, m1_.W1, m2_.W1, g.W1, lr, c1, c2);
  adam_update(w.W2, m1_.W2, m2_.W2, g.W2, lr, c1, c2);
  adam_update(w.W3, m1_.W3, m2_.W3, g.W3, lr, c1, c2);
  adam_update(w.b1, m1_.b1, m2_.b1, g.b1, lr, c1, c2);
  adam_update(w.b2, m1_.b2, m2_.b2, g.b2, lr, c1, c2);
  adam_update(w.b3, m1_.b3, m2_.b3, g.b3, lr, c1, c2);
}

double train_epoch(SocialMlp& model, std::vector<Sample> samples, const TrainConfig& cfg,
                   AdamState& opt, std::uint64_t epoch_seed) {
  if (samples.empty()) throw InvalidInput("train: no samples with futures");
  std::mt19937_64 rng(epoch_seed);
  std::shuffle(samples.begin(), samples.end(), rng);
  const std::size_t B = static_cast<std::size_t>(std::max(1, cfg.batch));
  double total = 0.0;
  for (std::size_t b = 0; b < samples.size(); b += B) {
    const std::size_t e = std::min(samples.size(), b + B);
    auto grad = zeros_like(model.weights());
    const double w = 1.0 / static_cast<double>(e - b);
    for (std::size_t i = b; i < e; ++i) total += sample_loss(model, samples[i], cfg.ce_weight, w, grad);
    opt.step(model, grad, cfg.lr);
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train_surrogate(const std::vector<Scene>& dataset, const TrainConfig& cfg,
                            std::shared_ptr<const SocialMlp> init) {
  if (dataset.empty()) throw InvalidInput("train: empty dataset");
  if (cfg.epochs < 0 || !(cfg.lr >= 0.0)) throw InvalidInput("train: invalid epochs or lr");
  for (const auto& s : dataset) s.validate();
  const int H = static_cast<int>(dataset.front().history_length());
  const int T = dataset.front().horizon;
  for (const auto& s : dataset)
    if (static_cast<int>(s.history_length()) != H || s.horizon != T)
      throw InvalidInput("train: dataset scenes have different shapes");

  TrainResult res;
  res.model = init ? std::make_shared<SocialMlp>(*init)
                   : std::make_shared<SocialMlp>(H, T, cfg.modes, cfg.hidden, cfg.seed);
  if (res.model->history() != H || res.model->horizon() != T)
    throw InvalidInput("train: initial model shape differs from the dataset");
  const auto samples = samples_of(dataset);
  AdamState opt(*res.model);
  std::mt19937_64 seeder(cfg.seed ^ 0x5eedULL);
  for (int e = 0; e < cfg.epochs; ++e) {
    const double l = train_epoch(*res.model, samples, cfg, opt, seeder());
    res.loss_trace.push_back(l);
    if (!std::isfinite(l)) throw TrainingError("train: non-finite loss", res.loss_trace);
  }
  return res;
}

// ---------------------------------------------------------------- factory

std::string to_string(SurrogateKind k) {
  switch (k) {
    case SurrogateKind::ConstantVelocity: return "constant-velocity";
    case SurrogateKind::KinematicExtrapolation: return "kinematic-extrapolation";
    case SurrogateKind::SocialMlp: return "social-mlp";
  }
  return "?";
}

SurrogateKind surrogate_kind_from_string(const std::string& s) {
  if (s == "constant-velocity") return SurrogateKind::ConstantVelocity;
  if (s == "kinematic-extrapolation") return SurrogateKind::KinematicExtrapolation;
  if (s == "social-mlp") return SurrogateKind::SocialMlp;
  throw InvalidInput("unknown surrogate kind '" + s + "'");
}

ModelPtr make_surrogate(SurrogateKind kind, int history, int horizon, std::uint64_t seed) {
  switch (kind) {
    case SurrogateKind::ConstantVelocity: return std::make_shared<ConstantVelocity>();
    case SurrogateKind::KinematicExtrapolation: return std::make_shared<KinematicExtrapolation>();
    case SurrogateKind::SocialMlp: return std::make_shared<SocialMlp>(history, horizon, 3, 64, seed);
  }
  throw InvalidInput("unknown surrogate kind");
}

}  // namespace advdo::predictors
