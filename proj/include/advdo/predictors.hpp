#pragma once

// Prediction models P: X -> Y_hat and their vector-Jacobian products.

#include "advdo/scene.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace advdo::predictors {

class PredictionModel {
 public:
  virtual ~PredictionModel() = default;

  virtual std::string name() const = 0;
  virtual Prediction predict(const Scene& scene) const = 0;
  /// Gradient of <dY, predict(scene).modes> with respect to the histories.
  virtual HistoryGrad pullback(const Scene& scene, const PredictionCotangent& dY) const = 0;
  virtual bool has_exact_gradient() const = 0;
};

using ModelPtr = std::shared_ptr<const PredictionModel>;

/// Central differences of <dY, predict> over every history coordinate.
HistoryGrad fd_pullback(const PredictionModel& model, const Scene& scene,
                        const PredictionCotangent& dY, double h = 1e-4);

/// Y^t = X^0 + t (X^0 - X^-1), K = 1.
class ConstantVelocity final : public PredictionModel {
 public:
  std::string name() const override { return "constant-velocity"; }
  Prediction predict(const Scene& scene) const override;
  HistoryGrad pullback(const Scene& scene, const PredictionCotangent& dY) const override;
  bool has_exact_gradient() const override { return true; }
};

/// Constant speed and turn rate: each future displacement is the previous
/// one rotated by the signed angle between the last two observed
/// displacements. K = 1; needs H >= 3 to turn (H = 2 gives constant velocity).
class KinematicExtrapolation final : public PredictionModel {
 public:
  std::string name() const override { return "kinematic-extrapolation"; }
  Prediction predict(const Scene& scene) const override;
  HistoryGrad pullback(const Scene& scene, const PredictionCotangent& dY) const override;
  bool has_exact_gradient() const override { return true; }
};

/// Two-hidden-layer tanh MLP over agent-local features of the own history and
/// the 4 nearest neighbours. Outputs K residual futures on a constant-velocity
/// baseline in the agent frame plus mode logits.
class SocialMlp final : public PredictionModel {
 public:
  static constexpr int kNeighbours = 4;
  static constexpr double kPosScale = 10.0;

  struct Weights {
    Eigen::MatrixXd W1, W2, W3;
    Eigen::VectorXd b1, b2, b3;
  };

  SocialMlp(int history, int horizon, int modes, int hidden, std::uint64_t seed);
  SocialMlp(int history, int horizon, int modes, Weights w, std::uint64_t seed);

  std::string name() const override { return "social-mlp"; }
  Prediction predict(const Scene& scene) const override;
  HistoryGrad pullback(const Scene& scene, const PredictionCotangent& dY) const override;
  bool has_exact_gradient() const override { return true; }

  int history() const { return h_; }
  int horizon() const { return t_; }
  int modes() const { return k_; }
  int input_size() const { return 2 * (h_ - 1) + 5 * kNeighbours; }
  int output_size() const { return k_ * (2 * t_ + 1); }
  std::uint64_t seed() const { return seed_; }
  const Weights& weights() const { return w_; }
  Weights& weights() { return w_; }

  // Per-agent pieces, exposed for training and tests.
  struct Frame {
    Vec2 origin;
    Vec2 axis;       // unit heading of the agent frame
    Vec2 disp;       // last observed displacement
    bool fallback;   // nearly stationary: world x-axis used
  };
  struct Features {
    Frame frame;
    Eigen::VectorXd x;
    std::vector<int> neighbours;  // scene indices, -1 when absent
  };
  Features features(const Scene& scene, std::size_t agent) const;
  struct Forward {
    Eigen::VectorXd a1, a2, out;
  };
  Forward forward(const Eigen::VectorXd& x) const;
  /// Gradient on x of <dout, out>; accumulates weight gradients when `wg`.
  Eigen::VectorXd backward(const Eigen::VectorXd& x, const Forward& f, const Eigen::VectorXd& dout,
                           Weights* wg) const;
  /// Decoded world-frame futures and probabilities for one agent.
  void decode(const Features& ft, const Eigen::VectorXd& out, std::vector<Path>& modes,
              std::vector<double>& probs) const;

 private:
  void check(const Scene& scene) const;
  int h_, t_, k_;
  Weights w_;
  std::uint64_t seed_;
};

/// Built-in surrogate kinds and their serialized form.
enum class SurrogateKind { ConstantVelocity, KinematicExtrapolation, SocialMlp };

std::string to_string(SurrogateKind k);
SurrogateKind surrogate_kind_from_string(const std::string& s);

ModelPtr make_surrogate(SurrogateKind kind, int history = 4, int horizon = 12, std::uint64_t seed = 0);

/// JSON text with a "format" field; social-mlp includes its weights.
std::string save_model(const PredictionModel& model);
ModelPtr load_model(const std::string& json_text);
ModelPtr load_model_file(const std::string& path);
void save_model_file(const PredictionModel& model, const std::string& path);

struct TrainConfig {
  int epochs = 200;
  double lr = 1e-3;
  int batch = 64;
  double ce_weight = 0.1;
  std::uint64_t seed = 0;
  int hidden = 64;
  int modes = 3;
};

struct TrainResult {
  std::shared_ptr<SocialMlp> model;
  std::vector<double> loss_trace;  // mean loss per epoch
};

/// One supervised sample: an agent of a scene with a known future.
struct Sample {
  const Scene* scene;
  std::size_t agent;
};

std::vector<Sample> samples_of(const std::vector<Scene>& scenes);

/// Winner-takes-all MSE plus cross-entropy on the winning mode, Adam, seeded
/// minibatches. Continues from `init` when given.
TrainResult train_surrogate(const std::vector<Scene>& dataset, const TrainConfig& cfg,
                            std::shared_ptr<const SocialMlp> init = nullptr);

class AdamState {
 public:
  explicit AdamState(const SocialMlp& m);
  void step(SocialMlp& m, const SocialMlp::Weights& g, double lr);

 private:
  SocialMlp::Weights m1_, m2_;
  int t_ = 0;
};

/// One epoch over explicit samples; returns the mean loss. Used by the
/// trainers above and by adversarial training.
double train_epoch(SocialMlp& model, std::vector<Sample> samples, const TrainConfig& cfg,
                   AdamState& opt, std::uint64_t epoch_seed);

/// Child process speaking line-delimited JSON on stdin/stdout.
class ExternalModel final : public PredictionModel {
 public:
  struct Options {
    std::chrono::milliseconds timeout{30000};
    bool finite_difference = true;  // used when the child has no gradient support
    double fd_step = 1e-4;
  };
  explicit ExternalModel(std::string command);
  ExternalModel(std::string command, Options opts);
  ~ExternalModel() override;
  ExternalModel(const ExternalModel&) = delete;
  ExternalModel& operator=(const ExternalModel&) = delete;

  std::string name() const override { return "external"; }
  Prediction predict(const Scene& scene) const override;
  HistoryGrad pullback(const Scene& scene, const PredictionCotangent& dY) const override;
  bool has_exact_gradient() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Options opts_;
};

}  // namespace advdo::predictors
