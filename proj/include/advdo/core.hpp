#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace advdo {

using Vec2 = Eigen::Vector2d;
using Path = std::vector<Vec2>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
  using Error::Error;
};

/// Thrown by iterative optimizers when the objective turns non-finite. Carries
/// the loss values recorded up to the failure.
struct OptimizationDiverged : Error {
  OptimizationDiverged(const std::string& what, std::vector<double> trace)
      : Error(what), trace(std::move(trace)) {}
  std::vector<double> trace;
};

struct TrainingError : OptimizationDiverged {
  using OptimizationDiverged::OptimizationDiverged;
};

struct CapabilityError : Error {
  using Error::Error;
};

struct BridgeError : Error {
  using Error::Error;
};

struct PlannerError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct UndefinedTransfer : Error {
  using Error::Error;
};

inline double wrap_angle(double a) {
  // Result in (-pi, pi].
  a = std::remainder(a, 2.0 * std::numbers::pi);
  if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
  return a;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline bool all_finite(const Path& p) {
  for (const auto& v : p)
    if (!std::isfinite(v.x()) || !std::isfinite(v.y())) return false;
  return true;
}

}  // namespace advdo
