#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace advdo::optim {

/// Adam moment estimates. `direction` folds a gradient into the moments and
/// returns the bias-corrected step direction; the caller chooses the step size.
class Adam {
 public:
  explicit Adam(std::size_t n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  std::vector<double> direction(std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    std::vector<double> d(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      d[i] = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
    return d;
  }

  /// In-place update x -= lr * direction(grad).
  void step(std::span<double> x, std::span<const double> grad, double lr) {
    const auto d = direction(grad);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr * d[i];
  }

  int iterations() const { return t_; }

 private:
  std::vector<double> m_, v_;
  double beta1_, beta2_, eps_;
  int t_ = 0;
};

}  // namespace advdo::optim
