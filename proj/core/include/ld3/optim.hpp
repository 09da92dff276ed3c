#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace ld3 {

/// RMSprop with heavy-ball momentum:
///   v <- decay v + (1 - decay) g^2
///   b <- momentum b + g / (sqrt(v) + eps)
///   p <- p - lr b
class RmsProp {
 public:
  RmsProp(std::size_t n, double decay, double momentum, double eps)
      : square_avg_(n, 0.0), buffer_(n, 0.0), decay_(decay), momentum_(momentum), eps_(eps) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      square_avg_[i] = decay_ * square_avg_[i] + (1.0 - decay_) * grad[i] * grad[i];
      buffer_[i] = momentum_ * buffer_[i] + grad[i] / (std::sqrt(square_avg_[i]) + eps_);
      params[i] -= lr * buffer_[i];
    }
  }

 private:
  std::vector<double> square_avg_;
  std::vector<double> buffer_;
  double decay_;
  double momentum_;
  double eps_;
};

inline void sgd_step(std::span<double> params, std::span<const double> grad, double lr) {
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
}

/// Rescales grad in place so its norm is at most max_norm. Returns the norm
/// before clipping.
inline double clip_grad_norm(std::span<double> grad, double max_norm) {
  double s = 0.0;
  for (double g : grad) s += g * g;
  const double n = std::sqrt(s);
  if (n > max_norm) {
    const double scale = max_norm / n;
    for (double& g : grad) g *= scale;
  }
  return n;
}

/// Multiplies the learning rate by `factor` once the monitored loss has not
/// improved for more than `patience` consecutive reports; never goes below
/// `floor`.
class PlateauDecay {
 public:
  PlateauDecay(double factor, std::size_t patience, double floor)
      : factor_(factor), patience_(patience), floor_(floor) {}

  double step(double loss, double lr) {
    if (loss < best_) {
      best_ = loss;
      bad_ = 0;
      return lr;
    }
    if (++bad_ > patience_) {
      bad_ = 0;
      if (lr > floor_) return std::max(lr * factor_, floor_);
    }
    return lr;
  }

 private:
  double factor_;
  std::size_t patience_;
  double floor_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
};

}  // namespace ld3
