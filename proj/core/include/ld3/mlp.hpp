#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ld3/denoiser.hpp"

namespace ld3 {

struct MlpLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;  // row-major, out x in
  std::vector<double> bias;
};

/// Small fully connected noise predictor. Input features are the scaled
/// state x / sqrt(alpha_t^2 + sigma_t^2) followed by sin/cos embeddings of
/// lambda_t; hidden layers use SiLU, the output layer is linear.
class MlpDenoiser final : public Denoiser {
 public:
  /// Randomly initialized network (He-normal weights, zero biases).
  MlpDenoiser(const NoiseSchedule& sched, std::size_t d, std::size_t width,
              std::size_t hidden_layers, std::uint64_t seed);
  /// Network from explicit layers; throws InputError on inconsistent shapes.
  MlpDenoiser(const NoiseSchedule& sched, std::size_t d, std::vector<MlpLayer> layers);

  std::size_t dim() const override { return d_; }
  std::vector<double> epsilon(std::span<const double> x, double t) const override;
  std::vector<ad::Var> epsilon(std::span<const ad::Var> x, const ad::Var& t) const override;

  std::vector<MlpLayer> layers() const;
  const NoiseSchedule& schedule() const { return sched_; }

  /// All weights and biases, layer by layer (weights before bias).
  std::span<const double> parameters() const { return params_; }
  void set_parameters(std::span<const double> params);

  static constexpr std::size_t kTimeFrequencies = 4;
  std::size_t feature_count() const { return d_ + 2 * kTimeFrequencies; }

  /// Forward pass with parameters of type P and inputs of type S, where P is
  /// double or the same as S.
  template <class P, class S>
  std::vector<S> forward(std::span<const P> params, std::span<const S> x, const S& t) const;

 private:
  void build_offsets();

  NoiseSchedule sched_;
  std::size_t d_ = 0;
  std::vector<std::size_t> shape_;  // feature_count, hidden..., d
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // per layer start in params_
};

enum class DsmWeight { Uniform, Sigma2 };

struct DsmConfig {
  std::size_t steps = 1500;
  std::size_t batch = 32;
  double lr = 2e-3;
  std::uint64_t seed = 0;
  DsmWeight weight = DsmWeight::Uniform;
  std::size_t width = 64;
  std::size_t hidden_layers = 2;
};

struct DsmResult {
  MlpDenoiser model;
  std::vector<double> loss_trace;
};

/// Trains an MlpDenoiser on mixture data by denoising score matching:
/// minimizes E[w(t) |eps_theta(alpha_t x0 + sigma_t eps, t) - eps|^2 / d] with
/// t ~ U[t_min, T]. Throws TrainingDivergedError on a non-finite loss.
DsmResult train_mlp_dsm(const GaussianMixture& gm, const NoiseSchedule& sched,
                        const DsmConfig& config);

template <class P, class S>
std::vector<S> MlpDenoiser::forward(std::span<const P> params, std::span<const S> x,
                                    const S& t) const {
  using std::cos;
  using std::sin;
  using std::sqrt;
  const S a = alpha(sched_, t);
  const S sg = sigma(sched_, t);
  const S c_in = 1.0 / sqrt(a * a + sg * sg);
  const S lam = lambda(sched_, t);

  std::vector<S> h;
  h.reserve(feature_count());
  for (std::size_t j = 0; j < d_; ++j) h.push_back(c_in * x[j]);
  double freq = 0.25;
  for (std::size_t k = 0; k < kTimeFrequencies; ++k, freq *= 2.0) {
    h.push_back(sin(freq * lam));
    h.push_back(cos(freq * lam));
  }

  const std::size_t n_layers = shape_.size() - 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = shape_[l];
    const std::size_t out = shape_[l + 1];
    const std::size_t w0 = offsets_[l];
    const std::size_t b0 = w0 + in * out;
    std::vector<S> next;
    next.reserve(out);
    for (std::size_t o = 0; o < out; ++o) {
      S z = dot(params.subspan(w0 + o * in, in), std::span<const S>(h)) + params[b0 + o];
      if (l + 1 < n_layers) z = silu(z);
      next.push_back(z);
    }
    h = std::move(next);
  }
  return h;
}

}  // namespace ld3
