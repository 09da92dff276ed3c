#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "ld3/ad.hpp"
#include "ld3/rng.hpp"
#include "ld3/schedule.hpp"

namespace ld3 {

/// Noise-prediction function eps(x, t). Implementations provide the same
/// arithmetic for plain doubles and for tape-recorded values so that every
/// solver can be differentiated through the denoiser.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual std::size_t dim() const = 0;
  virtual std::vector<double> epsilon(std::span<const double> x, double t) const = 0;
  virtual std::vector<ad::Var> epsilon(std::span<const ad::Var> x, const ad::Var& t) const = 0;
};

struct MixtureComponent {
  double weight;
  std::vector<double> mean;
  double variance;  // isotropic s_k^2
};

/// Isotropic Gaussian mixture data distribution.
class GaussianMixture {
 public:
  GaussianMixture() = default;
  /// Throws InputError unless weights are positive and sum to one (1e-12),
  /// variances are positive and all means share one dimension.
  explicit GaussianMixture(std::vector<MixtureComponent> components);

  static GaussianMixture single(std::vector<double> mean, double variance);

  std::size_t dim() const { return dim_; }
  std::span<const MixtureComponent> components() const { return components_; }

  /// Ancestral draws x_0 ~ q(x_0).
  std::vector<double> sample(Rng& rng) const;

 private:
  std::vector<MixtureComponent> components_;
  std::size_t dim_ = 0;
};

/// Default 2-D, three-component mixture used by the benchmarks.
GaussianMixture default_mixture();

namespace detail {

/// eps*(x, t) = -sigma_t grad log q_t(x) for the mixture convolved with the
/// forward kernel: component k becomes N(alpha_t mu_k, (alpha_t^2 s_k^2 + sigma_t^2) I).
template <class S>
std::vector<S> gm_epsilon(const GaussianMixture& gm, const NoiseSchedule& sched,
                          std::span<const S> x, const S& t) {
  using std::log;
  const S a = alpha(sched, t);
  const S sg = sigma(sched, t);
  const auto comps = gm.components();
  const std::size_t d = x.size();
  constexpr double two_pi = 6.283185307179586476925286766559;

  std::vector<S> logits;
  std::vector<S> precision;
  std::vector<std::vector<S>> residual(comps.size());
  logits.reserve(comps.size());
  precision.reserve(comps.size());
  for (std::size_t k = 0; k < comps.size(); ++k) {
    const S v = a * a * comps[k].variance + sg * sg;
    residual[k].reserve(d);
    for (std::size_t j = 0; j < d; ++j) residual[k].push_back(x[j] - a * comps[k].mean[j]);
    const S sq = dot(std::span<const S>(residual[k]), std::span<const S>(residual[k]));
    logits.push_back(std::log(comps[k].weight) - 0.5 * static_cast<double>(d) * log(two_pi * v) -
                     sq / (2.0 * v));
    precision.push_back(1.0 / v);
  }
  const S lse = logsumexp(std::span<const S>(logits));
  std::vector<S> out(d, S(0.0));
  for (std::size_t k = 0; k < comps.size(); ++k) {
    using std::exp;
    const S w = exp(logits[k] - lse) * precision[k];
    for (std::size_t j = 0; j < d; ++j) out[j] += w * residual[k][j];
  }
  for (auto& o : out) o = sg * o;
  return out;
}

template <class S>
std::vector<S> point_epsilon(std::span<const double> x0, const NoiseSchedule& sched,
                             std::span<const S> x, const S& t) {
  const S a = alpha(sched, t);
  const S sg = sigma(sched, t);
  std::vector<S> out;
  out.reserve(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out.push_back((x[j] - a * x0[j]) / sg);
  return out;
}

}  // namespace detail

/// Exact denoiser for mixture data. Throws InputError for non-finite x.
std::vector<double> gm_epsilon(const GaussianMixture& gm, const NoiseSchedule& sched,
                               std::span<const double> x, double t);

/// Exact denoiser for point-mass data at x0: (x - alpha_t x0) / sigma_t.
std::vector<double> point_epsilon(std::span<const double> x0, const NoiseSchedule& sched,
                                  std::span<const double> x, double t);

/// log q_t(x) for the noised mixture.
double gm_log_density(const GaussianMixture& gm, const NoiseSchedule& sched,
                      std::span<const double> x, double t);

class GmDenoiser final : public Denoiser {
 public:
  GmDenoiser(GaussianMixture gm, NoiseSchedule sched) : gm_(std::move(gm)), sched_(sched) {}

  std::size_t dim() const override { return gm_.dim(); }
  std::vector<double> epsilon(std::span<const double> x, double t) const override;
  std::vector<ad::Var> epsilon(std::span<const ad::Var> x, const ad::Var& t) const override;

  const GaussianMixture& mixture() const { return gm_; }

 private:
  GaussianMixture gm_;
  NoiseSchedule sched_;
};

class PointDenoiser final : public Denoiser {
 public:
  PointDenoiser(std::vector<double> x0, NoiseSchedule sched) : x0_(std::move(x0)), sched_(sched) {}

  std::size_t dim() const override { return x0_.size(); }
  std::vector<double> epsilon(std::span<const double> x, double t) const override;
  std::vector<ad::Var> epsilon(std::span<const ad::Var> x, const ad::Var& t) const override;

  std::span<const double> point() const { return x0_; }

 private:
  std::vector<double> x0_;
  NoiseSchedule sched_;
};

}  // namespace ld3
