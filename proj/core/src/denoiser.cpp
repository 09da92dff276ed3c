#include "ld3/denoiser.hpp"

#include <cmath>
#include <string>

#include "ld3/error.hpp"

namespace ld3 {

namespace {

void require_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InputError("non-finite denoiser input");
  }
}

}  // namespace

GaussianMixture::GaussianMixture(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InputError("mixture needs at least one component");
  dim_ = components_.front().mean.size();
  if (dim_ == 0) throw InputError("mixture dimension must be positive");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0)) throw InputError("mixture weights must be positive");
    if (!(c.variance > 0.0)) throw InputError("mixture variances must be positive");
    if (c.mean.size() != dim_) throw InputError("mixture means differ in dimension");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw InputError("mixture weights sum to " + std::to_string(total) + ", expected 1");
  }
}

GaussianMixture GaussianMixture::single(std::vector<double> mean, double variance) {
  return GaussianMixture({MixtureComponent{1.0, std::move(mean), variance}});
}

std::vector<double> GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  std::size_t k = 0;
  double acc = components_[0].weight;
  while (u >= acc && k + 1 < components_.size()) acc += components_[++k].weight;
  const auto& c = components_[k];
  const double s = std::sqrt(c.variance);
  std::vector<double> x(dim_);
  for (std::size_t j = 0; j < dim_; ++j) x[j] = c.mean[j] + s * rng.normal();
  return x;
}

GaussianMixture default_mixture() {
  return GaussianMixture({
      {0.45, {-1.5, 0.5}, 0.25},
      {0.35, {1.5, 1.0}, 0.50},
      {0.20, {0.0, -1.5}, 0.15},
  });
}

std::vector<double> gm_epsilon(const GaussianMixture& gm, const NoiseSchedule& sched,
                               std::span<const double> x, double t) {
  require_finite(x);
  if (x.size() != gm.dim()) throw InputError("input dimension does not match mixture");
  return detail::gm_epsilon<double>(gm, sched, x, t);
}

std::vector<double> point_epsilon(std::span<const double> x0, const NoiseSchedule& sched,
                                  std::span<const double> x, double t) {
  require_finite(x);
  if (x.size() != x0.size()) throw InputError("input dimension does not match data point");
  return detail::point_epsilon<double>(x0, sched, x, t);
}

double gm_log_density(const GaussianMixture& gm, const NoiseSchedule& sched,
                      std::span<const double> x, double t) {
  require_finite(x);
  const double a = alpha(sched, t);
  const double sg = sigma(sched, t);
  const double d = static_cast<double>(x.size());
  constexpr double two_pi = 6.283185307179586476925286766559;
  std::vector<double> logits;
  for (const auto& c : gm.components()) {
    const double v = a * a * c.variance + sg * sg;
    double sq = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double r = x[j] - a * c.mean[j];
      sq += r * r;
    }
    logits.push_back(std::log(c.weight) - 0.5 * d * std::log(two_pi * v) - sq / (2.0 * v));
  }
  return logsumexp(std::span<const double>(logits));
}

std::vector<double> GmDenoiser::epsilon(std::span<const double> x, double t) const {
  return gm_epsilon(gm_, sched_, x, t);
}

std::vector<ad::Var> GmDenoiser::epsilon(std::span<const ad::Var> x, const ad::Var& t) const {
  return detail::gm_epsilon<ad::Var>(gm_, sched_, x, t);
}

std::vector<double> PointDenoiser::epsilon(std::span<const double> x, double t) const {
  return point_epsilon(x0_, sched_, x, t);
}

std::vector<ad::Var> PointDenoiser::epsilon(std::span<const ad::Var> x, const ad::Var& t) const {
  return detail::point_epsilon<ad::Var>(x0_, sched_, x, t);
}

}  // namespace ld3
