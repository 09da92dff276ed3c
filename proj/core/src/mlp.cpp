#include "ld3/mlp.hpp"

#include <cmath>

#include "ld3/error.hpp"
#include "ld3/rng.hpp"

namespace ld3 {

MlpDenoiser::MlpDenoiser(const NoiseSchedule& sched, std::size_t d, std::size_t width,
                         std::size_t hidden_layers, std::uint64_t seed)
    : sched_(sched), d_(d) {
  if (d == 0 || width == 0) throw InputError("mlp dimensions must be positive");
  shape_.push_back(feature_count());
  for (std::size_t i = 0; i < hidden_layers; ++i) shape_.push_back(width);
  shape_.push_back(d);
  build_offsets();
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < shape_.size(); ++l) {
    const std::size_t in = shape_[l];
    const std::size_t out = shape_[l + 1];
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    double* w = params_.data() + offsets_[l];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = scale * rng.normal();
  }
}

MlpDenoiser::MlpDenoiser(const NoiseSchedule& sched, std::size_t d, std::vector<MlpLayer> layers)
    : sched_(sched), d_(d) {
  if (layers.empty()) throw InputError("mlp needs at least one layer");
  if (layers.front().in != feature_count()) throw InputError("mlp input width mismatch");
  if (layers.back().out != d) throw InputError("mlp output width mismatch");
  shape_.push_back(layers.front().in);
  for (const auto& l : layers) {
    if (l.in != shape_.back()) throw InputError("mlp layer shapes do not chain");
    if (l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
      throw InputError("mlp layer parameter count mismatch");
    }
    shape_.push_back(l.out);
  }
  build_offsets();
  std::size_t pos = 0;
  for (const auto& l : layers) {
    for (double w : l.weight) params_[pos++] = w;
    for (double b : l.bias) params_[pos++] = b;
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw InputError("mlp parameters must be finite");
  }
}

void MlpDenoiser::build_offsets() {
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < shape_.size(); ++l) {
    offsets_.push_back(total);
    total += shape_[l] * shape_[l + 1] + shape_[l + 1];
  }
  params_.assign(total, 0.0);
}

std::vector<double> MlpDenoiser::epsilon(std::span<const double> x, double t) const {
  if (x.size() != d_) throw InputError("input dimension does not match network");
  return forward<double, double>(params_, x, t);
}

std::vector<ad::Var> MlpDenoiser::epsilon(std::span<const ad::Var> x, const ad::Var& t) const {
  if (x.size() != d_) throw InputError("input dimension does not match network");
  return forward<double, ad::Var>(params_, x, t);
}

std::vector<MlpLayer> MlpDenoiser::layers() const {
  std::vector<MlpLayer> out;
  for (std::size_t l = 0; l + 1 < shape_.size(); ++l) {
    MlpLayer layer;
    layer.in = shape_[l];
    layer.out = shape_[l + 1];
    const auto* w = params_.data() + offsets_[l];
    layer.weight.assign(w, w + layer.in * layer.out);
    layer.bias.assign(w + layer.in * layer.out, w + layer.in * layer.out + layer.out);
    out.push_back(std::move(layer));
  }
  return out;
}

void MlpDenoiser::set_parameters(std::span<const double> params) {
  if (params.size() != params_.size()) throw InputError("parameter count mismatch");
  params_.assign(params.begin(), params.end());
}

DsmResult train_mlp_dsm(const GaussianMixture& gm, const NoiseSchedule& sched,
                        const DsmConfig& config) {
  if (config.steps == 0 || config.batch == 0 || !(config.lr > 0.0)) {
    throw ConfigError("dsm training needs positive steps, batch and lr");
  }
  MlpDenoiser model(sched, gm.dim(), config.width, config.hidden_layers,
                    derive_seed(config.seed, "mlp-init"));
  std::vector<double> params(model.parameters().begin(), model.parameters().end());
  // Adam moments
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  const std::size_t d = gm.dim();
  const std::uint64_t data_seed = derive_seed(config.seed, "mlp-data");
  std::vector<double> trace;
  trace.reserve(config.steps);
  ad::Tape tape;
  for (std::size_t step = 0; step < config.steps; ++step) {
    tape.clear();
    const auto p = tape.variables(params);
    Rng rng(data_seed, step);
    ad::Var loss = 0.0;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const double t = sched.t_min + (sched.T - sched.t_min) * rng.uniform();
      const auto x0 = gm.sample(rng);
      const auto noise = rng.normal_vector(d);
      const double a = alpha(sched, t);
      const double sg = sigma(sched, t);
      std::vector<ad::Var> xt(d);
      for (std::size_t j = 0; j < d; ++j) xt[j] = a * x0[j] + sg * noise[j];
      const auto pred = model.forward<ad::Var, ad::Var>(p, xt, ad::Var(t));
      ad::Var err = 0.0;
      for (std::size_t j = 0; j < d; ++j) err += square(pred[j] - noise[j]);
      const double w = config.weight == DsmWeight::Uniform ? 1.0 : sg * sg;
      loss += (w / static_cast<double>(d)) * err;
    }
    loss = loss / static_cast<double>(config.batch);
    if (!std::isfinite(loss.value())) throw TrainingDivergedError("non-finite dsm loss", step);
    trace.push_back(loss.value());
    const auto grads = ad::gradient(loss, {p});
    const auto& g = grads[0];
    const double k = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(beta1, k);
    const double c2 = 1.0 - std::pow(beta2, k);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      params[i] -= config.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
  model.set_parameters(params);
  return DsmResult{std::move(model), std::move(trace)};
}

}  // namespace ld3
