#include "ld3/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ld3/error.hpp"
#include "ld3/optim.hpp"
#include "ld3/parallel.hpp"
#include "ld3/rng.hpp"

namespace ld3 {

void split_dataset(Dataset& data) {
  std::vector<std::size_t> perm(data.pairs.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(derive_seed(data.seed, "split"));
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  data.train.clear();
  data.val.clear();
  for (std::size_t k = 0; k < perm.size(); ++k) (k % 2 == 0 ? data.train : data.val).push_back(perm[k]);
  std::sort(data.train.begin(), data.train.end());
  std::sort(data.val.begin(), data.val.end());
}

Dataset generate_dataset(const Denoiser& den, const NoiseSchedule& sched,
                         const TeacherSpec& teacher, std::size_t count, std::uint64_t seed,
                         int jobs) {
  if (count < 2) throw InputError("dataset needs at least two samples");
  Dataset data;
  data.d = den.dim();
  data.seed = seed;
  data.schedule_hash = sched.hash();
  const auto priors = sample_prior(sched, derive_seed(seed, "prior"), count, data.d);
  data.pairs.resize(count);
  parallel_for(count, jobs, [&](std::size_t i) {
    try {
      data.pairs[i] = TrainPair{priors[i], priors[i], teacher_solve(den, sched, teacher, priors[i])};
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string("teacher failed on sample ") + std::to_string(i) + ": " +
                                e.what(),
                            e.step());
    }
  });
  split_dataset(data);
  return data;
}

BallRadius radius(double gamma, std::size_t d, std::size_t nfe, const NoiseSchedule& sched) {
  if (d == 0 || nfe == 0) throw InputError("radius needs d >= 1 and nfe >= 1");
  if (gamma < 0.0) throw InputError("gamma must be non-negative");
  const double n = static_cast<double>(nfe);
  const double r = gamma * static_cast<double>(d) / (n * n);
  return {r, r * sched.sigma_max()};
}

std::vector<double> project(std::span<const double> x_prime, std::span<const double> center,
                            double rho) {
  if (x_prime.size() != center.size()) throw InputError("project: dimension mismatch");
  std::vector<double> diff(x_prime.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = x_prime[j] - center[j];
  const double n = norm(std::span<const double>(diff));
  if (n <= rho) return {x_prime.begin(), x_prime.end()};
  std::vector<double> out(center.begin(), center.end());
  if (n == 0.0) return out;
  const double scale = rho / n;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += scale * diff[j];
  return out;
}

double distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double r = a[j] - b[j];
    s += r * r;
  }
  return s / static_cast<double>(a.size());
}

double soft_loss(const Discretization& disc, const TrainPair& pair, const Denoiser& den,
                 const NoiseSchedule& sched, const SolverSpec& spec) {
  const auto times = disc.times();
  const auto times_c = disc.times_c();
  return distance(solve(den, sched, spec, times, times_c, pair.x_prime), pair.y);
}

ad::Var soft_loss(std::span<const ad::Var> xi, std::span<const ad::Var> xi_c,
                  std::span<const ad::Var> x_prime, std::span<const double> y, const Denoiser& den,
                  const NoiseSchedule& sched, const SolverSpec& spec) {
  const auto times = tau<ad::Var>(xi, sched.t_min, sched.T);
  const auto times_c = tau_c<ad::Var>(times, xi_c, sched.t_min, sched.T);
  const auto out = solve(den, sched, spec, times, times_c, x_prime);
  ad::Var s = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) s += square(out[j] - y[j]);
  return s / static_cast<double>(out.size());
}

double hard_loss(const Discretization& disc, const Dataset& data, std::span<const std::size_t> idx,
                 const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec) {
  if (idx.empty()) throw InputError("hard_loss needs at least one pair");
  const auto times = disc.times();
  const auto times_c = disc.times_c();
  double s = 0.0;
  for (auto i : idx) {
    const auto& p = data.pairs[i];
    s += distance(solve(den, sched, spec, times, times_c, p.x_T), p.y);
  }
  return s / static_cast<double>(idx.size());
}

void tau_vjp(const Discretization& disc, std::span<const double> d_times,
             std::span<const double> d_times_c, std::span<double> d_xi, std::span<double> d_xi_c) {
  ad::Tape tape;
  const auto xi = tape.variables(disc.xi);
  const auto xi_c = tape.variables(disc.xi_c);
  const auto times = tau<ad::Var>(xi, disc.t_min, disc.T);
  const auto times_c = tau_c<ad::Var>(times, xi_c, disc.t_min, disc.T);
  std::vector<ad::Var> outputs(times.begin(), times.end());
  outputs.insert(outputs.end(), times_c.begin(), times_c.end());
  std::vector<double> seeds(d_times.begin(), d_times.end());
  seeds.insert(seeds.end(), d_times_c.begin(), d_times_c.end());
  tape.backward(outputs, seeds);
  for (std::size_t i = 0; i < xi.size(); ++i) {
    d_xi[i] = tape.adjoint(xi[i]);
    d_xi_c[i] = tape.adjoint(xi_c[i]);
  }
}

SoftLossGradient soft_loss_gradient(const Discretization& disc, const TrainPair& pair,
                                    const Denoiser& den, const NoiseSchedule& sched,
                                    const SolverSpec& spec) {
  const auto times = disc.times();
  const auto times_c = disc.times_c();
  auto g = checkpointed_solve_grad(den, sched, spec, times, times_c, pair.x_prime,
                                   squared_l2_loss(pair.y));
  SoftLossGradient out;
  out.loss = g.loss;
  out.d_xi.assign(disc.xi.size(), 0.0);
  out.d_xi_c.assign(disc.xi_c.size(), 0.0);
  tau_vjp(disc, g.d_times, g.d_times_c, out.d_xi, out.d_xi_c);
  out.d_x_prime = std::move(g.d_x);
  out.stats = g.stats;
  return out;
}

InitSelection select_init(std::span<const Heuristic> candidates, const Dataset& data,
                          std::span<const std::size_t> val, const Denoiser& den,
                          const NoiseSchedule& sched, const SolverSpec& spec,
                          double distance_scale) {
  if (candidates.empty()) throw ConfigError("select_init needs at least one candidate");
  if (val.empty()) throw InputError("select_init needs a non-empty validation set");
  InitSelection out;
  std::size_t best = 0;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto times = heuristic_times(candidates[c], spec.nfe, sched);
    double s = 0.0;
    for (auto i : val) {
      const auto& p = data.pairs[i];
      s += distance_scale * distance(solve(den, sched, spec, times, times, p.x_T), p.y);
    }
    out.losses.push_back(s / static_cast<double>(val.size()));
    if (out.losses[c] < out.losses[best]) best = c;
  }
  out.chosen = candidates[best];
  out.xi = init_from_times(heuristic_times(out.chosen, spec.nfe, sched), sched);
  return out;
}

void TrainConfig::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be >= 0");
  };
  non_negative(gamma, "train.gamma");
  if (r) non_negative(*r, "train.r");
  non_negative(lr_xi, "train.lr_xi");
  if (lr_xic) non_negative(*lr_xic, "train.lr_xic");
  if (lr_xprime) non_negative(*lr_xprime, "train.lr_xprime");
  if (batch == 0) throw ConfigError("train.batch must be >= 1");
  if (patience == 0) throw ConfigError("train.patience must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("train.clip must be > 0");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("train.decay must be in (0, 1]");
  if (init_candidates.empty()) throw ConfigError("train.init needs at least one heuristic");
}

namespace {

double ball_excess(const TrainPair& p, double rho) {
  std::vector<double> diff(p.x_T.size());
  for (std::size_t j = 0; j < diff.size(); ++j) diff[j] = p.x_prime[j] - p.x_T[j];
  return norm(std::span<const double>(diff)) - rho;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// K projected-SGD steps on x_prime of one pair with the grid frozen.
void refresh_x_prime(TrainPair& pair, const Discretization& disc, const Denoiser& den,
                     const NoiseSchedule& sched, const SolverSpec& spec, std::size_t steps,
                     double lr, double rho) {
  const auto times = disc.times();
  const auto times_c = disc.times_c();
  const auto loss = squared_l2_loss(pair.y);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto g = checkpointed_solve_grad(den, sched, spec, times, times_c, pair.x_prime, loss);
    if (!std::isfinite(g.loss) || !all_finite(g.d_x)) return;
    sgd_step(pair.x_prime, g.d_x, lr);
    pair.x_prime = project(pair.x_prime, pair.x_T, rho);
  }
}

double mean_soft_loss(const Discretization& disc, const Dataset& data,
                      std::span<const std::size_t> idx, const Denoiser& den,
                      const NoiseSchedule& sched, const SolverSpec& spec, int jobs) {
  std::vector<double> losses(idx.size());
  parallel_for(idx.size(), jobs, [&](std::size_t k) {
    losses[k] = soft_loss(disc, data.pairs[idx[k]], den, sched, spec);
  });
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(idx.size());
}

}  // namespace

TrainReport train(const TrainConfig& config, Dataset& data, const Denoiser& den,
                  const NoiseSchedule& sched, const SolverSpec& spec,
                  std::optional<Discretization> init, const IterationObserver& observer,
                  int jobs) {
  config.validate();
  spec.validate();
  if (data.train.empty() || data.val.empty()) {
    throw ConfigError("training needs non-empty train and validation splits");
  }
  const std::size_t n = spec.nfe;

  TrainReport report;
  report.ball = config.r ? BallRadius{*config.r, *config.r * sched.sigma_max()}
                         : radius(config.gamma, data.d, n, sched);
  const double rho = report.ball.rho;

  Discretization disc;
  if (init) {
    disc = std::move(*init);
    if (disc.xi.size() != n + 1 || disc.xi_c.size() != n + 1) {
      throw ConfigError("initial discretization does not match solver nfe");
    }
    report.init.chosen = Heuristic::LogSnr;
    report.init.xi = disc.xi;
  } else {
    report.init = select_init(config.init_candidates, data, data.val, den, sched, spec);
    disc = Discretization::from_xi(report.init.xi, sched);
  }
  disc.t_min = sched.t_min;
  disc.T = sched.T;

  double lr_xi = config.lr_xi;
  double lr_xic = config.resolved_lr_xic(n);
  const double lr_xprime = config.resolved_lr_xprime(n);
  RmsProp rms(n + 1, config.rms_decay, config.rms_momentum, config.rms_eps);
  PlateauDecay plateau_xi(config.decay_factor, config.patience, config.lr_xi_min);
  PlateauDecay plateau_xic(config.decay_factor, config.patience, config.lr_xic_min);

  auto start = std::chrono::steady_clock::now();
  const double init_val = mean_soft_loss(disc, data, data.val, den, sched, spec, jobs);
  report.epochs.push_back({0, 1, init_val, lr_xi, lr_xic, 0.0});
  report.best = disc;
  report.best_val_loss = init_val;
  report.best_epoch = 0;
  plateau_xi.step(init_val, lr_xi);
  plateau_xic.step(init_val, lr_xic);

  const std::size_t epochs = config.epochs_phase1 + config.epochs_phase2;
  const std::uint64_t shuffle_seed = derive_seed(config.seed, "epoch-order");
  std::size_t iter = 0;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    const int phase = epoch <= config.epochs_phase1 ? 1 : 2;
    start = std::chrono::steady_clock::now();
    std::vector<std::size_t> order = data.train;
    Rng order_rng(shuffle_seed, epoch);
    std::shuffle(order.begin(), order.end(), order_rng.engine());

    for (std::size_t b0 = 0; b0 < order.size(); b0 += config.batch) {
      const std::size_t b1 = std::min(order.size(), b0 + config.batch);
      const double inv_b = 1.0 / static_cast<double>(b1 - b0);
      std::vector<SoftLossGradient> grads(b1 - b0);
      parallel_for(b1 - b0, jobs, [&](std::size_t k) {
        grads[k] = soft_loss_gradient(disc, data.pairs[order[b0 + k]], den, sched, spec);
      });

      double loss = 0.0;
      std::vector<double> g_xi(n + 1, 0.0);
      std::vector<double> g_xic(n + 1, 0.0);
      for (const auto& g : grads) {
        loss += g.loss * inv_b;
        for (std::size_t i = 0; i <= n; ++i) {
          g_xi[i] += g.d_xi[i] * inv_b;
          g_xic[i] += g.d_xi_c[i] * inv_b;
        }
      }
      if (!std::isfinite(loss) || !all_finite(g_xi) || !all_finite(g_xic)) {
        report.diverged = true;
        report.error = "non-finite training loss at iteration " + std::to_string(iter);
        report.last = disc;
        return report;
      }
      clip_grad_norm(g_xi, config.clip_norm);
      clip_grad_norm(g_xic, config.clip_norm);
      rms.step(disc.xi, g_xi, lr_xi);
      if (phase == 2) sgd_step(disc.xi_c, g_xic, lr_xic);

      double excess = -rho;
      for (std::size_t k = 0; k < grads.size(); ++k) {
        auto& pair = data.pairs[order[b0 + k]];
        std::vector<double> gx(grads[k].d_x_prime);
        for (auto& v : gx) v *= inv_b;
        sgd_step(pair.x_prime, gx, lr_xprime);
        pair.x_prime = project(pair.x_prime, pair.x_T, rho);
        excess = std::max(excess, ball_excess(pair, rho));
      }

      IterationRecord rec{iter, epoch, phase, loss, lr_xi, lr_xic, excess};
      report.iterations.push_back(rec);
      if (observer) observer(rec, disc, data);
      ++iter;
    }

    parallel_for(data.val.size(), jobs, [&](std::size_t k) {
      refresh_x_prime(data.pairs[data.val[k]], disc, den, sched, spec, config.val_refresh_steps,
                      lr_xprime, rho);
    });
    const double val = mean_soft_loss(disc, data, data.val, den, sched, spec, jobs);
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(val)) {
      report.diverged = true;
      report.error = "non-finite validation loss at epoch " + std::to_string(epoch);
      report.last = disc;
      return report;
    }
    report.epochs.push_back({epoch, phase, val, lr_xi, lr_xic, wall});
    if (val < report.best_val_loss) {
      report.best_val_loss = val;
      report.best = disc;
      report.best_epoch = epoch;
    }
    lr_xi = plateau_xi.step(val, lr_xi);
    lr_xic = plateau_xic.step(val, lr_xic);
  }
  report.last = disc;
  return report;
}

}  // namespace ld3
