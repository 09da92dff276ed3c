#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ld3/denoiser.hpp"
#include "ld3/discretize.hpp"
#include "ld3/remat.hpp"
#include "ld3/solvers.hpp"

namespace ld3 {

/// One teacher sample: the teacher input x_T, the trainable student input
/// x_prime (kept inside the ball around x_T) and the teacher output y.
struct TrainPair {
  std::vector<double> x_T;
  std::vector<double> x_prime;
  std::vector<double> y;
};

struct Dataset {
  std::size_t d = 0;
  std::uint64_t seed = 0;
  std::uint64_t schedule_hash = 0;
  std::vector<TrainPair> pairs;
  std::vector<std::size_t> train;  // indices into pairs
  std::vector<std::size_t> val;
};

/// Deterministic 50/50 split: a seeded shuffle of [0, count), even positions
/// go to train and odd positions to validation; each list is sorted.
void split_dataset(Dataset& data);

/// Draws x_T from the prior, runs the teacher and sets x_prime = x_T.
/// Throws InputError if count < 2; teacher failures carry the sample index.
Dataset generate_dataset(const Denoiser& den, const NoiseSchedule& sched,
                         const TeacherSpec& teacher, std::size_t count, std::uint64_t seed,
                         int jobs = 1);

struct BallRadius {
  double r;    // gamma * d / NFE^2
  double rho;  // r * sigma_T
};

BallRadius radius(double gamma, std::size_t d, std::size_t nfe, const NoiseSchedule& sched);

/// Projection onto the closed ball B(center, rho).
std::vector<double> project(std::span<const double> x_prime, std::span<const double> center,
                            double rho);

/// (1/d) |a - b|^2.
double distance(std::span<const double> a, std::span<const double> b);

double soft_loss(const Discretization& disc, const TrainPair& pair, const Denoiser& den,
                 const NoiseSchedule& sched, const SolverSpec& spec);

/// Soft loss recorded on the tape that holds xi, xi_c and x_prime.
ad::Var soft_loss(std::span<const ad::Var> xi, std::span<const ad::Var> xi_c,
                  std::span<const ad::Var> x_prime, std::span<const double> y, const Denoiser& den,
                  const NoiseSchedule& sched, const SolverSpec& spec);

/// Mean over the selected pairs of distance(student(x_T), y).
double hard_loss(const Discretization& disc, const Dataset& data, std::span<const std::size_t> idx,
                 const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec);

struct SoftLossGradient {
  double loss = 0.0;
  std::vector<double> d_xi;
  std::vector<double> d_xi_c;
  std::vector<double> d_x_prime;
  RematStats stats;
};

/// Gradient of the soft loss of one pair with respect to xi, xi_c and
/// x_prime, using rematerialized solver steps.
SoftLossGradient soft_loss_gradient(const Discretization& disc, const TrainPair& pair,
                                    const Denoiser& den, const NoiseSchedule& sched,
                                    const SolverSpec& spec);

/// Pulls gradients with respect to the time grids back to xi and xi_c.
void tau_vjp(const Discretization& disc, std::span<const double> d_times,
             std::span<const double> d_times_c, std::span<double> d_xi, std::span<double> d_xi_c);

struct InitSelection {
  Heuristic chosen = Heuristic::LogSnr;
  std::vector<double> xi;
  std::vector<double> losses;  // per candidate
};

/// Evaluates each candidate heuristic grid on the validation pairs (x' = x_T,
/// t^c = t) and returns the first minimizer. distance_scale multiplies the
/// distance; any positive value selects the same candidate.
InitSelection select_init(std::span<const Heuristic> candidates, const Dataset& data,
                          std::span<const std::size_t> val, const Denoiser& den,
                          const NoiseSchedule& sched, const SolverSpec& spec,
                          double distance_scale = 1.0);

struct TrainConfig {
  double gamma = 0.001;
  std::optional<double> r;  // overrides gamma * d / NFE^2 when set
  std::size_t epochs_phase1 = 2;
  std::size_t epochs_phase2 = 5;
  std::size_t batch = 2;
  double lr_xi = 0.005;
  std::optional<double> lr_xic;     // default 0.1 / NFE
  std::optional<double> lr_xprime;  // default 12 / NFE
  double rms_decay = 0.99;
  double rms_momentum = 0.9;
  double rms_eps = 1e-8;
  double clip_norm = 1.0;
  double decay_factor = 0.8;
  std::size_t patience = 5;
  double lr_xi_min = 5e-5;
  double lr_xic_min = 1e-6;
  std::size_t val_refresh_steps = 10;
  std::vector<Heuristic> init_candidates{Heuristic::Uniform, Heuristic::Quadratic, Heuristic::Edm,
                                         Heuristic::LogSnr};
  std::uint64_t seed = 0;

  /// Throws ConfigError on negative rates, zero batch or zero patience.
  void validate() const;
  double resolved_lr_xic(std::size_t nfe) const { return lr_xic.value_or(0.1 / nfe); }
  double resolved_lr_xprime(std::size_t nfe) const { return lr_xprime.value_or(12.0 / nfe); }
};

struct IterationRecord {
  std::size_t iter;
  std::size_t epoch;
  int phase;
  double train_loss;
  double lr_xi;
  double lr_xic;
  double max_ball_excess;  // max over batch of |x' - x_T| - rho after projection
};

struct EpochRecord {
  std::size_t epoch;  // 0 is the initialization
  int phase;
  double val_loss;
  double lr_xi;
  double lr_xic;
  double wall_s;
};

struct TrainReport {
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;
  Discretization best;
  double best_val_loss = 0.0;
  std::size_t best_epoch = 0;
  Discretization last;
  InitSelection init;
  BallRadius ball{0.0, 0.0};
  bool diverged = false;
  std::string error;
};

/// Hook called after every training iteration.
using IterationObserver =
    std::function<void(const IterationRecord&, const Discretization&, const Dataset&)>;

/// LD3 training: projected SGD on x_prime jointly with xi (RMSprop with
/// momentum) and xi_c (SGD, frozen during phase 1). x_prime updates are
/// written back into `data`. If `init` is empty the initial grid is chosen by
/// select_init on the validation pairs.
TrainReport train(const TrainConfig& config, Dataset& data, const Denoiser& den,
                  const NoiseSchedule& sched, const SolverSpec& spec,
                  std::optional<Discretization> init = std::nullopt,
                  const IterationObserver& observer = {}, int jobs = 1);

}  // namespace ld3
