#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ld3/denoiser.hpp"
#include "ld3/discretize.hpp"
#include "ld3/solvers.hpp"
#include "ld3/trainer.hpp"

namespace ld3 {

using Samples = std::vector<std::vector<double>>;

/// sqrt(sum_i |a_i - b_i|^2 / (n d)).
double rmsd(const Samples& a, const Samples& b);

/// Exact 1-Wasserstein distance between equal-size empirical measures on R.
double w1_1d(std::span<const double> a, std::span<const double> b);

/// w1_1d per coordinate, averaged over coordinates.
double w1(const Samples& a, const Samples& b);

/// log|det J| by LU with partial pivoting; J is row-major n x n.
/// Throws SingularityError when |det| < 1e-300.
double log_abs_det(std::vector<double> jacobian, std::size_t n);

/// Map recorded on a tape: receives leaves, returns outputs of the same size.
using RecordedMap = std::function<std::vector<ad::Var>(std::span<const ad::Var>)>;

/// Dense Jacobian of `map` at x by one reverse sweep per output coordinate.
std::vector<double> jacobian(const RecordedMap& map, std::span<const double> x);

/// log|det d map / dx| at x. Requires x.size() <= 4.
double log_abs_det_jacobian(const RecordedMap& map, std::span<const double> x);

/// A solver together with its grids.
struct SolverMap {
  SolverSpec spec;
  std::vector<double> times;
  std::vector<double> times_c;

  static SolverMap teacher(const TeacherSpec& teacher, const NoiseSchedule& sched);
  static SolverMap heuristic(const SolverSpec& spec, Heuristic kind, const NoiseSchedule& sched);
  /// ld3 grid; xi_c is used only when use_xi_c is set.
  static SolverMap learned(const SolverSpec& spec, const Discretization& disc, bool use_xi_c = true);

  std::vector<double> operator()(const Denoiser& den, const NoiseSchedule& sched,
                                 std::span<const double> x) const;
  Samples run(const Denoiser& den, const NoiseSchedule& sched, const Samples& xs,
              int jobs = 1) const;
  RecordedMap recorded(const Denoiser& den, const NoiseSchedule& sched) const;
};

struct BoundReport {
  double r = 0.0;
  std::size_t d = 0;
  double term1 = 0.0;  // r^2 / 2
  double term2 = 0.0;  // r sqrt(d + 1)
  double term3 = 0.0;  // mean |log|det J_student(a)| - log|det J_teacher(b)||
  std::size_t samples = 0;
};

/// Closed-form first two terms of the bound for radius r in dimension d.
BoundReport bound_terms(double r, std::size_t d);

/// term3 estimate: b ~ N(0, sigma_T^2 I), a uniform in B(b, r sigma_T).
BoundReport estimate_bound(const Denoiser& den, const NoiseSchedule& sched,
                           const SolverMap& teacher, const SolverMap& student, double r,
                           std::size_t n_samples, std::uint64_t seed, int jobs = 1);

struct SweepRow {
  double r;
  double best_val_loss;
  double val_hard_loss;  // hard loss of the best grid on the validation split
};

/// Trains once per r with shared seed, dataset and initialization.
std::vector<SweepRow> sweep_r(const TrainConfig& base, const Dataset& data, const Denoiser& den,
                              const NoiseSchedule& sched, const SolverSpec& spec,
                              std::span<const double> r_values, int jobs = 1);

struct TrainedGrid {
  SolverSpec spec;
  Discretization disc;
};

/// matrix[i][j]: mean validation teacher distance of grid i run with solver j.
/// xi_c is applied only on the diagonal.
std::vector<std::vector<double>> cross_eval(std::span<const TrainedGrid> grids,
                                            std::span<const SolverSpec> solvers,
                                            const Dataset& data, const Denoiser& den,
                                            const NoiseSchedule& sched, int jobs = 1);

struct BenchRow {
  std::string method;
  std::string solver;
  std::size_t nfe;
  double teacher_dist;
  double rmsd;
  double w1;
  std::uint64_t seed;
};

struct BenchSetup {
  std::vector<SolverSpec> solvers;  // nfe is overridden per cell
  std::vector<std::size_t> nfe_list{4, 6, 8};
  std::vector<Heuristic> heuristics{Heuristic::Uniform, Heuristic::Quadratic, Heuristic::Edm,
                                    Heuristic::LogSnr};
  bool include_ld3 = true;
  TeacherSpec teacher;
  TrainConfig train;
  std::size_t train_count = 100;
  std::size_t eval_count = 200;
  std::size_t reference_nfe = 100;  // DDIM reference for RMSD
  std::uint64_t seed = 0;
};

/// Ground-truth sampler for the W1 column; may be empty.
using DataSampler = std::function<Samples(std::size_t count, std::uint64_t seed)>;

std::vector<BenchRow> bench(const BenchSetup& setup, const Denoiser& den,
                            const NoiseSchedule& sched, const DataSampler& data_sampler,
                            int jobs = 1);

inline constexpr const char* kBenchCsvHeader = "method,solver,nfe,teacher_dist,rmsd,w1,seed";

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows);

}  // namespace ld3
