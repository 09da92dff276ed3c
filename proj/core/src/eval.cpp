#include "ld3/eval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "ld3/error.hpp"
#include "ld3/parallel.hpp"
#include "ld3/rng.hpp"

namespace ld3 {

namespace {

void require_same_shape(const Samples& a, const Samples& b) {
  if (a.size() != b.size()) throw InputError("sample sets differ in count");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size()) throw InputError("sample sets differ in dimension");
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double rmsd(const Samples& a, const Samples& b) {
  require_same_shape(a, b);
  if (a.empty()) throw InputError("rmsd of empty sample sets");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) {
      const double r = a[i][j] - b[i][j];
      s += r * r;
      ++n;
    }
  }
  return std::sqrt(s / static_cast<double>(n));
}

double w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InputError("w1 needs equal sample counts");
  if (a.empty()) return 0.0;
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
  return s / static_cast<double>(sa.size());
}

double w1(const Samples& a, const Samples& b) {
  require_same_shape(a, b);
  if (a.empty()) return 0.0;
  const std::size_t d = a.front().size();
  double s = 0.0;
  std::vector<double> ca(a.size());
  std::vector<double> cb(b.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      ca[i] = a[i][j];
      cb[i] = b[i][j];
    }
    s += w1_1d(ca, cb);
  }
  return s / static_cast<double>(d);
}

double log_abs_det(std::vector<double> m, std::size_t n) {
  if (m.size() != n * n) throw InputError("log_abs_det: matrix is not n x n");
  double log_det = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t r = k + 1; r < n; ++r) {
      if (std::abs(m[r * n + k]) > std::abs(m[pivot * n + k])) pivot = r;
    }
    const double p = m[pivot * n + k];
    if (p == 0.0) throw SingularityError("singular Jacobian");
    if (pivot != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(m[k * n + c], m[pivot * n + c]);
    }
    log_det += std::log(std::abs(p));
    for (std::size_t r = k + 1; r < n; ++r) {
      const double f = m[r * n + k] / p;
      for (std::size_t c = k; c < n; ++c) m[r * n + c] -= f * m[k * n + c];
    }
  }
  if (log_det < std::log(1e-300)) throw SingularityError("Jacobian determinant below 1e-300");
  return log_det;
}

std::vector<double> jacobian(const RecordedMap& map, std::span<const double> x) {
  ad::Tape tape;
  const auto leaves = tape.variables(x);
  const auto y = map(leaves);
  const std::size_t n = x.size();
  if (y.size() != n) throw InputError("jacobian: map must be square");
  std::vector<double> jac(n * n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    if (y[k].is_constant()) continue;
    tape.backward(y[k]);
    for (std::size_t c = 0; c < n; ++c) jac[k * n + c] = tape.adjoint(leaves[c]);
  }
  return jac;
}

double log_abs_det_jacobian(const RecordedMap& map, std::span<const double> x) {
  if (x.size() > 4) throw InputError("dense Jacobians are limited to d <= 4");
  return log_abs_det(jacobian(map, x), x.size());
}

SolverMap SolverMap::teacher(const TeacherSpec& teacher, const NoiseSchedule& sched) {
  auto times = heuristic_times(teacher.grid, teacher.solver.nfe, sched);
  return SolverMap{teacher.solver, times, times};
}

SolverMap SolverMap::heuristic(const SolverSpec& spec, Heuristic kind, const NoiseSchedule& sched) {
  auto times = heuristic_times(kind, spec.nfe, sched);
  return SolverMap{spec, times, times};
}

SolverMap SolverMap::learned(const SolverSpec& spec, const Discretization& disc, bool use_xi_c) {
  auto times = disc.times();
  auto times_c = use_xi_c ? disc.times_c() : times;
  return SolverMap{spec, std::move(times), std::move(times_c)};
}

std::vector<double> SolverMap::operator()(const Denoiser& den, const NoiseSchedule& sched,
                                          std::span<const double> x) const {
  return solve(den, sched, spec, times, times_c, x);
}

Samples SolverMap::run(const Denoiser& den, const NoiseSchedule& sched, const Samples& xs,
                       int jobs) const {
  Samples out(xs.size());
  parallel_for(xs.size(), jobs, [&](std::size_t i) { out[i] = (*this)(den, sched, xs[i]); });
  return out;
}

RecordedMap SolverMap::recorded(const Denoiser& den, const NoiseSchedule& sched) const {
  return [this, &den, &sched](std::span<const ad::Var> x) {
    const auto t = ad::constants(times);
    const auto tc = ad::constants(times_c);
    return solve(den, sched, spec, t, tc, x);
  };
}

BoundReport bound_terms(double r, std::size_t d) {
  BoundReport rep;
  rep.r = r;
  rep.d = d;
  rep.term1 = 0.5 * r * r;
  rep.term2 = r * std::sqrt(static_cast<double>(d) + 1.0);
  return rep;
}

BoundReport estimate_bound(const Denoiser& den, const NoiseSchedule& sched,
                           const SolverMap& teacher, const SolverMap& student, double r,
                           std::size_t n_samples, std::uint64_t seed, int jobs) {
  if (n_samples == 0) throw InputError("estimate_bound needs at least one sample");
  if (r < 0.0) throw InputError("radius must be non-negative");
  const std::size_t d = den.dim();
  if (d > 4) throw InputError("estimate_bound is limited to d <= 4");
  BoundReport rep = bound_terms(r, d);
  rep.samples = n_samples;
  const double sigma_T = sched.sigma_max();
  const auto teacher_map = teacher.recorded(den, sched);
  const auto student_map = student.recorded(den, sched);
  std::vector<double> gaps(n_samples);
  parallel_for(n_samples, jobs, [&](std::size_t s) {
    Rng rng(seed, s);
    const auto b = rng.normal_vector(d, sigma_T);
    auto dir = rng.normal_vector(d);
    const double dn = norm(std::span<const double>(dir));
    const double rad = r * sigma_T * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    std::vector<double> a(b);
    if (dn > 0.0) {
      for (std::size_t j = 0; j < d; ++j) a[j] += rad * dir[j] / dn;
    }
    const double lt = log_abs_det_jacobian(teacher_map, b);
    const double ls = log_abs_det_jacobian(student_map, a);
    gaps[s] = std::abs(ls - lt);
  });
  double sum = 0.0;
  for (double g : gaps) sum += g;
  rep.term3 = sum / static_cast<double>(n_samples);
  return rep;
}

std::vector<SweepRow> sweep_r(const TrainConfig& base, const Dataset& data, const Denoiser& den,
                              const NoiseSchedule& sched, const SolverSpec& spec,
                              std::span<const double> r_values, int jobs) {
  for (std::size_t i = 0; i < r_values.size(); ++i) {
    if (r_values[i] < 0.0) throw InputError("sweep radii must be non-negative");
    if (i > 0 && r_values[i] < r_values[i - 1]) throw InputError("sweep radii must be ascending");
  }
  const auto init = select_init(base.init_candidates, data, data.val, den, sched, spec);
  std::vector<SweepRow> rows;
  rows.reserve(r_values.size());
  for (double r : r_values) {
    TrainConfig cfg = base;
    cfg.r = r;
    Dataset copy = data;
    for (auto& p : copy.pairs) p.x_prime = p.x_T;
    auto report = train(cfg, copy, den, sched, spec, Discretization::from_xi(init.xi, sched), {}, jobs);
    if (report.diverged) throw Error("sweep training diverged at r = " + format_double(r));
    rows.push_back({r, report.best_val_loss,
                    hard_loss(report.best, copy, copy.val, den, sched, spec)});
  }
  return rows;
}

std::vector<std::vector<double>> cross_eval(std::span<const TrainedGrid> grids,
                                            std::span<const SolverSpec> solvers,
                                            const Dataset& data, const Denoiser& den,
                                            const NoiseSchedule& sched, int jobs) {
  if (grids.size() != solvers.size()) throw InputError("one trained grid per solver is required");
  const std::size_t k = grids.size();
  std::vector<std::vector<double>> matrix(k, std::vector<double>(k, 0.0));
  parallel_for(k * k, jobs, [&](std::size_t cell) {
    const std::size_t i = cell / k;
    const std::size_t j = cell % k;
    SolverSpec spec = solvers[j];
    spec.nfe = grids[i].spec.nfe;
    const auto map = SolverMap::learned(spec, grids[i].disc, i == j);
    double s = 0.0;
    for (auto idx : data.val) {
      const auto& p = data.pairs[idx];
      s += distance(map(den, sched, p.x_T), p.y);
    }
    matrix[i][j] = s / static_cast<double>(data.val.size());
  });
  return matrix;
}

std::vector<BenchRow> bench(const BenchSetup& setup, const Denoiser& den,
                            const NoiseSchedule& sched, const DataSampler& data_sampler,
                            int jobs) {
  const std::size_t d = den.dim();
  const auto eval_noise = sample_prior(sched, derive_seed(setup.seed, "eval-noise"), setup.eval_count, d);
  const auto teacher_out = SolverMap::teacher(setup.teacher, sched).run(den, sched, eval_noise, jobs);
  const SolverSpec ddim{SolverFamily::Dpmpp, 1, setup.reference_nfe};
  const auto reference =
      SolverMap::heuristic(ddim, setup.teacher.grid, sched).run(den, sched, eval_noise, jobs);
  Samples truth;
  if (data_sampler) truth = data_sampler(setup.eval_count, derive_seed(setup.seed, "ground-truth"));

  std::optional<Dataset> dataset;
  if (setup.include_ld3) {
    dataset = generate_dataset(den, sched, setup.teacher, setup.train_count,
                               derive_seed(setup.seed, "train-data"), jobs);
  }

  std::vector<BenchRow> rows;
  auto add_row = [&](const std::string& method, const SolverSpec& spec, const Samples& out) {
    double td = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) td += distance(out[i], teacher_out[i]);
    td /= static_cast<double>(out.size());
    const double w = truth.empty() ? 0.0 : w1(out, truth);
    rows.push_back({method, spec.label(), spec.nfe, td, rmsd(out, reference), w, setup.seed});
  };

  for (const auto& base : setup.solvers) {
    for (auto nfe : setup.nfe_list) {
      SolverSpec spec = base;
      spec.nfe = nfe;
      spec.validate();
      for (auto h : setup.heuristics) {
        add_row(std::string(to_string(h)), spec,
                SolverMap::heuristic(spec, h, sched).run(den, sched, eval_noise, jobs));
      }
      if (setup.include_ld3) {
        Dataset data = *dataset;
        TrainConfig cfg = setup.train;
        cfg.seed = derive_seed(setup.seed, "train");
        auto report = train(cfg, data, den, sched, spec, std::nullopt, {}, jobs);
        if (report.diverged) throw Error("ld3 training diverged: " + report.error);
        add_row("ld3", spec, SolverMap::learned(spec, report.best).run(den, sched, eval_noise, jobs));
      }
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& os, std::span<const BenchRow> rows) {
  os << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.solver << ',' << r.nfe << ',' << format_double(r.teacher_dist) << ','
       << format_double(r.rmsd) << ',' << format_double(r.w1) << ',' << r.seed << '\n';
  }
}

}  // namespace ld3
