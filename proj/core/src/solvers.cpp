#include "ld3/solvers.hpp"

namespace ld3 {

std::string_view to_string(SolverFamily family) {
  switch (family) {
    case SolverFamily::Euler:
      return "euler";
    case SolverFamily::Dpmpp:
      return "dpmpp";
    case SolverFamily::Ipndm:
      return "ipndm";
  }
  return "unknown";
}

SolverFamily parse_solver_family(std::string_view name) {
  if (name == "euler") return SolverFamily::Euler;
  if (name == "dpmpp") return SolverFamily::Dpmpp;
  if (name == "ipndm") return SolverFamily::Ipndm;
  throw ConfigError("unknown solver family '" + std::string(name) + "'");
}

void SolverSpec::validate() const {
  if (nfe == 0) throw ConfigError("solver nfe must be at least 1");
  int max_order = 1;
  switch (family) {
    case SolverFamily::Euler:
      max_order = 1;
      break;
    case SolverFamily::Dpmpp:
      max_order = 2;
      break;
    case SolverFamily::Ipndm:
      max_order = 4;
      break;
  }
  if (order < 1 || order > max_order) {
    throw ConfigError("order " + std::to_string(order) + " not supported by solver " +
                      std::string(to_string(family)));
  }
}

std::string SolverSpec::label() const {
  return std::string(to_string(family)) + std::to_string(order);
}

std::size_t SolverSpec::history_size() const {
  switch (family) {
    case SolverFamily::Euler:
      return 0;
    case SolverFamily::Dpmpp:
      return order >= 2 ? 1 : 0;
    case SolverFamily::Ipndm:
      return static_cast<std::size_t>(order - 1);
  }
  return 0;
}

void check_state(std::span<const double> x, std::size_t step) {
  for (double v : x) {
    if (!std::isfinite(v)) throw DivergenceError("non-finite solver state", step);
  }
}

void validate_solve_args(const NoiseSchedule& sched, const SolverSpec& spec,
                         std::span<const double> times, std::span<const double> times_c,
                         std::size_t d_in, std::size_t d_den) {
  spec.validate();
  if (times.size() != spec.nfe + 1) {
    throw GridError("time grid has " + std::to_string(times.size()) + " points, expected nfe + 1 = " +
                    std::to_string(spec.nfe + 1));
  }
  validate_grid(times, sched);
  if (times_c.size() != times.size()) throw GridError("times_c must match the time grid size");
  for (std::size_t i = 0; i < spec.nfe; ++i) check_time(sched, times_c[i]);
  if (d_in != d_den) throw InputError("x_T dimension does not match the denoiser");
}

std::vector<double> solve(const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec,
                          std::span<const double> times, std::span<const double> times_c,
                          std::span<const double> x_T) {
  validate_solve_args(sched, spec, times, times_c, x_T.size(), den.dim());
  check_state(x_T, 0);
  return solve_generic<double>(den, sched, spec, times, times_c, x_T);
}

std::vector<ad::Var> solve(const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec,
                           std::span<const ad::Var> times, std::span<const ad::Var> times_c,
                           std::span<const ad::Var> x_T) {
  validate_solve_args(sched, spec, ad::values(times), ad::values(times_c), x_T.size(), den.dim());
  return solve_generic<ad::Var>(den, sched, spec, times, times_c, x_T);
}

std::vector<SolverState<double>> solve_states(const Denoiser& den, const NoiseSchedule& sched,
                                              const SolverSpec& spec,
                                              std::span<const double> times,
                                              std::span<const double> times_c,
                                              std::span<const double> x_T) {
  validate_solve_args(sched, spec, times, times_c, x_T.size(), den.dim());
  check_state(x_T, 0);
  std::vector<SolverState<double>> states;
  states.reserve(spec.nfe + 1);
  states.push_back(SolverState<double>{{x_T.begin(), x_T.end()}, {}});
  for (std::size_t i = 0; i < spec.nfe; ++i) {
    states.push_back(solver_step(den, sched, spec, step_times(times, times_c, i), states.back()));
    check_state(states.back().x, i);
  }
  return states;
}

std::vector<double> teacher_solve(const Denoiser& den, const NoiseSchedule& sched,
                                  const TeacherSpec& teacher, std::span<const double> x_T) {
  const auto times = heuristic_times(teacher.grid, teacher.solver.nfe, sched);
  return solve(den, sched, teacher.solver, times, times, x_T);
}

}  // namespace ld3
