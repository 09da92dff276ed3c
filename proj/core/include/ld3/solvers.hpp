#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ld3/ad.hpp"
#include "ld3/denoiser.hpp"
#include "ld3/discretize.hpp"
#include "ld3/error.hpp"
#include "ld3/schedule.hpp"

namespace ld3 {

enum class SolverFamily { Euler, Dpmpp, Ipndm };

std::string_view to_string(SolverFamily family);
SolverFamily parse_solver_family(std::string_view name);

struct SolverSpec {
  SolverFamily family = SolverFamily::Dpmpp;
  int order = 2;
  std::size_t nfe = 4;

  /// Throws ConfigError when the order is outside the family's range
  /// (Euler 1, DPM-Solver++ 1-2, iPNDM 1-4) or nfe is zero.
  void validate() const;
  std::string label() const;
  /// Number of past denoiser outputs a step carries forward.
  std::size_t history_size() const;
};

struct TeacherSpec {
  SolverSpec solver{SolverFamily::Dpmpp, 2, 100};
  Heuristic grid = Heuristic::LogSnr;
};

/// State carried between steps: the sample and, for multistep rules, the
/// most recent denoiser-derived vectors (newest first). DPM-Solver++(2M)
/// keeps the previous data prediction; iPNDM keeps previous eps values.
template <class S>
struct SolverState {
  std::vector<S> x;
  std::vector<std::vector<S>> history;
};

/// Times touched by step i: t_{i-1} (multistep only), t_i, t_{i+1}, t_i^c.
template <class S>
struct StepTimes {
  S t_prev;
  S t;
  S t_next;
  S t_c;
  bool has_prev = false;
};

inline constexpr double kIpndmCoefficients[4][4] = {
    {1.0, 0.0, 0.0, 0.0},
    {3.0 / 2.0, -1.0 / 2.0, 0.0, 0.0},
    {23.0 / 12.0, -16.0 / 12.0, 5.0 / 12.0, 0.0},
    {55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0},
};

/// One solver step from t_i to t_{i+1}. The denoiser is evaluated once, at
/// (x_i, t_i^c); step coefficients use t_i and t_{i+1}.
template <class S>
SolverState<S> solver_step(const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec,
                           const StepTimes<S>& times, const SolverState<S>& state) {
  using std::exp;
  using std::expm1;
  const std::size_t d = state.x.size();
  const std::vector<S> eps = den.epsilon(std::span<const S>(state.x), times.t_c);
  if (eps.size() != d) throw InputError("denoiser output dimension mismatch");

  SolverState<S> next;
  next.x.resize(d);
  switch (spec.family) {
    case SolverFamily::Euler: {
      const S dt = times.t_next - times.t;
      const S f = drift_f(sched, times.t);
      const S coef = drift_g2(sched, times.t) / (2.0 * sigma(sched, times.t));
      for (std::size_t j = 0; j < d; ++j) next.x[j] = state.x[j] + dt * (f * state.x[j] + coef * eps[j]);
      break;
    }
    case SolverFamily::Dpmpp: {
      const S a_i = alpha(sched, times.t);
      const S s_i = sigma(sched, times.t);
      const S a_n = alpha(sched, times.t_next);
      const S s_n = sigma(sched, times.t_next);
      const S lam_i = lambda(sched, times.t);
      const S h = lambda(sched, times.t_next) - lam_i;
      std::vector<S> x0_pred(d);
      for (std::size_t j = 0; j < d; ++j) x0_pred[j] = (state.x[j] - s_i * eps[j]) / a_i;

      const S ratio = s_n / s_i;
      const S phi = a_n * expm1(-h);
      if (spec.order >= 2 && times.has_prev && !state.history.empty()) {
        const S h_prev = lam_i - lambda(sched, times.t_prev);
        const S r = h_prev / h;
        const S c_prev = 1.0 / (2.0 * r);
        const auto& x0_prev = state.history.front();
        for (std::size_t j = 0; j < d; ++j) {
          const S dj = (1.0 + c_prev) * x0_pred[j] - c_prev * x0_prev[j];
          next.x[j] = ratio * state.x[j] - phi * dj;
        }
      } else {
        for (std::size_t j = 0; j < d; ++j) next.x[j] = ratio * state.x[j] - phi * x0_pred[j];
      }
      if (spec.order >= 2) next.history.push_back(std::move(x0_pred));
      break;
    }
    case SolverFamily::Ipndm: {
      const S a_i = alpha(sched, times.t);
      const S a_n = alpha(sched, times.t_next);
      const S s_n = sigma(sched, times.t_next);
      const S h = lambda(sched, times.t_next) - lambda(sched, times.t);
      const std::size_t eff = std::min<std::size_t>(static_cast<std::size_t>(spec.order),
                                                    state.history.size() + 1);
      const auto& c = kIpndmCoefficients[eff - 1];
      const S ratio = a_n / a_i;
      const S phi = s_n * expm1(h);
      for (std::size_t j = 0; j < d; ++j) {
        S e = c[0] * eps[j];
        for (std::size_t k = 1; k < eff; ++k) e += c[k] * state.history[k - 1][j];
        next.x[j] = ratio * state.x[j] - phi * e;
      }
      const std::size_t keep = spec.history_size();
      if (keep > 0) {
        next.history.push_back(eps);
        for (std::size_t k = 0; k < state.history.size() && next.history.size() < keep; ++k) {
          next.history.push_back(state.history[k]);
        }
      }
      break;
    }
  }
  return next;
}

template <class S>
StepTimes<S> step_times(std::span<const S> times, std::span<const S> times_c, std::size_t i) {
  StepTimes<S> st;
  st.t = times[i];
  st.t_next = times[i + 1];
  st.t_c = times_c[i];
  if (i > 0) {
    st.t_prev = times[i - 1];
    st.has_prev = true;
  }
  return st;
}

/// Throws DivergenceError if any entry of x is non-finite.
void check_state(std::span<const double> x, std::size_t step);
inline void check_state(std::span<const ad::Var> x, std::size_t step) {
  for (const auto& v : x) {
    if (!std::isfinite(v.value())) throw DivergenceError("non-finite solver state", step);
  }
}

/// Throws GridError/InputError for malformed solve arguments.
void validate_solve_args(const NoiseSchedule& sched, const SolverSpec& spec,
                         std::span<const double> times, std::span<const double> times_c,
                         std::size_t d_in, std::size_t d_den);

/// Runs the N = spec.nfe steps of the solver from x_T along `times`,
/// evaluating the denoiser at times_c. Generic over double and ad::Var.
template <class S>
std::vector<S> solve_generic(const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec,
                             std::span<const S> times, std::span<const S> times_c,
                             std::span<const S> x_T) {
  SolverState<S> state;
  state.x.assign(x_T.begin(), x_T.end());
  for (std::size_t i = 0; i < spec.nfe; ++i) {
    state = solver_step(den, sched, spec, step_times(times, times_c, i), state);
    check_state(std::span<const S>(state.x), i);
  }
  return std::move(state.x);
}

std::vector<double> solve(const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec,
                          std::span<const double> times, std::span<const double> times_c,
                          std::span<const double> x_T);

/// Same as solve, recorded on the tape of the inputs.
std::vector<ad::Var> solve(const Denoiser& den, const NoiseSchedule& sched, const SolverSpec& spec,
                           std::span<const ad::Var> times, std::span<const ad::Var> times_c,
                           std::span<const ad::Var> x_T);

/// Forward pass that keeps every step-boundary state (x_i plus history).
std::vector<SolverState<double>> solve_states(const Denoiser& den, const NoiseSchedule& sched,
                                              const SolverSpec& spec,
                                              std::span<const double> times,
                                              std::span<const double> times_c,
                                              std::span<const double> x_T);

/// High-NFE reference solve on the teacher's heuristic grid with t^c = t.
std::vector<double> teacher_solve(const Denoiser& den, const NoiseSchedule& sched,
                                  const TeacherSpec& teacher, std::span<const double> x_T);

}  // namespace ld3
