#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include "ld3/ad.hpp"
#include "ld3/schedule.hpp"

namespace ld3 {

enum class Heuristic { Uniform, Quadratic, Edm, LogSnr };

std::string_view to_string(Heuristic kind);
Heuristic parse_heuristic(std::string_view name);

/// Trainable time grid: xi parameterizes the step times through a cumulative
/// softmax, xi_c adds decoupled offsets to the times fed to the denoiser.
struct Discretization {
  std::vector<double> xi;    // N + 1 entries
  std::vector<double> xi_c;  // N + 1 entries
  double t_min = 0.0;
  double T = 0.0;

  std::size_t steps() const { return xi.empty() ? 0 : xi.size() - 1; }

  static Discretization from_xi(std::vector<double> xi, const NoiseSchedule& sched);

  std::vector<double> times() const;
  std::vector<double> times_c() const;
};

/// tau(i) = (tau'(i) - tau'(N)) / (tau'(0) - tau'(N)) (T - t_min) + t_min with
/// tau'(i) = sum_{n >= i} softmax(xi)[n]. tau'(i) - tau'(N) is accumulated as
/// the tail sum over n in [i, N) so the gaps stay positive; the end points are
/// pinned to T and t_min exactly.
template <class S>
std::vector<S> tau(std::span<const S> xi, double t_min, double T) {
  using std::exp;
  if (xi.size() < 2) throw GridError("discretization needs at least one step");
  const std::size_t n = xi.size() - 1;
  double shift = ad::value_of(xi[0]);
  for (const auto& v : xi) shift = std::max(shift, ad::value_of(v));
  std::vector<S> mass;
  mass.reserve(n);
  for (std::size_t i = 0; i < n; ++i) mass.push_back(exp(xi[i] - shift));
  // tail[i] = sum_{k=i}^{n-1} mass[k]
  std::vector<S> tail(n + 1, S(0.0));
  for (std::size_t i = n; i-- > 0;) tail[i] = tail[i + 1] + mass[i];
  std::vector<S> out(n + 1);
  out[0] = S(T);
  out[n] = S(t_min);
  const double span = T - t_min;
  for (std::size_t i = 1; i < n; ++i) out[i] = (tail[i] / tail[0]) * span + t_min;
  return out;
}

/// t_i^c = clamp(t_i + xi_c[i], t_min, T).
template <class S>
std::vector<S> tau_c(std::span<const S> times, std::span<const S> xi_c, double t_min, double T) {
  if (times.size() != xi_c.size()) throw GridError("xi_c size must match the time grid");
  std::vector<S> out;
  out.reserve(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) out.push_back(clamp(times[i] + xi_c[i], t_min, T));
  return out;
}

/// Baseline grid, decreasing from T to t_min.
std::vector<double> heuristic_times(Heuristic kind, std::size_t n, const NoiseSchedule& sched);

/// Inverse of tau: xi_i = log of the normalized gap (t_i - t_{i+1}) / (T - t_min)
/// for i < N, and the mean of those masses for the free entry xi_N.
/// Throws GridError for non-monotone grids or wrong end points.
std::vector<double> init_from_times(std::span<const double> times, const NoiseSchedule& sched);

/// Throws GridError unless times has n + 1 strictly decreasing entries from T
/// to t_min.
void validate_grid(std::span<const double> times, const NoiseSchedule& sched);

}  // namespace ld3
