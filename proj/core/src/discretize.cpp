#include "ld3/discretize.hpp"

#include <string>

#include "ld3/error.hpp"

namespace ld3 {

std::string_view to_string(Heuristic kind) {
  switch (kind) {
    case Heuristic::Uniform:
      return "uniform";
    case Heuristic::Quadratic:
      return "quadratic";
    case Heuristic::Edm:
      return "edm";
    case Heuristic::LogSnr:
      return "logsnr";
  }
  return "unknown";
}

Heuristic parse_heuristic(std::string_view name) {
  if (name == "uniform") return Heuristic::Uniform;
  if (name == "quadratic") return Heuristic::Quadratic;
  if (name == "edm") return Heuristic::Edm;
  if (name == "logsnr") return Heuristic::LogSnr;
  throw ConfigError("unknown discretization heuristic '" + std::string(name) + "'");
}

Discretization Discretization::from_xi(std::vector<double> xi, const NoiseSchedule& sched) {
  Discretization disc;
  disc.xi_c.assign(xi.size(), 0.0);
  disc.xi = std::move(xi);
  disc.t_min = sched.t_min;
  disc.T = sched.T;
  return disc;
}

std::vector<double> Discretization::times() const {
  return tau<double>(xi, t_min, T);
}

std::vector<double> Discretization::times_c() const {
  const auto t = times();
  return tau_c<double>(t, xi_c, t_min, T);
}

std::vector<double> heuristic_times(Heuristic kind, std::size_t n, const NoiseSchedule& sched) {
  if (n == 0) throw GridError("heuristic grid needs at least one step");
  const double T = sched.T;
  const double t_min = sched.t_min;
  const double dn = static_cast<double>(n);
  std::vector<double> out(n + 1);
  switch (kind) {
    case Heuristic::Uniform:
    case Heuristic::Quadratic: {
      const double rho = kind == Heuristic::Uniform ? 1.0 : 2.0;
      // increasing polynomial grid, emitted in reverse
      for (std::size_t i = 0; i <= n; ++i) {
        out[n - i] = std::pow(static_cast<double>(i) / dn, rho) * (T - t_min) + t_min;
      }
      break;
    }
    case Heuristic::Edm: {
      constexpr double rho = 7.0;
      const double s_max = sched.sigma_max();
      const double s_min = sched.sigma_min();
      if (!(s_max > s_min)) throw ConfigError("edm grid needs an increasing sigma(t)");
      const double a = std::pow(s_max, 1.0 / rho);
      const double b = std::pow(s_min, 1.0 / rho);
      for (std::size_t i = 0; i <= n; ++i) {
        const double sig = std::pow(a + (static_cast<double>(i) / dn) * (b - a), rho);
        if (i == 0) {
          out[i] = T;
        } else if (i == n) {
          out[i] = t_min;
        } else {
          out[i] = t_of_sigma(sched, sig);
        }
      }
      break;
    }
    case Heuristic::LogSnr: {
      const double lam_lo = lambda(sched, T);
      const double lam_hi = lambda(sched, t_min);
      for (std::size_t i = 0; i <= n; ++i) {
        const double lam = lam_lo + (static_cast<double>(i) / dn) * (lam_hi - lam_lo);
        out[i] = t_of_lambda(sched, lam);
      }
      break;
    }
  }
  out.front() = T;
  out.back() = t_min;
  return out;
}

void validate_grid(std::span<const double> times, const NoiseSchedule& sched) {
  if (times.size() < 2) throw GridError("time grid needs at least two points");
  if (std::abs(times.front() - sched.T) > 1e-12 * sched.T) {
    throw GridError("time grid must start at T");
  }
  if (std::abs(times.back() - sched.t_min) > 1e-12 * sched.t_min) {
    throw GridError("time grid must end at t_min");
  }
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    if (!(times[i] > times[i + 1])) {
      throw GridError("time grid is not strictly decreasing at index " + std::to_string(i));
    }
  }
}

std::vector<double> init_from_times(std::span<const double> times, const NoiseSchedule& sched) {
  validate_grid(times, sched);
  const std::size_t n = times.size() - 1;
  const double span = sched.T - sched.t_min;
  std::vector<double> xi(n + 1);
  double mean_mass = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = (times[i] - times[i + 1]) / span;
    xi[i] = std::log(q);
    mean_mass += q;
  }
  xi[n] = std::log(mean_mass / static_cast<double>(n));
  return xi;
}

}  // namespace ld3
