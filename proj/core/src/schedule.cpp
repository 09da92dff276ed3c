#include "ld3/schedule.hpp"

#include <bit>
#include <cstring>

#include "ld3/rng.hpp"

namespace ld3 {

std::string_view to_string(ScheduleFamily family) {
  switch (family) {
    case ScheduleFamily::VpLinear:
      return "vp_linear";
    case ScheduleFamily::VeEdm:
      return "ve_edm";
  }
  return "unknown";
}

ScheduleFamily parse_schedule_family(std::string_view name) {
  if (name == "vp_linear") return ScheduleFamily::VpLinear;
  if (name == "ve_edm") return ScheduleFamily::VeEdm;
  throw ConfigError("unknown schedule family '" + std::string(name) + "'");
}

NoiseSchedule NoiseSchedule::ve_edm(double T, double t_min) {
  NoiseSchedule s;
  s.family = ScheduleFamily::VeEdm;
  s.T = T;
  s.t_min = t_min;
  s.validate();
  return s;
}

NoiseSchedule NoiseSchedule::vp_linear(double beta_0, double beta_1, double T, double t_min) {
  NoiseSchedule s;
  s.family = ScheduleFamily::VpLinear;
  s.T = T;
  s.t_min = t_min;
  s.beta_0 = beta_0;
  s.beta_1 = beta_1;
  s.validate();
  return s;
}

void NoiseSchedule::validate() const {
  if (!(t_min > 0.0) || !(t_min < T) || !std::isfinite(T)) {
    throw ConfigError("schedule requires 0 < t_min < T");
  }
  if (family == ScheduleFamily::VpLinear && !(beta_0 > 0.0 && beta_1 >= beta_0)) {
    throw ConfigError("vp_linear schedule requires 0 < beta_0 <= beta_1");
  }
}

double NoiseSchedule::sigma_max() const { return sigma(*this, T); }
double NoiseSchedule::sigma_min() const { return sigma(*this, t_min); }

std::uint64_t NoiseSchedule::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(family));
  mix(std::bit_cast<std::uint64_t>(T));
  mix(std::bit_cast<std::uint64_t>(t_min));
  if (family == ScheduleFamily::VpLinear) {
    mix(std::bit_cast<std::uint64_t>(beta_0));
    mix(std::bit_cast<std::uint64_t>(beta_1));
  }
  return h;
}

void check_time(const NoiseSchedule& s, double t) {
  constexpr double slack = 1e-12;
  if (!(t >= s.t_min * (1.0 - slack) && t <= s.T * (1.0 + slack))) {
    throw DomainError("time " + std::to_string(t) + " outside [" + std::to_string(s.t_min) + ", " +
                      std::to_string(s.T) + "]");
  }
}

AlphaSigma alpha_sigma(const NoiseSchedule& s, double t) {
  return {alpha(s, t), sigma(s, t)};
}

DriftTerms drift_terms(const NoiseSchedule& s, double t) {
  return {drift_f(s, t), drift_g2(s, t)};
}

double lambda_of_t(const NoiseSchedule& s, double t) { return lambda(s, t); }

double t_of_lambda(const NoiseSchedule& s, double lam) {
  const double lam_hi = lambda(s, s.t_min);
  const double lam_lo = lambda(s, s.T);
  const double slack = 1e-12 * std::max(1.0, std::abs(lam));
  if (!(lam >= lam_lo - slack && lam <= lam_hi + slack)) {
    throw DomainError("log-SNR " + std::to_string(lam) + " outside [" + std::to_string(lam_lo) +
                      ", " + std::to_string(lam_hi) + "]");
  }
  if (lam >= lam_hi) return s.t_min;
  if (lam <= lam_lo) return s.T;
  if (s.family == ScheduleFamily::VeEdm) return std::exp(-lam);

  double lo = s.t_min;
  double hi = s.T;
  // run to adjacent doubles; well past the 1e-13 absolute target
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (lambda(s, mid) > lam) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double t_of_sigma(const NoiseSchedule& s, double sig) {
  if (!(sig > 0.0)) throw DomainError("sigma must be positive");
  if (s.family == ScheduleFamily::VeEdm) {
    check_time(s, sig);
    return sig;
  }
  if (!(sig < 1.0)) throw DomainError("vp sigma must be below 1");
  // sigma^2 = 1 / (1 + e^{2 lambda})
  const double lam = 0.5 * std::log((1.0 - sig * sig) / (sig * sig));
  return t_of_lambda(s, lam);
}

std::vector<std::vector<double>> sample_prior(const NoiseSchedule& s, std::uint64_t seed,
                                              std::size_t count, std::size_t d) {
  const double scale = s.sigma_max();
  std::vector<std::vector<double>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, i);
    out.push_back(rng.normal_vector(d, scale));
  }
  return out;
}

}  // namespace ld3
