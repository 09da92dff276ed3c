#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ld3/ad.hpp"
#include "ld3/error.hpp"

namespace ld3 {

enum class ScheduleFamily { VpLinear, VeEdm };

std::string_view to_string(ScheduleFamily family);
ScheduleFamily parse_schedule_family(std::string_view name);

/// Forward-process noise schedule x_t = alpha_t x_0 + sigma_t eps.
///
/// VpLinear: alpha_t = exp(-t^2 (beta_1 - beta_0) / 4 - t beta_0 / 2),
///           sigma_t = sqrt(1 - alpha_t^2).
/// VeEdm:    alpha_t = 1, sigma_t = t.
struct NoiseSchedule {
  ScheduleFamily family = ScheduleFamily::VeEdm;
  double T = 80.0;
  double t_min = 0.002;
  double beta_0 = 0.1;
  double beta_1 = 20.0;

  static NoiseSchedule ve_edm(double T = 80.0, double t_min = 0.002);
  static NoiseSchedule vp_linear(double beta_0 = 0.1, double beta_1 = 20.0, double T = 1.0,
                                 double t_min = 1e-3);

  /// Throws ConfigError if 0 < t_min < T or the family parameters are violated.
  void validate() const;

  /// Noise level at the end points.
  double sigma_max() const;
  double sigma_min() const;

  /// Stable 64-bit fingerprint of the schedule parameters.
  std::uint64_t hash() const;
};

/// Throws DomainError unless t lies in [t_min, T] (1e-12 relative slack).
void check_time(const NoiseSchedule& s, double t);

template <class S>
S log_alpha(const NoiseSchedule& s, const S& t) {
  check_time(s, ad::value_of(t));
  if (s.family == ScheduleFamily::VeEdm) return S(0.0);
  return -0.25 * (t * t) * (s.beta_1 - s.beta_0) - 0.5 * t * s.beta_0;
}

template <class S>
S alpha(const NoiseSchedule& s, const S& t) {
  using std::exp;
  if (s.family == ScheduleFamily::VeEdm) {
    check_time(s, ad::value_of(t));
    return S(1.0);
  }
  return exp(log_alpha(s, t));
}

template <class S>
S sigma(const NoiseSchedule& s, const S& t) {
  using std::expm1;
  using std::sqrt;
  if (s.family == ScheduleFamily::VeEdm) {
    check_time(s, ad::value_of(t));
    return t;
  }
  // sigma^2 = 1 - alpha^2 = -expm1(2 log alpha), accurate near t = 0
  return sqrt(-expm1(2.0 * log_alpha(s, t)));
}

/// Log signal-to-noise ratio log(alpha_t / sigma_t).
template <class S>
S lambda(const NoiseSchedule& s, const S& t) {
  using std::log;
  if (s.family == ScheduleFamily::VeEdm) {
    check_time(s, ad::value_of(t));
    return -log(t);
  }
  return log_alpha(s, t) - log(sigma(s, t));
}

/// f(t) = d log(alpha_t)/dt.
template <class S>
S drift_f(const NoiseSchedule& s, const S& t) {
  check_time(s, ad::value_of(t));
  if (s.family == ScheduleFamily::VeEdm) return S(0.0);
  return -0.5 * t * (s.beta_1 - s.beta_0) - 0.5 * s.beta_0;
}

/// g^2(t) = d sigma_t^2 / dt - 2 f(t) sigma_t^2.
template <class S>
S drift_g2(const NoiseSchedule& s, const S& t) {
  check_time(s, ad::value_of(t));
  if (s.family == ScheduleFamily::VeEdm) return 2.0 * t;
  // alpha^2 + sigma^2 = 1 collapses the general form to -2 f(t) = beta(t)
  return -2.0 * drift_f(s, t);
}

struct AlphaSigma {
  double alpha;
  double sigma;
};

AlphaSigma alpha_sigma(const NoiseSchedule& s, double t);

struct DriftTerms {
  double f;
  double g2;
};

DriftTerms drift_terms(const NoiseSchedule& s, double t);

double lambda_of_t(const NoiseSchedule& s, double t);

/// Inverse of lambda_of_t. Closed form for VeEdm, bisection to 1e-13
/// absolute in t for VpLinear. Throws DomainError outside
/// [lambda(T), lambda(t_min)].
double t_of_lambda(const NoiseSchedule& s, double lam);

/// Inverse of sigma(t) on [t_min, T].
double t_of_sigma(const NoiseSchedule& s, double sig);

/// `count` i.i.d. draws from N(0, sigma_T^2 I). Sample i uses the substream
/// mix_seed(seed, i) so the output does not depend on evaluation order.
std::vector<std::vector<double>> sample_prior(const NoiseSchedule& s, std::uint64_t seed,
                                              std::size_t count, std::size_t d);

}  // namespace ld3
