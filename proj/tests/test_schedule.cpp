#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "ld3/error.hpp"
#include "ld3/schedule.hpp"

namespace ld3 {
namespace {

std::vector<double> dense_grid(const NoiseSchedule& s, std::size_t n) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = s.t_min + (s.T - s.t_min) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return t;
}

TEST(Schedule, VeAlphaSigmaAtEndPoints) {
  const auto s = NoiseSchedule::ve_edm();
  auto as = alpha_sigma(s, 80.0);
  EXPECT_EQ(as.alpha, 1.0);
  EXPECT_EQ(as.sigma, 80.0);
  as = alpha_sigma(s, 0.002);
  EXPECT_EQ(as.alpha, 1.0);
  EXPECT_EQ(as.sigma, 0.002);
}

TEST(Schedule, VpIdentityLimitNearZero) {
  const auto s = NoiseSchedule::vp_linear(0.1, 20.0, 1.0, 1e-8);
  const auto as = alpha_sigma(s, 1e-8);
  EXPECT_NEAR(as.alpha, 1.0, 1e-8);
  EXPECT_LT(as.sigma, 1e-3);
  // closed form: sigma^2 = 1 - alpha^2 ~ beta_0 t for tiny t
  EXPECT_NEAR(as.sigma * as.sigma, 0.1 * 1e-8, 1e-14);
}

TEST(Schedule, VpMatchesClosedForm) {
  const auto s = NoiseSchedule::vp_linear();
  for (double t : {0.001, 0.1, 0.5, 1.0}) {
    const double a = std::exp(-0.25 * t * t * (20.0 - 0.1) - 0.5 * t * 0.1);
    const auto as = alpha_sigma(s, t);
    EXPECT_NEAR(as.alpha, a, 1e-15);
    EXPECT_NEAR(as.sigma, std::sqrt(1.0 - a * a), 1e-12);
  }
}

TEST(Schedule, OutOfRangeTimeIsDomainError) {
  const auto s = NoiseSchedule::ve_edm();
  EXPECT_THROW(alpha_sigma(s, 81.0), DomainError);
  EXPECT_THROW(alpha_sigma(s, 0.001), DomainError);
  EXPECT_THROW(drift_terms(s, -1.0), DomainError);
  EXPECT_THROW(lambda_of_t(NoiseSchedule::vp_linear(), 1.5), DomainError);
}

TEST(Schedule, VeLambdaIsMinusLogT) {
  const auto s = NoiseSchedule::ve_edm();
  EXPECT_NEAR(lambda_of_t(s, 0.4), 0.916290731874155, 1e-12);
  EXPECT_DOUBLE_EQ(lambda_of_t(s, 0.4), -std::log(0.4));
}

TEST(Schedule, LambdaInverseRoundTrip) {
  const auto ve = NoiseSchedule::ve_edm();
  for (double t : {0.01, 1.0, 50.0}) {
    EXPECT_LE(std::abs(t_of_lambda(ve, lambda_of_t(ve, t)) - t) / t, 1e-12) << t;
  }
  const auto vp = NoiseSchedule::vp_linear();
  for (double t : {0.001, 0.01, 0.3, 0.77, 1.0}) {
    EXPECT_LE(std::abs(t_of_lambda(vp, lambda_of_t(vp, t)) - t) / t, 1e-12) << t;
  }
}

TEST(Schedule, LambdaOutOfRangeIsDomainError) {
  const auto s = NoiseSchedule::ve_edm();
  EXPECT_THROW(t_of_lambda(s, lambda_of_t(s, 0.002) + 1.0), DomainError);
  EXPECT_THROW(t_of_lambda(NoiseSchedule::vp_linear(), 100.0), DomainError);
}

TEST(Schedule, SnrAndLambdaStrictlyDecreasing) {
  for (const auto& s : {NoiseSchedule::ve_edm(), NoiseSchedule::vp_linear()}) {
    const auto t = dense_grid(s, 1000);
    double prev_lam = lambda_of_t(s, t[0]);
    double prev_snr = std::exp(2.0 * prev_lam);
    for (std::size_t i = 1; i < t.size(); ++i) {
      const auto as = alpha_sigma(s, t[i]);
      const double snr = as.alpha * as.alpha / (as.sigma * as.sigma);
      const double lam = lambda_of_t(s, t[i]);
      EXPECT_LT(lam, prev_lam) << to_string(s.family) << " t=" << t[i];
      EXPECT_LT(snr, prev_snr) << to_string(s.family) << " t=" << t[i];
      EXPECT_GT(as.alpha, 0.0);
      EXPECT_GT(as.sigma, 0.0);
      prev_lam = lam;
      prev_snr = snr;
    }
  }
}

TEST(Schedule, VeDriftTerms) {
  const auto d = drift_terms(NoiseSchedule::ve_edm(), 5.0);
  EXPECT_EQ(d.f, 0.0);
  EXPECT_EQ(d.g2, 10.0);
  // the probability-flow right-hand side reduces to eps: g^2 / (2 sigma) = 1
  for (double t : {0.002, 0.7, 80.0}) {
    const auto dt = drift_terms(NoiseSchedule::ve_edm(), t);
    EXPECT_DOUBLE_EQ(dt.g2 / (2.0 * alpha_sigma(NoiseSchedule::ve_edm(), t).sigma), 1.0);
  }
}

TEST(Schedule, DriftMatchesFiniteDifferences) {
  for (const auto& s : {NoiseSchedule::ve_edm(), NoiseSchedule::vp_linear()}) {
    const auto grid = dense_grid(s, 50);
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
      const double t = grid[i];
      const double h = 1e-5 * t;
      const auto up = alpha_sigma(s, t + h);
      const auto dn = alpha_sigma(s, t - h);
      const double f_fd = (std::log(up.alpha) - std::log(dn.alpha)) / (2.0 * h);
      const double ds2 = (up.sigma * up.sigma - dn.sigma * dn.sigma) / (2.0 * h);
      const auto as = alpha_sigma(s, t);
      const double g2_fd = ds2 - 2.0 * f_fd * as.sigma * as.sigma;
      const auto d = drift_terms(s, t);
      if (s.family == ScheduleFamily::VeEdm) {
        EXPECT_EQ(d.f, 0.0);
      } else {
        EXPECT_LE(std::abs(d.f - f_fd) / std::abs(d.f), 1e-6) << "t=" << t;
      }
      EXPECT_LE(std::abs(d.g2 - g2_fd) / std::abs(d.g2), 1e-6) << to_string(s.family) << " t=" << t;
    }
  }
}

TEST(Schedule, SigmaInverse) {
  for (const auto& s : {NoiseSchedule::ve_edm(), NoiseSchedule::vp_linear()}) {
    for (const double t : dense_grid(s, 17)) {
      const double sig = alpha_sigma(s, t).sigma;
      EXPECT_LE(std::abs(t_of_sigma(s, sig) - t) / t, 1e-10) << to_string(s.family) << " t=" << t;
    }
  }
}

TEST(Schedule, PriorIsDeterministic) {
  const auto s = NoiseSchedule::ve_edm();
  const auto a = sample_prior(s, 42, 16, 3);
  const auto b = sample_prior(s, 42, 16, 3);
  EXPECT_EQ(a, b);
  const auto c = sample_prior(s, 43, 16, 3);
  EXPECT_NE(a, c);
  // sample i does not depend on count
  const auto longer = sample_prior(s, 42, 32, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], longer[i]);
}

TEST(Schedule, PriorMomentsMatchSigmaT) {
  const auto s = NoiseSchedule::ve_edm();
  const std::size_t n = 100000;
  const std::size_t d = 2;
  const auto xs = sample_prior(s, 7, n, d);
  const double sT = s.sigma_max();
  std::vector<double> mean(d, 0.0);
  std::vector<double> sq(d, 0.0);
  for (const auto& x : xs) {
    for (std::size_t j = 0; j < d; ++j) {
      mean[j] += x[j];
      sq[j] += x[j] * x[j];
    }
  }
  double mean_norm = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    mean[j] /= static_cast<double>(n);
    const double var = sq[j] / static_cast<double>(n) - mean[j] * mean[j];
    EXPECT_NEAR(var / (sT * sT), 1.0, 0.03);
    mean_norm += mean[j] * mean[j];
  }
  EXPECT_LE(std::sqrt(mean_norm), 0.02 * sT * std::sqrt(static_cast<double>(d)));
}

TEST(Schedule, ValidateRejectsBadRanges) {
  NoiseSchedule s = NoiseSchedule::ve_edm();
  s.t_min = 0.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = NoiseSchedule::ve_edm();
  s.t_min = 100.0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = NoiseSchedule::vp_linear();
  s.beta_1 = 0.05;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Schedule, FamilyNames) {
  EXPECT_EQ(parse_schedule_family("ve_edm"), ScheduleFamily::VeEdm);
  EXPECT_EQ(parse_schedule_family("vp_linear"), ScheduleFamily::VpLinear);
  EXPECT_THROW(parse_schedule_family("cosine"), ConfigError);
}

TEST(Schedule, HashDistinguishesParameters) {
  EXPECT_EQ(NoiseSchedule::ve_edm().hash(), NoiseSchedule::ve_edm().hash());
  EXPECT_NE(NoiseSchedule::ve_edm().hash(), NoiseSchedule::ve_edm(80.0, 0.003).hash());
  EXPECT_NE(NoiseSchedule::ve_edm().hash(), NoiseSchedule::vp_linear().hash());
}

}  // namespace
}  // namespace ld3
