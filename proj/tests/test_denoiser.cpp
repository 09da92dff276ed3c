#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "ld3/denoiser.hpp"
#include "ld3/error.hpp"
#include "test_support.hpp"

namespace ld3 {
namespace {

const NoiseSchedule kVe = NoiseSchedule::ve_edm();
const NoiseSchedule kVp = NoiseSchedule::vp_linear();

GaussianMixture shifted(const GaussianMixture& gm, std::span<const double> c) {
  std::vector<MixtureComponent> comps;
  for (const auto& k : gm.components()) {
    auto m = k.mean;
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += c[j];
    comps.push_back({k.weight, m, k.variance});
  }
  return GaussianMixture(comps);
}

TEST(GmEpsilon, SingleGaussianClosedForm) {
  const auto gm = GaussianMixture::single({0.0}, 1.0);
  const std::vector<double> x{2.0};
  const auto eps = gm_epsilon(gm, kVe, x, 1.0);
  ASSERT_EQ(eps.size(), 1u);
  EXPECT_NEAR(eps[0], 1.0, 1e-15);
}

TEST(GmEpsilon, ZeroAtScaledMean) {
  const auto gm = GaussianMixture::single({0.7, -1.2}, 0.3);
  for (const auto& s : {kVe, kVp}) {
    const double t = 0.5 * s.T;
    const double a = alpha_sigma(s, t).alpha;
    const std::vector<double> x{a * 0.7, a * -1.2};
    const auto eps = gm_epsilon(gm, s, x, t);
    EXPECT_NEAR(eps[0], 0.0, 1e-15);
    EXPECT_NEAR(eps[1], 0.0, 1e-15);
  }
}

TEST(GmEpsilon, SymmetricPairVanishesAtOrigin) {
  const GaussianMixture gm({{0.5, {1.0, 2.0}, 0.1}, {0.5, {-1.0, -2.0}, 0.1}});
  const std::vector<double> x{0.0, 0.0};
  for (double t : {0.002, 0.5, 3.0, 80.0}) {
    const auto eps = gm_epsilon(gm, kVe, x, t);
    EXPECT_NEAR(eps[0], 0.0, 1e-14) << t;
    EXPECT_NEAR(eps[1], 0.0, 1e-14) << t;
  }
}

TEST(GmEpsilon, NonFiniteInputRejected) {
  const auto gm = default_mixture();
  const std::vector<double> x{std::numeric_limits<double>::quiet_NaN(), 0.0};
  EXPECT_THROW(gm_epsilon(gm, kVe, x, 1.0), InputError);
  const std::vector<double> y{std::numeric_limits<double>::infinity(), 0.0};
  EXPECT_THROW(GmDenoiser(gm, kVe).epsilon(y, 1.0), InputError);
}

TEST(GmEpsilon, IsMinusSigmaTimesScore) {
  const auto gm = default_mixture();
  for (const auto& s : {kVe, kVp}) {
    for (double frac : {0.001, 0.02, 0.3, 1.0}) {
      const double t = std::max(s.t_min, frac * s.T);
      const double sig = alpha_sigma(s, t).sigma;
      for (const auto& x0 : {std::vector<double>{0.3, -0.2}, std::vector<double>{-1.4, 0.6},
                             std::vector<double>{2.0, 1.0}}) {
        std::vector<double> x = x0;
        for (auto& v : x) v *= std::max(1.0, sig);
        const auto eps = gm_epsilon(gm, s, x, t);
        const double h = 1e-5 * std::max(1.0, sig);
        const auto score = testing::central_diff(
            [&](const std::vector<double>& v) { return gm_log_density(gm, s, v, t); }, x, h);
        std::vector<double> fd(2);
        for (std::size_t j = 0; j < 2; ++j) fd[j] = -sig * score[j];
        // norm-wise: single components can sit near zero
        EXPECT_LE(testing::vec_rel_err(eps, fd), 1e-6) << to_string(s.family) << " t=" << t;
      }
    }
  }
}

TEST(GmEpsilon, TranslationEquivariant) {
  const auto gm = default_mixture();
  const std::vector<double> c{3.0, -2.5};
  const auto moved = shifted(gm, c);
  const std::vector<double> x{0.4, 0.9};
  const std::vector<double> xc{0.4 + 3.0, 0.9 - 2.5};
  for (double t : {0.01, 0.4, 5.0}) {
    const auto a = gm_epsilon(gm, kVe, x, t);
    const auto b = gm_epsilon(moved, kVe, xc, t);
    EXPECT_NEAR(a[0], b[0], 1e-12);
    EXPECT_NEAR(a[1], b[1], 1e-12);
  }
}

TEST(GmEpsilon, TapeVersionMatchesPlain) {
  const GmDenoiser den(default_mixture(), kVp);
  const std::vector<double> x{0.3, -0.8};
  const double t = 0.37;
  ad::Tape tape;
  const auto xv = tape.variables(x);
  const auto tv = tape.variable(t);
  const auto ev = den.epsilon(std::span<const ad::Var>(xv), tv);
  const auto e = den.epsilon(x, t);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(ev[j].value(), e[j]);
}

TEST(PointEpsilon, Examples) {
  const std::vector<double> x0{1.0, -1.0};
  for (double t : {0.002, 1.0, 80.0}) {
    const auto eps = point_epsilon(x0, kVe, x0, t);
    EXPECT_EQ(eps[0], 0.0);
    EXPECT_EQ(eps[1], 0.0);
  }
  const std::vector<double> origin{0.0, 0.0};
  const std::vector<double> x{4.0, 0.0};
  const auto eps = point_epsilon(origin, kVe, x, 2.0);
  EXPECT_EQ(eps[0], 2.0);
  EXPECT_EQ(eps[1], 0.0);
}

TEST(PointEpsilon, LimitOfNarrowGaussian) {
  const std::vector<double> x0{0.5, -0.25};
  const auto gm = GaussianMixture::single(x0, 1e-12);
  for (const auto& s : {kVe, kVp}) {
    for (double frac : {0.05, 0.5, 1.0}) {
      const double t = frac * s.T;
      const std::vector<double> x{1.3, 0.2};
      const auto a = point_epsilon(x0, s, x, t);
      const auto b = gm_epsilon(gm, s, x, t);
      EXPECT_NEAR(a[0], b[0], 1e-5);
      EXPECT_NEAR(a[1], b[1], 1e-5);
    }
  }
}

TEST(GmLogDensity, GaussianNormalizer) {
  const auto gm = GaussianMixture::single({0.0}, 1.0);
  const double t = kVe.t_min;
  const std::vector<double> x{0.0};
  const double v = 1.0 + t * t;
  EXPECT_NEAR(gm_log_density(gm, kVe, x, t), -0.5 * std::log(2.0 * std::numbers::pi * v), 1e-14);
}

TEST(GmLogDensity, TranslationInvariant) {
  const auto gm = default_mixture();
  const std::vector<double> c{-0.7, 4.0};
  const auto moved = shifted(gm, c);
  const std::vector<double> x{0.2, 0.1};
  const std::vector<double> xc{0.2 - 0.7, 0.1 + 4.0};
  EXPECT_NEAR(gm_log_density(gm, kVe, x, 0.3), gm_log_density(moved, kVe, xc, 0.3), 1e-12);
}

TEST(GmLogDensity, IntegratesToOneIn1D) {
  const GaussianMixture gm({{0.3, {-1.5}, 0.04}, {0.5, {1.0}, 0.09}, {0.2, {0.2}, 0.02}});
  for (const auto& [s, t] : {std::pair{kVe, kVe.t_min}, std::pair{kVe, 1.0}, std::pair{kVp, 0.5}}) {
    const std::size_t n = 400001;
    const double lo = -20.0;
    const double hi = 20.0;
    const double h = (hi - lo) / static_cast<double>(n - 1);
    double integral = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::vector<double> x{lo + h * static_cast<double>(i)};
      const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
      integral += w * std::exp(gm_log_density(gm, s, x, t));
    }
    EXPECT_NEAR(integral * h, 1.0, 1e-6) << to_string(s.family) << " t=" << t;
  }
}

TEST(GaussianMixture, ValidatesComponents) {
  EXPECT_THROW(GaussianMixture({{0.5, {0.0}, 1.0}, {0.4, {1.0}, 1.0}}), InputError);
  EXPECT_THROW(GaussianMixture({{1.0, {0.0}, 0.0}}), InputError);
  EXPECT_THROW(GaussianMixture({{-0.5, {0.0}, 1.0}, {1.5, {1.0}, 1.0}}), InputError);
  EXPECT_THROW(GaussianMixture({{0.5, {0.0}, 1.0}, {0.5, {1.0, 2.0}, 1.0}}), InputError);
  EXPECT_THROW(GaussianMixture(std::vector<MixtureComponent>{}), InputError);
  EXPECT_NO_THROW(GaussianMixture({{0.5, {0.0}, 1.0}, {0.5, {1.0}, 1.0}}));
}

TEST(GaussianMixture, DefaultIsThreeComponentsIn2D) {
  const auto gm = default_mixture();
  EXPECT_EQ(gm.dim(), 2u);
  EXPECT_EQ(gm.components().size(), 3u);
}

TEST(GaussianMixture, SamplesMatchMoments) {
  const GaussianMixture gm({{0.25, {-2.0}, 0.01}, {0.75, {2.0}, 0.04}});
  double mean = 0.0;
  const std::size_t n = 40000;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(5, i);
    mean += gm.sample(rng)[0];
  }
  EXPECT_NEAR(mean / static_cast<double>(n), 0.25 * -2.0 + 0.75 * 2.0, 0.03);
}

}  // namespace
}  // namespace ld3
