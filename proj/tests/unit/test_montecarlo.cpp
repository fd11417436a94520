#include "weaklab/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

using namespace weaklab;

namespace {
Vector v1(double x) { return Vector::Constant(1, x); }
}  // namespace

TEST(Expectation, OddMomentOfConstantModel) {
  const SdeModel m = make_constant_model(v1(0.0), Matrix::Identity(1, 1));
  const Estimate e = estimate_expectation(m, TestFunction::identity(), v1(0.0), 4, 1.0, 1000000, RngStream{1, 0});
  EXPECT_LT(std::abs(e.value), 3 * e.std_error);
  EXPECT_EQ(e.n_samples, 1000000u);
}

TEST(Expectation, GbmEulerMean) {
  const SdeModel m = make_gbm_model(0.1, 0.2);
  const Estimate e = estimate_expectation(m, TestFunction::identity(), v1(1.0), 10, 1.0, 1000000, RngStream{2, 0});
  EXPECT_NEAR(gbm_euler_mean(0.1, 1.0, 10, 1.0), std::pow(1.01, 10), 1e-15);
  EXPECT_LT(std::abs(e.value - std::pow(1.01, 10)), 3 * e.std_error);
}

TEST(Expectation, ExponentialGrowthIsIntegrable) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const Estimate a = estimate_expectation(m, TestFunction::exp_abs(), v1(0.5), 8, 1.0, 20000, RngStream{3, 0});
  const Estimate b = estimate_expectation(m, TestFunction::exp_abs(), v1(0.5), 8, 1.0, 200000, RngStream{3, 1});
  EXPECT_TRUE(std::isfinite(a.value) && std::isfinite(b.value));
  EXPECT_LT(std::abs(a.value - b.value), 3 * std::hypot(a.std_error, b.std_error));
}

TEST(Expectation, WorkerCountDoesNotChangeBits) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  setenv("WEAKLAB_WORKERS", "1", 1);
  const Estimate a = estimate_expectation(m, TestFunction::power(2), v1(0.0), 8, 1.0, 30000, RngStream{4, 0});
  setenv("WEAKLAB_WORKERS", "3", 1);
  const Estimate b = estimate_expectation(m, TestFunction::power(2), v1(0.0), 8, 1.0, 30000, RngStream{4, 0});
  unsetenv("WEAKLAB_WORKERS");
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Romberg, ConstantModelHasNoBias) {
  const SdeModel m = make_constant_model(v1(0.2), Matrix::Constant(1, 1, 0.7));
  BiasOptions o;
  o.romberg = true;
  const BiasLadder L = bias_ladder(m, TestFunction::power(2), v1(0.1), 1.0, {4, 8}, 20000, RngStream{5, 0}, o);
  EXPECT_EQ(L.reference, BiasReference::ExactCoupling);
  for (const auto& p : L.points) EXPECT_NEAR(p.bias.value, 0.0, 1e-12);
}

TEST(Romberg, GbmDeterministicBiasShrinks) {
  const double mu = 0.1, n = 10;
  const double plain = gbm_euler_mean(mu, 1.0, 10, 1.0) - std::exp(mu);
  const double rb = 2 * gbm_euler_mean(mu, 1.0, 20, 1.0) - gbm_euler_mean(mu, 1.0, 10, 1.0) - std::exp(mu);
  EXPECT_NEAR(rb, 2 * std::pow(1 + mu / (2 * n), 2 * n) - std::pow(1 + mu / n, n) - std::exp(mu), 1e-15);
  EXPECT_LT(std::abs(rb), 1e-4);
  EXPECT_GT(std::abs(plain / rb), 30.0);
}

TEST(Romberg, CoupledVarianceStaysBounded) {
  const SdeModel m = make_gbm_model(0.1, 0.2);
  const Estimate r = romberg_estimate(m, TestFunction::identity(), v1(1.0), 64, 1.0, 50000, RngStream{6, 0});
  const Estimate f = estimate_expectation(m, TestFunction::identity(), v1(1.0), 128, 1.0, 50000, RngStream{6, 0});
  EXPECT_LT(r.std_error * r.std_error, 2 * f.std_error * f.std_error);
}

TEST(Romberg, RejectsDirac) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  EXPECT_THROW(romberg_estimate(m, TestFunction::dirac(v1(0.0)), v1(0.0), 4, 1.0, 10, RngStream{}), UnsupportedFunctional);
}

TEST(Richardson, TableBasics) {
  EXPECT_DOUBLE_EQ(richardson_table({{10, 3.0}, {20, 5.0}}, 1), 5.0);
  EXPECT_NEAR(richardson_table({{10, 2.5}, {20, 2.5}, {40, 2.5}}, 3), 2.5, 1e-14);
  EXPECT_NEAR(richardson_table({{10, 3.0}, {20, 5.0}}, 2), 7.0, 1e-14);
  const auto w = richardson_weights({8, 16}, 2);
  EXPECT_NEAR(w[0], -1.0, 1e-14);
  EXPECT_NEAR(w[1], 2.0, 1e-14);
}

TEST(Richardson, GbmThirdOrderResidual) {
  const double mu = 0.1;
  std::vector<std::pair<int, double>> v;
  for (int n : {10, 20, 40}) v.push_back({n, gbm_euler_mean(mu, 1.0, n, 1.0)});
  EXPECT_LT(std::abs(richardson_table(v, 3) - std::exp(mu)), 1e-7);
}

TEST(FitRate, ExactPowerLaw) {
  std::vector<RatePoint> pts;
  for (int n : {8, 16, 32, 64}) pts.push_back({n, 0.3 / n, 1e-9});
  const RateFit f = fit_rate(pts);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
}

TEST(FitRate, NoiseDominatedPointsAreExcluded) {
  std::vector<RatePoint> pts;
  for (int n : {8, 16, 32, 64}) pts.push_back({n, 1.0 / n, 1e-6});
  pts.push_back({128, 1e-7, 1e-6});
  const RateFit f = fit_rate(pts);
  ASSERT_EQ(f.excluded.size(), 1u);
  EXPECT_EQ(f.excluded[0], 128);
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  pts[3].ci_halfwidth = 1.0;
  EXPECT_THROW(fit_rate(pts), InsufficientSignal);
}

TEST(FitRate, GbmDeterministicSlopes) {
  std::vector<RatePoint> plain, rb;
  for (int n : {8, 16, 32, 64, 128}) {
    const double e = std::exp(0.1);
    plain.push_back({n, gbm_euler_mean(0.1, 1.0, n, 1.0) - e, 0.0});
    rb.push_back({n, 2 * gbm_euler_mean(0.1, 1.0, 2 * n, 1.0) - gbm_euler_mean(0.1, 1.0, n, 1.0) - e, 0.0});
  }
  const double s1 = fit_rate(plain).slope, s2 = fit_rate(rb).slope;
  EXPECT_GE(s1, -1.05);
  EXPECT_LE(s1, -0.95);
  EXPECT_GE(s2, -2.15);
  EXPECT_LE(s2, -1.85);
}

TEST(BiasLimit, ConstantModelIsZero) {
  const SdeModel m = make_constant_model(v1(0.2), Matrix::Constant(1, 1, 0.7));
  const LimitEstimate L = bias_times_n_limit(m, TestFunction::power(2), v1(0.0), 1.0, {8, 16}, 20000, RngStream{7, 0});
  EXPECT_NEAR(L.value, 0.0, 1e-10);
}

TEST(BiasLimit, GbmIdentity) {
  // (1 + μ/n)^n = e^μ (1 - μ²/(2n) + ...), so n · bias -> -e^μ μ²/2.
  const SdeModel m = make_gbm_model(0.1, 0.2);
  const LimitEstimate L =
      bias_times_n_limit(m, TestFunction::identity(), v1(1.0), 1.0, {8, 16, 32}, 200000, RngStream{8, 0}, 3);
  const double expected = -std::exp(0.1) * 0.01 / 2;
  EXPECT_LT(std::abs(L.value - expected), 3 * L.std_error + 1e-5);
  EXPECT_EQ(L.scaled.size(), 3u);
}

TEST(SampleGate, Formula) {
  EXPECT_EQ(samples_for_bias(1.0, 0.0, 500u), 500u);
  EXPECT_EQ(samples_for_bias(1.0, 0.1, 1000000u), static_cast<std::uint64_t>(std::ceil(std::pow(1.96 * 50, 2))));
  EXPECT_EQ(samples_for_bias(1.0, 1e-9, 1000u), 1000u);
}

TEST(BiasLadder, ResolvesReferences) {
  BiasOptions o;
  EXPECT_EQ(resolve_reference(make_ou_model(1, 1), o), BiasReference::ExactCoupling);
  EXPECT_EQ(resolve_reference(make_bounded_vol_model(0, 0.5, 0.4), o), BiasReference::Romberg);
  o.truth = 1.0;
  EXPECT_EQ(resolve_reference(make_bounded_vol_model(0, 0.5, 0.4), o), BiasReference::Truth);
}
