#include "weaklab/models.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace weaklab;

namespace {
Vector v1(double x) { return Vector::Constant(1, x); }
}  // namespace

TEST(ConstantModel, BrownianDensityIsStandardNormal) {
  const SdeModel m = make_constant_model(v1(0.0), Matrix::Identity(1, 1));
  for (double y : {-2.0, 0.0, 0.7}) EXPECT_NEAR(m.exact_density->density(1.0, v1(0.0), v1(y)), normal_pdf(y), 1e-15);
  for (double t : {0.1, 1.0})
    for (double x : {-1.0, 2.0}) EXPECT_NEAR(semigroup_apply(m, t, TestFunction::constant(1.0), v1(x)), 1.0, 1e-12);
}

TEST(ConstantModel, ArithmeticBrownianLaw) {
  const SdeModel m = make_constant_model(v1(1.0), Matrix::Identity(1, 1));
  const auto law = m.exact_density->law(1.0, v1(0.0));
  ASSERT_TRUE(law);
  EXPECT_DOUBLE_EQ(law->mean[0], 1.0);
  EXPECT_DOUBLE_EQ(law->cov(0, 0), 1.0);
  EXPECT_TRUE(m.flags.C);
}

TEST(ConstantModel, SingularDiffusionWithEllipticityRequested) {
  Matrix s(2, 1);
  s << 1.0, 1.0;
  EXPECT_THROW(make_constant_model(Vector::Zero(2), s, true), AssumptionViolation);
  const SdeModel m = make_constant_model(Vector::Zero(2), s, false);
  EXPECT_FALSE(m.flags.C);
  EXPECT_FALSE(m.exact_density.has_value());
}

TEST(ConstantModel, SecondMomentOfStandardNormal) {
  const SdeModel m = make_constant_model(v1(0.0), Matrix::Identity(1, 1));
  EXPECT_NEAR(semigroup_apply(m, 1.0, TestFunction::power(2), v1(0.0)), 1.0, 1e-12);
}

TEST(OuModel, ExactMeanAndVariance) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const auto law = m.exact_density->law(1.0, v1(2.0));
  EXPECT_NEAR(law->mean[0], 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(law->cov(0, 0), 0.432332, 1e-6);
  EXPECT_FALSE(m.flags.B);
  EXPECT_TRUE(m.flags.A && m.flags.C);
}

TEST(OuModel, DerivativeMatchesFiniteDifference) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const auto slice = m.exact_density->at(1.0);
  const double h = 1e-5;
  const double fd = (slice->density(v1(0.0), v1(0.5 + h)) - slice->density(v1(0.0), v1(0.5 - h))) / (2 * h);
  EXPECT_NEAR(slice->derivative({}, Multiindex{1}, v1(0.0), v1(0.5)), fd, 1e-6);
}

TEST(OuModel, DiracValueAtOrigin) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const double v = (1.0 - std::exp(-2.0)) / 2.0;
  const double expected = 1.0 / std::sqrt(2.0 * std::numbers::pi * v);
  EXPECT_NEAR(semigroup_apply(m, 1.0, TestFunction::dirac(v1(0.0)), v1(0.0)), expected, 1e-14);
  EXPECT_NEAR(expected, 0.606738, 1e-6);
}

TEST(OuModel, RejectsNonpositiveParameters) {
  EXPECT_THROW(make_ou_model(0.0, 1.0), InvalidArgument);
  EXPECT_THROW(make_ou_model(1.0, -1.0), InvalidArgument);
}

TEST(GbmModel, LognormalMean) {
  const SdeModel m = make_gbm_model(0.1, 0.2);
  EXPECT_NEAR(semigroup_apply(m, 1.0, TestFunction::identity(), v1(1.0)), std::exp(0.1), 1e-10);
  EXPECT_NEAR(semigroup_apply(m, 1.0, TestFunction::identity(), v1(3.0)), 3.0 * std::exp(0.1), 1e-9);
  const SdeModel z = make_gbm_model(0.0, 0.3);
  for (double t : {0.25, 1.0}) EXPECT_NEAR(semigroup_apply(z, t, TestFunction::identity(), v1(2.0)), 2.0, 1e-10);
  EXPECT_NEAR(semigroup_apply(m, 0.5, TestFunction::constant(1.0), v1(1.0)), 1.0, 1e-12);
}

TEST(GbmModel, LogCoefficients) {
  const auto [b, s] = gbm_log_coefficients(0.1, 0.2);
  EXPECT_DOUBLE_EQ(b, 0.1 - 0.02);
  EXPECT_DOUBLE_EQ(s, 0.2);
  const SdeModel bs = make_black_scholes_log_model(0.1, 0.2);
  EXPECT_DOUBLE_EQ(bs.drift_at(v1(5.0))[0], 0.08);
  EXPECT_DOUBLE_EQ(bs.diffusion_at(v1(-3.0))(0, 0), 0.2);
}

TEST(GbmModel, LognormalDerivativesMatchFiniteDifferences) {
  const double h = 1e-5;
  const auto p = [](double x, double y) { return lognormal_kernel_derivative({}, {}, 0.1, 0.2, 0.7, x, y); };
  const double dx = lognormal_kernel_derivative(Multiindex{1}, {}, 0.1, 0.2, 0.7, 1.1, 1.3);
  const double dy = lognormal_kernel_derivative({}, Multiindex{1}, 0.1, 0.2, 0.7, 1.1, 1.3);
  const double dxy = lognormal_kernel_derivative(Multiindex{1}, Multiindex{1}, 0.1, 0.2, 0.7, 1.1, 1.3);
  EXPECT_NEAR(dx, (p(1.1 + h, 1.3) - p(1.1 - h, 1.3)) / (2 * h), 1e-6);
  EXPECT_NEAR(dy, (p(1.1, 1.3 + h) - p(1.1, 1.3 - h)) / (2 * h), 1e-6);
  const double fd = (p(1.1 + h, 1.3 + h) - p(1.1 + h, 1.3 - h) - p(1.1 - h, 1.3 + h) + p(1.1 - h, 1.3 - h)) / (4 * h * h);
  EXPECT_NEAR(dxy, fd, 1e-4);
}

TEST(BoundedVolModel, Basics) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  EXPECT_DOUBLE_EQ(m.diffusion_at(v1(0.0))(0, 0), 0.5);
  EXPECT_NEAR(*m.ellipticity_eta, 0.01, 1e-15);
  EXPECT_GE(probe_ellipticity(m, 2000, 5.0, 1), *m.ellipticity_eta);
  EXPECT_TRUE(m.flags.B && m.flags.C);
  EXPECT_THROW(make_bounded_vol_model(0.0, 0.4, 0.5), InvalidArgument);
  EXPECT_THROW(make_bounded_vol_model(0.0, 0.5, 0.0), InvalidArgument);
}

TEST(BoundedVolModel, AnalyticJetMatchesFiniteDifferences) {
  const SdeModel m = make_bounded_vol_model(0.05, 0.5, -0.3);
  for (double x : {-1.3, 0.0, 0.4, 2.0}) {
    const auto a = m.coefficient_jet(v1(x));
    const auto f = m.finite_difference_jet(v1(x));
    EXPECT_NEAR(a.db(0, 0), f.db(0, 0), 1e-8);
    EXPECT_NEAR(a.d2b[0](0, 0), f.d2b[0](0, 0), 1e-6);
    EXPECT_NEAR(a.da[0](0, 0), f.da[0](0, 0), 1e-8);
    EXPECT_NEAR(a.d2a[0](0, 0), f.d2a[0](0, 0), 1e-6);
  }
}

TEST(GbmModel, AnalyticJetMatchesFiniteDifferences) {
  const SdeModel m = make_gbm_model(0.1, 0.2);
  const auto a = m.coefficient_jet(v1(1.7));
  const auto f = m.finite_difference_jet(v1(1.7));
  EXPECT_NEAR(a.db(0, 0), f.db(0, 0), 1e-9);
  EXPECT_NEAR(a.da[0](0, 0), f.da[0](0, 0), 1e-9);
  EXPECT_NEAR(a.d2a[0](0, 0), f.d2a[0](0, 0), 1e-6);
}

TEST(Semigroup, DerivativeOfOuMean) {
  // ∂_x E X_t^x = e^{-θt}
  const SdeModel m = make_ou_model(0.5, 1.0);
  const auto r = semigroup_derivative(m, 1.0, TestFunction::identity(), v1(0.3), Multiindex{1});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.value, std::exp(-0.5), 1e-10);
}

TEST(Semigroup, MissingDensity) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  EXPECT_THROW(semigroup_apply(m, 1.0, TestFunction::identity(), v1(0.0)), MissingOracle);
}
