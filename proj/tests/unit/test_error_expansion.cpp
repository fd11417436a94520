#include "weaklab/error_expansion.hpp"
#include "weaklab/euler.hpp"
#include "weaklab/montecarlo.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace weaklab;

namespace {
Vector v1(double x) { return Vector::Constant(1, x); }

// Derivatives of sin.
double sin_deriv(const Multiindex& g, const Vector& z) {
  switch (g.order() % 4) {
    case 0: return std::sin(z[0]);
    case 1: return std::cos(z[0]);
    case 2: return -std::sin(z[0]);
    default: return -std::cos(z[0]);
  }
}

double square_deriv(const Multiindex& g, const Vector& z) {
  switch (g.order()) {
    case 0: return z[0] * z[0];
    case 1: return 2 * z[0];
    case 2: return 2.0;
    default: return 0.0;
  }
}
}  // namespace

TEST(L2Star, VanishesForConstantCoefficients) {
  Matrix s(2, 2);
  s << 1.0, 0.2, 0.0, 0.7;
  const SdeModel m = make_constant_model(Vector::Constant(2, 0.3), s);
  Vector z(2);
  z << 0.4, -1.0;
  const auto c = l2star_coefficients(m, z);
  for (const auto& [g, v] : c.g) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(apply_L2star(m, [](const Multiindex&, const Vector&) { return 1.0; }, z), 0.0);
}

TEST(L2Star, OuClosedForm) {
  const double theta = 0.7, sigma = 1.3;
  const SdeModel m = make_ou_model(theta, sigma);
  for (double z : {-1.0, 0.0, 0.5, 2.0}) {
    const double expected = -theta * theta * z * std::cos(z) + theta * sigma * sigma * (-std::sin(z));
    EXPECT_NEAR(apply_L2star(m, sin_deriv, v1(z)), expected, 1e-12);
  }
  const SdeModel unit = make_ou_model(1.0, 1.0);
  EXPECT_NEAR(apply_L2star(unit, square_deriv, v1(1.0)), 0.0, 1e-14);
}

TEST(L2Star, FiniteDifferenceJetAgrees) {
  SdeModel m = make_bounded_vol_model(0.05, 0.5, 0.3);
  const double analytic = apply_L2star(m, sin_deriv, v1(0.4));
  m.jet = nullptr;
  EXPECT_NEAR(apply_L2star(m, sin_deriv, v1(0.4)), analytic, 1e-6);
}

TEST(PrincipalTerm, ConstantModelIsZero) {
  const SdeModel m = make_constant_model(v1(0.3), Matrix::Constant(1, 1, 0.8));
  const auto c = principal_term_Ct(m, TestFunction::power(3), 1.0, v1(0.2));
  EXPECT_EQ(c.value, 0.0);
  const auto p = principal_density_pi(m, 0.5, v1(0.0), v1(0.3), {}, {});
  EXPECT_EQ(p.value, 0.0);
  EXPECT_EQ(p.quad_error, 0.0);
}

TEST(PrincipalTerm, GbmIdentityMatchesMomentRecursion) {
  const SdeModel m = make_gbm_model(0.1, 0.2);
  const auto c = principal_term_Ct(m, TestFunction::identity(), 1.0, v1(1.0));
  EXPECT_TRUE(c.converged);
  EXPECT_NEAR(c.value, -std::exp(0.1) * 0.01 / 2, 1e-6);
}

TEST(PrincipalTerm, OuSquareMatchesAffineRecursion) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const double exact = semigroup_apply(m, 1.0, TestFunction::power(2), v1(1.0));
  std::vector<std::pair<int, double>> scaled;
  for (int n : {64, 128, 256}) {
    const GaussianLaw law = euler_exact_law_affine(m, v1(1.0), n, 1.0);
    scaled.push_back({n, n * (law.cov(0, 0) + law.mean[0] * law.mean[0] - exact)});
  }
  const double limit = richardson_table(scaled, 3);
  const auto op = principal_term_Ct(m, TestFunction::power(2), 1.0, v1(1.0), {}, CtRoute::Operator);
  const auto ker = principal_term_Ct(m, TestFunction::power(2), 1.0, v1(1.0), {}, CtRoute::Kernel);
  EXPECT_NEAR(op.value, limit, 1e-6);
  EXPECT_NEAR(ker.value, op.value, 1e-7);
}

TEST(PrincipalDensity, OuMatchesExtrapolatedDensityError) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  std::vector<std::pair<int, double>> scaled;
  for (int n : {64, 128, 256}) scaled.push_back({n, n * density_error_exact(m, n, 1.0, v1(1.0), v1(1.0), {}, {})});
  const auto pi = principal_density_pi(m, 1.0, v1(1.0), v1(1.0), {}, {});
  EXPECT_TRUE(pi.converged);
  EXPECT_NEAR(pi.value, richardson_table(scaled, 3), std::max(1e-9, 4.0 / 256));
  PrincipalOptions o;
  o.split = 1.0 / 3.0;
  EXPECT_NEAR(principal_density_pi(m, 1.0, v1(1.0), v1(1.0), {}, {}, o).value, pi.value, 1e-9);
}

TEST(DensityError, ConstantModelIsExactlyZero) {
  const SdeModel m = make_constant_model(v1(0.3), Matrix::Constant(1, 1, 0.8));
  for (int n : {1, 7})
    EXPECT_NEAR(density_error_exact(m, n, 0.7, v1(0.1), v1(0.9), Multiindex{1}, Multiindex{1}), 0.0, 1e-14);
}

TEST(DensityError, OuFourSteps) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const auto pdf = [](double mean, double var, double y) {
    return std::exp(-0.5 * (y - mean) * (y - mean) / var) / std::sqrt(2 * std::numbers::pi * var);
  };
  const double vn = 0.25 * (1 + 0.5625 + 0.31640625 + 0.177978515625);
  const double expected = pdf(0.31640625, vn, 1.0) - pdf(std::exp(-1.0), (1 - std::exp(-2.0)) / 2, 1.0);
  EXPECT_NEAR(density_error_exact(m, 4, 1.0, v1(1.0), v1(1.0), {}, {}), expected, 1e-14);
}

TEST(DensityError, ScaledErrorIsCauchy) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  double prev = 0.0;
  for (int n = 64; n <= 512; n *= 2) {
    const double s = n * density_error_exact(m, n, 1.0, v1(0.0), v1(0.5), {}, {});
    if (n > 64) EXPECT_LT(std::abs(s - prev), 4.0 / n);
    prev = s;
  }
}

TEST(TailBound, HeatKernelDominatesItself) {
  const double a = 0.64;
  const SdeModel m = make_constant_model(v1(0.0), Matrix::Constant(1, 1, 0.8));
  const TailKernel k = [&](double t, const Vector& x, const Vector& y) { return m.exact_density->density(t, x, y); };
  std::vector<TailProbe> grid;
  for (double t : {0.125, 0.5, 1.0})
    for (double y = -4; y <= 4; y += 0.5) grid.push_back({t, v1(0.0), v1(y)});
  const TailBoundSpec spec{0, 1.0 / std::sqrt(2 * std::numbers::pi * a), 0.99 / (2 * a)};
  EXPECT_LE(check_tail_bound(k, spec, grid).max_violation_ratio, 1.0 + 1e-12);
  const TailKernel zero = [](double, const Vector&, const Vector&) { return 0.0; };
  EXPECT_EQ(check_tail_bound(zero, spec, grid).max_violation_ratio, 0.0);
}

TEST(TailBound, OuPiFittedEnvelope) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const TailKernel k = [&](double t, const Vector& x, const Vector& y) {
    return principal_density_pi(m, t, x, y, {}, {}).value;
  };
  std::vector<TailProbe> fit, val;
  for (double t : {0.125, 0.25, 0.5, 1.0}) {
    for (double y : {-4.0, -2.0, 0.0, 1.0, 3.0}) fit.push_back({t, v1(0.0), v1(y)});
    for (double y : {-5.0, -3.0, -1.0, 0.5, 2.0, 5.0}) val.push_back({t, v1(0.0), v1(y)});
  }
  std::vector<double> c2;
  for (int i = 1; i <= 10; ++i) c2.push_back(i / 20.0);
  const TailBoundSpec spec = fit_tail_bound(k, 1, fit, val, c2);
  EXPECT_LE(check_tail_bound(k, spec, val).max_violation_ratio, 1.0);
  EXPECT_GT(spec.c1, 0.0);
}

TEST(Seminorm, StandardNormal) {
  std::vector<Vector> grid;
  for (double y = -6; y <= 6; y += 0.25) grid.push_back(v1(y));
  const DerivativeOracle phi = [](const Multiindex& b, const Vector& y) {
    return std_normal_derivative(b, y);
  };
  EXPECT_NEAR(seminorm_Nq(phi, 1, 0, grid), 0.398942, 1e-6);
  EXPECT_EQ(seminorm_Nq([](const Multiindex&, const Vector&) { return 0.0; }, 1, 2, grid), 0.0);
}

TEST(Seminorm, PiScalingIsBoundedInTime) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  std::vector<double> scaled;
  for (double t : {0.125, 0.25, 0.5, 1.0}) {
    std::vector<Vector> grid;
    for (double y = -3; y <= 3; y += 1.0) grid.push_back(v1(y));
    const DerivativeOracle k = [&](const Multiindex& b, const Vector& y) {
      return principal_density_pi(m, t, v1(0.0), y, {}, b).value;
    };
    scaled.push_back(seminorm_Nq(k, 1, 1, grid) * std::pow(t, 1.5));
  }
  // Small t must not blow up relative to t = 1.
  for (double s : scaled) EXPECT_LE(s, 1.5 * scaled.back());
}

TEST(Pairing, DiracMatchesDensityError) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const auto [a, e] = distribution_pairing(m, TestFunction::dirac(v1(0.4)), 16, 1.0, v1(0.2));
  EXPECT_NEAR(a - e, density_error_exact(m, 16, 1.0, v1(0.2), v1(0.4), {}, {}), 1e-15);
}

TEST(Pairing, DiracDerivativeSignConvention) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const auto [a, e] = distribution_pairing(m, TestFunction::dirac_derivative(v1(0.4), Multiindex{1}), 16, 1.0, v1(0.2));
  EXPECT_NEAR(a - e, -density_error_exact(m, 16, 1.0, v1(0.2), v1(0.4), {}, Multiindex{1}), 1e-14);
}

TEST(Pairing, ExponentialGrowthStabilizes) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  double prev = 0.0;
  for (int n : {64, 128, 256}) {
    const auto [a, e] = distribution_pairing(m, TestFunction::exp_abs(), n, 1.0, v1(0.0));
    ASSERT_TRUE(std::isfinite(a) && std::isfinite(e));
    if (n > 64) EXPECT_LT(std::abs(n * (a - e) - prev), 4.0 / n);
    prev = n * (a - e);
  }
}
