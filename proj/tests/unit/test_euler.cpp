#include "weaklab/euler.hpp"
#include "weaklab/montecarlo.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace weaklab;

namespace {
Vector v1(double x) { return Vector::Constant(1, x); }
}  // namespace

TEST(Grid, StepsAndPartialFinalStep) {
  EXPECT_EQ(grid_steps(4, 1.0), 4);
  EXPECT_EQ(grid_steps(4, 0.3), 2);
  EXPECT_DOUBLE_EQ(grid_step_length(4, 0.3, 0), 0.25);
  EXPECT_NEAR(grid_step_length(4, 0.3, 1), 0.05, 1e-15);
  EXPECT_EQ(grid_steps(10, 0.5), 5);
}

TEST(Euler, SingleStepIsOneFrozenIncrement) {
  const SdeModel m = make_bounded_vol_model(0.1, 0.5, 0.4);
  const RngStream rng{3, 0};
  const BrownianSlice s = brownian_slice(rng, 1, 1.0, 1);
  ASSERT_EQ(s.steps(), 1);
  const double x = 0.2;
  const double expected = x + m.drift_at(v1(x))[0] + m.diffusion_at(v1(x))(0, 0) * s.increments[0];
  EXPECT_NEAR(simulate_euler(m, v1(x), 1, 1.0, rng).value[0], expected, 1e-15);
}

TEST(Euler, IncrementVariance) {
  double acc = 0.0;
  const int paths = 20000;
  for (int p = 0; p < paths; ++p) {
    const BrownianSlice s = brownian_slice(RngStream{5, static_cast<std::uint64_t>(p)}, 4, 0.3, 1);
    acc += s.increments[1] * s.increments[1];
  }
  EXPECT_NEAR(acc / paths, 0.05, 0.05 * 5 * std::sqrt(2.0 / paths));
}

TEST(Euler, CoarseIncrementsArePairSums) {
  const BrownianSlice fine = brownian_slice(RngStream{1, 2}, 16, 1.0, 2);
  const BrownianSlice coarse = coarsen(fine, 2);
  ASSERT_EQ(coarse.steps(), 8);
  for (int k = 0; k < 8; ++k)
    for (int j = 0; j < 2; ++j)
      EXPECT_EQ(coarse.step(k)[j], fine.step(2 * k)[j] + fine.step(2 * k + 1)[j]);
}

TEST(Euler, CoupledFineLevelMatchesStandaloneRun) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  const RngStream rng{8, 1};
  const auto [coarse, fine] = simulate_coupled(m, v1(0.1), 8, 1.0, rng);
  EXPECT_EQ(fine.value[0], simulate_euler(m, v1(0.1), 16, 1.0, rng).value[0]);
  EXPECT_EQ(coarse.n, 8);
  EXPECT_EQ(fine.n, 16);
}

TEST(Euler, ConstantModelCouplingIsExact) {
  const SdeModel m = make_constant_model(v1(0.3), Matrix::Constant(1, 1, 0.8));
  for (std::uint64_t p = 0; p < 50; ++p) {
    const auto [c, f] = simulate_coupled(m, v1(1.0), 5, 1.0, RngStream{2, p});
    EXPECT_NEAR(c.value[0], f.value[0], 1e-13);
  }
}

TEST(Euler, ConstantModelEndpointLawKolmogorovSmirnov) {
  const SdeModel m = make_constant_model(v1(0.3), Matrix::Constant(1, 1, 0.8));
  const int N = 100000;
  std::vector<double> xs(N);
  for (int p = 0; p < N; ++p) xs[p] = simulate_euler(m, v1(1.0), 7, 1.0, RngStream{4, static_cast<std::uint64_t>(p)}).value[0];
  std::sort(xs.begin(), xs.end());
  double D = 0.0;
  for (int i = 0; i < N; ++i) {
    const double F = normal_cdf((xs[i] - 1.3) / 0.8);
    D = std::max({D, std::abs(F - double(i) / N), std::abs(F - double(i + 1) / N)});
  }
  // Kolmogorov critical value at level 1e-3.
  EXPECT_LT(D, 1.949 / std::sqrt(double(N)));
}

TEST(Euler, GbmCoupledEndpointsAreStronglyCorrelated) {
  const SdeModel m = make_gbm_model(0.1, 0.2);
  const int N = 20000;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int p = 0; p < N; ++p) {
    const auto [c, f] = simulate_coupled(m, v1(1.0), 64, 1.0, RngStream{6, static_cast<std::uint64_t>(p)});
    const double a = c.value[0], b = f.value[0];
    sx += a, sy += b, sxx += a * a, syy += b * b, sxy += a * b;
  }
  const double cov = sxy / N - sx * sy / N / N;
  const double corr = cov / std::sqrt((sxx / N - sx * sx / N / N) * (syy / N - sy * sy / N / N));
  EXPECT_GT(corr, 0.99);
}

TEST(Euler, BlowupIsReported) {
  SdeModel m = make_ou_model(1.0, 1.0);
  m.drift = [](std::span<const double> x, std::span<double> out) { out[0] = 1e200 * x[0] * x[0]; };
  EXPECT_THROW(simulate_euler(m, v1(1e100), 4, 1.0, RngStream{1, 1}), SimulationBlowup);
}

TEST(AffineLaw, ConstantModelMatchesExactLaw) {
  const SdeModel m = make_constant_model(v1(0.3), Matrix::Constant(1, 1, 0.8));
  const GaussianLaw a = euler_exact_law_affine(m, v1(1.0), 7, 0.6);
  const auto e = m.exact_density->law(0.6, v1(1.0));
  EXPECT_NEAR(a.mean[0], e->mean[0], 1e-15);
  EXPECT_NEAR(a.cov(0, 0), e->cov(0, 0), 1e-15);
}

TEST(AffineLaw, OuRecursionAtFourSteps) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const GaussianLaw a = euler_exact_law_affine(m, v1(1.0), 4, 1.0);
  EXPECT_NEAR(a.mean[0], 0.31640625, 1e-15);
  EXPECT_NEAR(a.cov(0, 0), 0.25 * (1 + 0.5625 + 0.31640625 + 0.177978515625), 1e-15);
}

TEST(AffineLaw, OuMeanMatchesMonteCarlo) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  const int n = 8;
  const Estimate e = estimate_expectation(m, TestFunction::identity(), v1(1.0), n, 1.0, 1000000, RngStream{10, 0});
  EXPECT_LT(std::abs(e.value - std::pow(1.0 - 1.0 / n, n)), 3 * e.std_error);
}

TEST(Moments, ConstantAndOuSecondMoments) {
  const SdeModel c = make_constant_model(v1(0.0), Matrix::Identity(1, 1));
  const Estimate e = empirical_moment(c, v1(0.0), 4, 1.0, 2, 200000, RngStream{12, 0});
  EXPECT_LT(std::abs(e.value - 1.0), 3 * e.std_error);
  const SdeModel ou = make_ou_model(1.0, 1.0);
  const GaussianLaw law = euler_exact_law_affine(ou, v1(1.0), 8, 1.0);
  const Estimate o = empirical_moment(ou, v1(1.0), 8, 1.0, 2, 200000, RngStream{12, 1});
  EXPECT_LT(std::abs(o.value - (law.cov(0, 0) + law.mean[0] * law.mean[0])), 3 * o.std_error);
  EXPECT_THROW(empirical_moment(ou, v1(1.0), 8, 1.0, 3, 10, RngStream{}), InvalidArgument);
}

TEST(Chain, MatchesAffineLawOnOu) {
  const SdeModel m = make_ou_model(1.0, 1.0);
  for (int n : {1, 2, 5, 32}) {
    const GaussianLaw law = euler_exact_law_affine(m, v1(1.0), n, 1.0);
    EXPECT_NEAR(euler_chain_expectation(m, TestFunction::power(2), 1.0, n, 1.0),
                law.cov(0, 0) + law.mean[0] * law.mean[0], 1e-12);
  }
}

TEST(Chain, PartialFinalStep) {
  const SdeModel m = make_ou_model(0.7, 0.9);
  const GaussianLaw law = euler_exact_law_affine(m, v1(-0.4), 3, 0.55);
  EXPECT_NEAR(euler_chain_expectation(m, TestFunction::identity(), -0.4, 3, 0.55), law.mean[0], 1e-12);
}

TEST(Chain, AgreesWithMonteCarloOnBoundedVol) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  const TestFunction f = TestFunction::indicator_above(0.1);
  const double chain = euler_chain_expectation(m, f, 0.0, 6, 1.0);
  const Estimate e = estimate_expectation(m, f, v1(0.0), 6, 1.0, 400000, RngStream{14, 0});
  EXPECT_LT(std::abs(chain - e.value), 3.5 * e.std_error);
}
