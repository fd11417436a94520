#include "weaklab/pricing.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace weaklab;

namespace {
OptionSpec option(const Payoff& p, double spot, double t = 1.0) { return {p, t, Vector::Constant(1, spot)}; }

double slope_of(const PricingLadder& l) {
  std::vector<RatePoint> pts = l.rate_points();
  for (auto& p : pts) p.ci_halfwidth = 1e-13;
  return fit_rate(pts, 1.0).slope;
}
}  // namespace

TEST(Payoffs, ValuesKinksAndGrowth) {
  EXPECT_EQ(Payoff::call(1.0)(1.5), 0.5);
  EXPECT_EQ(Payoff::put(1.0)(1.5), 0.0);
  EXPECT_EQ(Payoff::digital(1.0)(1.5), 1.0);
  EXPECT_EQ(Payoff::call(1.0).kinks(), std::vector<double>{1.0});
  EXPECT_TRUE(Payoff::power(3).kinks().empty());
  const auto [c, q] = Payoff::call(2.0).growth();
  for (double u : {0.1, 1.0, 3.0, 50.0}) EXPECT_LE(Payoff::call(2.0)(u), c * (1 + std::pow(u, q)));
}

TEST(BlackScholesFormula, DeltaAndGammaMatchFiniteDifferences) {
  for (const Payoff& p : {Payoff::call(1.1), Payoff::put(0.9), Payoff::digital(1.0), Payoff::power(3)}) {
    const double h = 1e-4;
    const auto at = [&](double s) { return black_scholes(p, s, 0.05, 0.2, 1.0); };
    const BlackScholes mid = at(1.0), up = at(1.0 + h), dn = at(1.0 - h);
    EXPECT_NEAR(mid.delta, (up.price - dn.price) / (2 * h), 1e-7) << p.name();
    EXPECT_NEAR(mid.gamma, (up.delta - dn.delta) / (2 * h), 1e-6) << p.name();
  }
}

TEST(BlackScholesFormula, PutCallParity) {
  const BlackScholes c = black_scholes(Payoff::call(1.2), 1.0, 0.03, 0.25, 0.7);
  const BlackScholes p = black_scholes(Payoff::put(1.2), 1.0, 0.03, 0.25, 0.7);
  EXPECT_NEAR(c.price - p.price, std::exp(0.03 * 0.7) - 1.2, 1e-14);
  EXPECT_NEAR(c.delta - p.delta, std::exp(0.03 * 0.7), 1e-14);
}

TEST(EulerGreeks, BlackScholesWithinStandardErrors) {
  const SdeModel bs = make_black_scholes_log_model(0.05, 0.2);
  const OptionSpec opt = option(Payoff::call(1.0), 1.0);
  const GreeksReport g = greeks_euler(bs, opt, 4, 400000, 0.01, RngStream{11, 0});
  const BlackScholes ref = black_scholes(opt.payoff, 1.0, 0.05, 0.2, 1.0);
  EXPECT_LE(std::abs(g.price.value - ref.price), 3 * g.price.std_error);
  EXPECT_LE(std::abs(g.delta[0].value - ref.delta), 3 * g.delta[0].std_error);
  EXPECT_LE(std::abs(g.gamma(0, 0) - ref.gamma), 3 * g.gamma_se(0, 0) + 1e-3 * ref.gamma);
  EXPECT_TRUE(g.halving_consistent);
}

TEST(EulerGreeks, ConstantPayoffHasNoSensitivity) {
  const SdeModel bs = make_black_scholes_log_model(0.05, 0.2);
  const GreeksReport g = greeks_euler(bs, option(Payoff::constant(1.0), 1.3), 8, 20000, 0.01, RngStream{3, 0});
  EXPECT_EQ(g.price.value, 1.0);
  EXPECT_EQ(g.delta[0].value, 0.0);
  EXPECT_EQ(g.gamma(0, 0), 0.0);
}

TEST(EulerPricing, CommonRandomNumbersAreDeterministic) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  const RngStream rng{5, 7};
  const Estimate a = price_euler(m, option(Payoff::call(1.0), 1.0), 16, 50000, rng);
  const Estimate b = price_euler(m, option(Payoff::call(1.0), 1.0), 16, 50000, rng);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(EulerPricing, PathwiseParity) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  const RngStream rng{5, 7};
  const double call = price_euler(m, option(Payoff::call(1.1), 1.0), 16, 50000, rng).value;
  const double put = price_euler(m, option(Payoff::put(1.1), 1.0), 16, 50000, rng).value;
  const double fwd = price_euler(m, option(Payoff::identity(), 1.0), 16, 50000, rng).value;
  EXPECT_NEAR(call - put, fwd - 1.1, 1e-12);
}

TEST(EulerPricing, IdentityDeltaIsForwardOverSpot) {
  const SdeModel bs = make_black_scholes_log_model(0.05, 0.2);
  const GreeksReport g = greeks_euler(bs, option(Payoff::identity(), 1.5), 4, 50000, 0.01, RngStream{9, 0});
  EXPECT_NEAR(g.delta[0].value, g.price.value / 1.5, 1e-12);
}

TEST(ChainLadder, BlackScholesHasNoBias) {
  const SdeModel bs = make_black_scholes_log_model(0.05, 0.2);
  PricingLadderOptions lo;
  lo.n_ref = 64;
  const PricingLadder l = pricing_ladder_chain(bs, option(Payoff::call(1.0), 1.0), Quantity::Price, {2, 4, 8}, lo);
  for (const auto& p : l.points) EXPECT_NEAR(p.bias.value, 0.0, 1e-8);
  EXPECT_NEAR(l.reference.value, black_scholes(Payoff::call(1.0), 1.0, 0.05, 0.2, 1.0).price, 1e-8);
}

TEST(ChainLadder, TanhCallPriceConvergesAtFirstOrder) {
  const SdeModel m = make_bounded_vol_model(0.0, 0.5, 0.4);
  PricingLadderOptions lo;
  lo.n_ref = 256;
  const PricingLadder l = pricing_ladder_chain(m, option(Payoff::call(1.0), 1.0), Quantity::Price, {4, 8, 16, 32}, lo);
  EXPECT_EQ(l.oracle, "euler-chain");
  EXPECT_NEAR(slope_of(l), -1.0, 0.2);
  lo.romberg = true;
  const PricingLadder r = pricing_ladder_chain(m, option(Payoff::call(1.0), 1.0), Quantity::Price, {4, 8, 16, 32}, lo);
  EXPECT_LE(slope_of(r), -1.7);
}

TEST(Correction, VanishesForBlackScholes) {
  const SdeModel bs = make_black_scholes_log_model(0.05, 0.2);
  for (Quantity q : {Quantity::Price, Quantity::Delta})
    EXPECT_NEAR(correction_direct(bs, option(Payoff::call(1.0), 1.0), q).value, 0.0, 1e-12);
}

TEST(Correction, MonteCarloLimitAgreesWithKernelRoute) {
  const SdeModel m = make_ou_model(0.5, 0.3);
  const OptionSpec opt = option(Payoff::power(2), 1.0);
  const PiEvaluation direct = correction_direct(m, opt, Quantity::Price);
  const LimitEstimate mc = correction_estimate(m, opt, Quantity::Price, {4, 8, 16}, 400000, RngStream{21, 0}, {}, 3);
  EXPECT_LE(std::abs(mc.value - direct.value), 4 * mc.std_error + direct.quad_error);
}
