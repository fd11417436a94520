#pragma once

#include "weaklab/error_expansion.hpp"
#include "weaklab/montecarlo.hpp"
#include "weaklab/test_function.hpp"

#include <string>
#include <vector>

namespace weaklab {

enum class PayoffKind { Call, Put, Digital, Constant, Identity, Power };

/// φ applied to the arithmetic mean of the spot coordinates (the spot itself when d = 1).
struct Payoff {
  PayoffKind kind = PayoffKind::Call;
  double strike = 1.0;
  double value = 1.0;  // constant payoff
  int q = 2;           // power payoff

  double operator()(double u) const;
  std::string name() const;
  /// Growth certificate |φ(u)| <= c (1 + u^q) on u > 0.
  std::pair<double, double> growth() const;
  /// Points of non-smoothness in u.
  std::vector<double> kinks() const;

  static Payoff call(double k) { return {PayoffKind::Call, k, 1.0, 2}; }
  static Payoff put(double k) { return {PayoffKind::Put, k, 1.0, 2}; }
  static Payoff digital(double k) { return {PayoffKind::Digital, k, 1.0, 2}; }
  static Payoff constant(double c) { return {PayoffKind::Constant, 0.0, c, 0}; }
  static Payoff identity() { return {PayoffKind::Identity, 0.0, 1.0, 1}; }
  static Payoff power(int q) { return {PayoffKind::Power, 0.0, 1.0, q}; }
};

struct OptionSpec {
  Payoff payoff;
  double maturity = 1.0;
  Vector spot;
};

/// f(x) = φ(mean(exp(x))): the payoff in log coordinates.
TestFunction log_payoff(const Payoff& payoff, int dim);

/// Price by the Euler scheme on the log-underlying.
Estimate price_euler(const SdeModel& market, const OptionSpec& opt, int n, std::uint64_t n_samples,
                     const RngStream& rng);

struct GreeksReport {
  Estimate price;
  std::vector<Estimate> delta;
  Matrix gamma;
  Matrix gamma_se;
  int n_steps = 0;
  std::uint64_t n_samples = 0;
  double bump = 0.01;
  /// Delta at bump h vs h/2 on the same paths: |difference| < 3 SE.
  bool halving_consistent = true;
  double halving_difference = 0.0;
  double halving_se = 0.0;
};

/// Central differences in the spot (relative bump h) with common random numbers.
GreeksReport greeks_euler(const SdeModel& market, const OptionSpec& opt, int n, std::uint64_t n_samples, double bump,
                          const RngStream& rng);

enum class Quantity { Price, Delta, Gamma };
std::string quantity_name(Quantity q);

struct PricingLadderOptions {
  int n_ref = 512;       // reference is 2 Q^{n_ref} - Q^{n_ref / 2} on the same paths
  bool romberg = false;  // measure 2 Q^{2n} - Q^n
  double bump = 0.01;
};

struct PricingLadder {
  Quantity quantity = Quantity::Price;
  std::vector<BiasPoint> points;
  Estimate reference;
  std::string oracle;
  std::vector<RatePoint> rate_points() const;
};

/// Q^n - Q^ref per level (d = 1; Delta and Gamma by CRN central differences).
PricingLadder pricing_ladder(const SdeModel& market, const OptionSpec& opt, Quantity which,
                             const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                             const PricingLadderOptions& lo = {});

/// The same ladder without sampling error: each Q^n comes from the exact law
/// of the Euler chain (euler_chain_expectation), so only quadrature error remains.
PricingLadder pricing_ladder_chain(const SdeModel& market, const OptionSpec& opt, Quantity which,
                                   const std::vector<int>& ladder, const PricingLadderOptions& lo = {},
                                   const ChainOptions& co = {});

/// Richardson limit of n (Q^n - Q^ref) over the ladder.
LimitEstimate correction_estimate(const SdeModel& market, const OptionSpec& opt, Quantity which,
                                  const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                                  const PricingLadderOptions& lo = {}, int order = 2);

/// The same correction from the density kernel: C_t f(ln v) and its spot
/// derivatives, f = φ∘exp. Needs an exact transition density (d = 1).
PiEvaluation correction_direct(const SdeModel& market, const OptionSpec& opt, Quantity which,
                               const PrincipalOptions& po = {});

/// Black–Scholes values under drift μ and zero rates.
struct BlackScholes {
  double price, delta, gamma;
};
BlackScholes black_scholes(const Payoff& payoff, double spot, double mu, double sigma, double t);

}  // namespace weaklab
