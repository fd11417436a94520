#include "weaklab/pricing.hpp"

#include "weaklab/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace weaklab {

double Payoff::operator()(double u) const {
  switch (kind) {
    case PayoffKind::Call:
      return std::max(u - strike, 0.0);
    case PayoffKind::Put:
      return std::max(strike - u, 0.0);
    case PayoffKind::Digital:
      return u > strike ? 1.0 : 0.0;
    case PayoffKind::Constant:
      return value;
    case PayoffKind::Identity:
      return u;
    case PayoffKind::Power:
      return std::pow(u, q);
  }
  return 0.0;
}

std::string Payoff::name() const {
  switch (kind) {
    case PayoffKind::Call:
      return "call";
    case PayoffKind::Put:
      return "put";
    case PayoffKind::Digital:
      return "digital";
    case PayoffKind::Constant:
      return "constant";
    case PayoffKind::Identity:
      return "identity";
    case PayoffKind::Power:
      return "power" + std::to_string(q);
  }
  return "?";
}

std::pair<double, double> Payoff::growth() const {
  switch (kind) {
    case PayoffKind::Call:
      return {1.0 + strike, 1.0};
    case PayoffKind::Put:
      return {strike, 0.0};
    case PayoffKind::Digital:
      return {1.0, 0.0};
    case PayoffKind::Constant:
      return {std::abs(value), 0.0};
    case PayoffKind::Identity:
      return {1.0, 1.0};
    case PayoffKind::Power:
      return {1.0, static_cast<double>(q)};
  }
  return {1.0, 0.0};
}

std::vector<double> Payoff::kinks() const {
  if (kind == PayoffKind::Call || kind == PayoffKind::Put || kind == PayoffKind::Digital) return {strike};
  return {};
}

TestFunction log_payoff(const Payoff& payoff, int dim) {
  const auto [c, q] = payoff.growth();
  TestFunction f = TestFunction::polynomial(
      payoff.name(), [payoff](const Vector& x) { return payoff(x.array().exp().mean()); }, c, q);
  if (dim == 1)
    for (double k : payoff.kinks())
      if (k > 0.0) f.kinks.push_back(std::log(k));
  return f;
}

namespace {

void check_option(const SdeModel& market, const OptionSpec& opt) {
  if (opt.spot.size() != market.dim_d) throw InvalidArgument("spot has the wrong dimension");
  for (int i = 0; i < opt.spot.size(); ++i)
    if (!(opt.spot[i] > 0.0)) throw InvalidArgument("spot must be strictly positive");
  if (!(opt.maturity > 0.0) || opt.maturity > 1.0) throw InvalidArgument("maturity must lie in (0, 1]");
}

Vector log_of(const Vector& v) { return v.array().log().matrix(); }

// Starting points for a quantity (d = 1) and the combination of payoffs.
std::vector<Vector> quantity_starts(Quantity which, double v, double h) {
  switch (which) {
    case Quantity::Price:
      return {Vector::Constant(1, std::log(v))};
    case Quantity::Delta:
      return {Vector::Constant(1, std::log(v * (1 + h))), Vector::Constant(1, std::log(v * (1 - h)))};
    case Quantity::Gamma:
      return {Vector::Constant(1, std::log(v * (1 + h))), Vector::Constant(1, std::log(v)),
              Vector::Constant(1, std::log(v * (1 - h)))};
  }
  return {};
}

double combine(Quantity which, double v, double h, const double* f) {
  switch (which) {
    case Quantity::Price:
      return f[0];
    case Quantity::Delta:
      return (f[0] - f[1]) / (2 * h * v);
    case Quantity::Gamma:
      return (f[0] - 2 * f[1] + f[2]) / ((h * v) * (h * v));
  }
  return 0.0;
}

struct QuantityRun {
  PricingLadder ladder;
  std::vector<RunningStats> combos;
};

QuantityRun run_quantity(const SdeModel& market, const OptionSpec& opt, Quantity which,
                         const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                         const PricingLadderOptions& lo, const std::vector<std::vector<double>>& combos) {
  check_option(market, opt);
  if (market.dim_d != 1) throw InvalidArgument("pricing ladders are implemented for d = 1");
  if (ladder.empty()) throw InvalidArgument("pricing ladder is empty");
  if (lo.n_ref < 2 || lo.n_ref % 2 != 0) throw InvalidArgument("n_ref must be even");
  if (!(lo.bump > 0.0) || lo.bump > 0.1) throw InvalidArgument("bump must lie in (0, 0.1]");
  const double v = opt.spot[0], h = lo.bump;
  const auto starts = quantity_starts(which, v, h);
  const TestFunction f = log_payoff(opt.payoff, 1);

  std::set<int> level_set(ladder.begin(), ladder.end());
  if (lo.romberg)
    for (int n : ladder) level_set.insert(2 * n);
  level_set.insert(lo.n_ref);
  level_set.insert(lo.n_ref / 2);
  const std::vector<int> levels(level_set.begin(), level_set.end());
  const auto pos = [&](int n) {
    return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), n) - levels.begin());
  };
  const std::size_t L = levels.size(), m = ladder.size(), S = starts.size();
  std::vector<std::size_t> lo_i(m), hi_i(m);
  for (std::size_t i = 0; i < m; ++i) {
    lo_i[i] = pos(ladder[i]);
    hi_i[i] = lo.romberg ? pos(2 * ladder[i]) : lo_i[i];
  }
  const std::size_t r_hi = pos(lo.n_ref), r_lo = pos(lo.n_ref / 2);
  const bool romberg = lo.romberg;

  const int channels = static_cast<int>(2 * m + 1 + combos.size());
  const auto stats = ladder_statistics(
      market, starts, opt.maturity, levels, false, n_samples, rng, channels,
      [&](std::span<const Vector> e, std::span<double> ch) {
        thread_local std::vector<double> q, fs;
        q.resize(L);
        fs.resize(S);
        for (std::size_t l = 0; l < L; ++l) {
          for (std::size_t s = 0; s < S; ++s) fs[s] = f.eval(e[s * L + l]);
          q[l] = combine(which, v, h, fs.data());
        }
        const double ref = 2.0 * q[r_hi] - q[r_lo];
        for (std::size_t i = 0; i < m; ++i) {
          const double val = romberg ? 2.0 * q[hi_i[i]] - q[lo_i[i]] : q[lo_i[i]];
          ch[i] = val;
          ch[m + i] = val - ref;
        }
        ch[2 * m] = ref;
        for (std::size_t c = 0; c < combos.size(); ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += combos[c][i] * ch[m + i];
          ch[2 * m + 1 + c] = acc;
        }
      });

  QuantityRun run;
  run.ladder.quantity = which;
  run.ladder.oracle = "romberg-reference n_ref=" + std::to_string(lo.n_ref);
  for (std::size_t i = 0; i < m; ++i)
    run.ladder.points.push_back({ladder[i], Estimate::from(stats[i], ladder[i]), Estimate::from(stats[m + i], ladder[i])});
  run.ladder.reference = Estimate::from(stats[2 * m], lo.n_ref);
  run.combos.assign(stats.begin() + static_cast<std::ptrdiff_t>(2 * m + 1), stats.end());
  return run;
}

}  // namespace

Estimate price_euler(const SdeModel& market, const OptionSpec& opt, int n, std::uint64_t n_samples,
                     const RngStream& rng) {
  check_option(market, opt);
  const TestFunction f = log_payoff(opt.payoff, market.dim_d);
  return estimate_expectation(market, f, log_of(opt.spot), n, opt.maturity, n_samples, rng);
}

GreeksReport greeks_euler(const SdeModel& market, const OptionSpec& opt, int n, std::uint64_t n_samples, double bump,
                          const RngStream& rng) {
  check_option(market, opt);
  if (!(bump > 0.0) || bump > 0.1) throw InvalidArgument("bump must lie in (0, 0.1]");
  const int d = market.dim_d;
  const Vector& v = opt.spot;
  const TestFunction f = log_payoff(opt.payoff, d);

  // Start list: base, ±h e_i, ±h/2 e_0, and (±, ±) pairs for i < j.
  std::vector<Vector> spots{v};
  const auto add = [&](Vector s) {
    spots.push_back(std::move(s));
    return spots.size() - 1;
  };
  std::vector<std::size_t> up(static_cast<std::size_t>(d)), dn(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    Vector a = v, b = v;
    a[i] += bump * v[i];
    b[i] -= bump * v[i];
    up[static_cast<std::size_t>(i)] = add(a);
    dn[static_cast<std::size_t>(i)] = add(b);
  }
  Vector ha = v, hb = v;
  ha[0] += 0.5 * bump * v[0];
  hb[0] -= 0.5 * bump * v[0];
  const std::size_t half_up = add(ha), half_dn = add(hb);
  struct Cross {
    int i, j;
    std::size_t pp, pm, mp, mm;
  };
  std::vector<Cross> cross;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      Cross c{i, j, 0, 0, 0, 0};
      const double hi = bump * v[i], hj = bump * v[j];
      Vector s = v;
      s[i] += hi, s[j] += hj, c.pp = add(s);
      s = v, s[i] += hi, s[j] -= hj, c.pm = add(s);
      s = v, s[i] -= hi, s[j] += hj, c.mp = add(s);
      s = v, s[i] -= hi, s[j] -= hj, c.mm = add(s);
      cross.push_back(c);
    }
  std::vector<Vector> starts;
  for (const auto& s : spots) starts.push_back(log_of(s));

  const int n_gamma = d * (d + 1) / 2;
  const int channels = 1 + d + n_gamma + 1;
  const auto stats = ladder_statistics(
      market, starts, opt.maturity, {n}, false, n_samples, rng, channels,
      [&](std::span<const Vector> e, std::span<double> ch) {
        thread_local std::vector<double> fv;
        fv.resize(e.size());
        for (std::size_t k = 0; k < e.size(); ++k) fv[k] = f.eval(e[k]);
        ch[0] = fv[0];
        int g = 1 + d;
        for (int i = 0; i < d; ++i) {
          const double hi = bump * v[i];
          const auto ui = up[static_cast<std::size_t>(i)], di = dn[static_cast<std::size_t>(i)];
          ch[static_cast<std::size_t>(1 + i)] = (fv[ui] - fv[di]) / (2 * hi);
          ch[static_cast<std::size_t>(g++)] = (fv[ui] - 2 * fv[0] + fv[di]) / (hi * hi);
        }
        for (const auto& c : cross)
          ch[static_cast<std::size_t>(g++)] =
              (fv[c.pp] - fv[c.pm] - fv[c.mp] + fv[c.mm]) / (4 * bump * v[c.i] * bump * v[c.j]);
        const double h0 = bump * v[0];
        ch[static_cast<std::size_t>(channels - 1)] =
            (fv[up[0]] - fv[dn[0]]) / (2 * h0) - (fv[half_up] - fv[half_dn]) / h0;
      });

  GreeksReport rep;
  rep.price = Estimate::from(stats[0], n);
  for (int i = 0; i < d; ++i) rep.delta.push_back(Estimate::from(stats[static_cast<std::size_t>(1 + i)], n));
  rep.gamma = Matrix::Zero(d, d);
  rep.gamma_se = Matrix::Zero(d, d);
  int g = 1 + d;
  for (int i = 0; i < d; ++i, ++g) {
    rep.gamma(i, i) = stats[static_cast<std::size_t>(g)].mean;
    rep.gamma_se(i, i) = stats[static_cast<std::size_t>(g)].std_error();
  }
  for (const auto& c : cross) {
    rep.gamma(c.i, c.j) = rep.gamma(c.j, c.i) = stats[static_cast<std::size_t>(g)].mean;
    rep.gamma_se(c.i, c.j) = rep.gamma_se(c.j, c.i) = stats[static_cast<std::size_t>(g)].std_error();
    ++g;
  }
  rep.n_steps = n;
  rep.n_samples = n_samples;
  rep.bump = bump;
  const auto& hs = stats[static_cast<std::size_t>(channels - 1)];
  rep.halving_difference = hs.mean;
  rep.halving_se = hs.std_error();
  rep.halving_consistent = std::abs(hs.mean) <= 3.0 * hs.std_error() || hs.mean == 0.0;
  return rep;
}

std::string quantity_name(Quantity q) {
  switch (q) {
    case Quantity::Price:
      return "price";
    case Quantity::Delta:
      return "delta";
    case Quantity::Gamma:
      return "gamma";
  }
  return "?";
}

std::vector<RatePoint> PricingLadder::rate_points() const {
  std::vector<RatePoint> r;
  for (const auto& p : points) r.push_back({p.n, p.bias.value, p.bias.ci_halfwidth()});
  return r;
}

PricingLadder pricing_ladder(const SdeModel& market, const OptionSpec& opt, Quantity which,
                             const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                             const PricingLadderOptions& lo) {
  return run_quantity(market, opt, which, ladder, n_samples, rng, lo, {}).ladder;
}

PricingLadder pricing_ladder_chain(const SdeModel& market, const OptionSpec& opt, Quantity which,
                                   const std::vector<int>& ladder, const PricingLadderOptions& lo,
                                   const ChainOptions& co) {
  check_option(market, opt);
  if (market.dim_d != 1) throw InvalidArgument("pricing ladders are implemented for d = 1");
  if (ladder.empty()) throw InvalidArgument("pricing ladder is empty");
  if (lo.n_ref < 2 || lo.n_ref % 2 != 0) throw InvalidArgument("n_ref must be even");
  if (!(lo.bump > 0.0) || lo.bump > 0.1) throw InvalidArgument("bump must lie in (0, 0.1]");
  const double v = opt.spot[0], h = lo.bump, t = opt.maturity;
  const TestFunction f = log_payoff(opt.payoff, 1);
  const std::vector<Vector> starts = quantity_starts(which, v, h);
  std::map<int, double> cache;
  const auto q = [&](int n) {
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    std::vector<double> vals;
    for (const auto& x0 : starts) vals.push_back(euler_chain_expectation(market, f, x0[0], n, t, co));
    return cache[n] = combine(which, v, h, vals.data());
  };
  const auto at = [&](int n) { return lo.romberg ? 2.0 * q(2 * n) - q(n) : q(n); };

  PricingLadder out;
  out.quantity = which;
  out.oracle = "euler-chain";
  out.reference.value = 2.0 * q(lo.n_ref) - q(lo.n_ref / 2);
  out.reference.n_steps = lo.n_ref;
  for (int n : ladder) {
    BiasPoint p;
    p.n = n;
    p.estimate.value = at(n);
    p.estimate.n_steps = n;
    p.bias.value = p.estimate.value - out.reference.value;
    p.bias.n_steps = n;
    out.points.push_back(p);
  }
  return out;
}

LimitEstimate correction_estimate(const SdeModel& market, const OptionSpec& opt, Quantity which,
                                  const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                                  const PricingLadderOptions& lo, int order) {
  if (lo.romberg) throw InvalidArgument("corrections are measured on the plain Euler ladder");
  const std::vector<double> w = richardson_weights(ladder, order);
  std::vector<double> combo(ladder.size());
  for (std::size_t i = 0; i < ladder.size(); ++i) combo[i] = w[i] * ladder[i];
  const QuantityRun run = run_quantity(market, opt, which, ladder, n_samples, rng, lo, {combo});
  LimitEstimate out;
  out.value = run.combos[0].mean;
  out.std_error = run.combos[0].std_error();
  out.oracle = run.ladder.oracle;
  for (const auto& p : run.ladder.points) out.scaled.push_back(p.n * p.bias.value);
  return out;
}

PiEvaluation correction_direct(const SdeModel& market, const OptionSpec& opt, Quantity which,
                               const PrincipalOptions& po) {
  check_option(market, opt);
  if (market.dim_d != 1) throw InvalidArgument("the direct correction route is one-dimensional");
  if (!market.exact_density)
    throw MissingOracle("the direct correction route needs an exact transition density; use the ladder route");
  const TestFunction f = log_payoff(opt.payoff, 1);
  const double v = opt.spot[0];
  const Vector x = Vector::Constant(1, std::log(v));
  const auto at = [&](int k) { return principal_term_Ct(market, f, opt.maturity, x, po, CtRoute::Auto, Multiindex{k}); };
  PiEvaluation out;
  switch (which) {
    case Quantity::Price:
      return at(0);
    case Quantity::Delta: {
      out = at(1);
      out.value /= v;
      out.quad_error /= v;
      return out;
    }
    case Quantity::Gamma: {
      // d²/dv² g(ln v) = (g'' - g') / v²
      const PiEvaluation g1 = at(1), g2 = at(2);
      out = g2;
      out.value = (g2.value - g1.value) / (v * v);
      out.quad_error = (g1.quad_error + g2.quad_error) / (v * v);
      out.converged = g1.converged && g2.converged;
      return out;
    }
  }
  return out;
}

BlackScholes black_scholes(const Payoff& payoff, double spot, double mu, double sigma, double t) {
  if (!(spot > 0.0) || !(sigma > 0.0) || !(t > 0.0)) throw InvalidArgument("Black-Scholes needs S, sigma, t > 0");
  const double st = sigma * std::sqrt(t);
  const double grow = std::exp(mu * t);
  const double K = payoff.strike;
  const auto d1 = [&] { return (std::log(spot / K) + (mu + 0.5 * sigma * sigma) * t) / st; };
  switch (payoff.kind) {
    case PayoffKind::Call: {
      const double a = d1(), b = a - st;
      return {spot * grow * normal_cdf(a) - K * normal_cdf(b), grow * normal_cdf(a),
              grow * normal_pdf(a) / (spot * st)};
    }
    case PayoffKind::Put: {
      const double a = d1(), b = a - st;
      return {K * normal_cdf(-b) - spot * grow * normal_cdf(-a), -grow * normal_cdf(-a),
              grow * normal_pdf(a) / (spot * st)};
    }
    case PayoffKind::Digital: {
      const double a = d1(), b = a - st;
      return {normal_cdf(b), normal_pdf(b) / (spot * st), -normal_pdf(b) * a / (spot * spot * st * st)};
    }
    case PayoffKind::Constant:
      return {payoff.value, 0.0, 0.0};
    case PayoffKind::Identity:
      return {spot * grow, grow, 0.0};
    case PayoffKind::Power: {
      const double q = payoff.q;
      const double m = std::exp(q * mu * t + 0.5 * q * (q - 1) * sigma * sigma * t);
      return {std::pow(spot, q) * m, q * std::pow(spot, q - 1) * m, q * (q - 1) * std::pow(spot, q - 2) * m};
    }
  }
  return {0, 0, 0};
}

}  // namespace weaklab
