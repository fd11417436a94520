#include "weaklab/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace weaklab {

namespace {

void require_pointwise(const TestFunction& f) {
  if (f.is_dirac())
    throw UnsupportedFunctional("'" + f.name + "' is a distribution; use the density routines for it");
}

std::string reference_name(BiasReference r) {
  switch (r) {
    case BiasReference::ExactCoupling:
      return "exact-coupling";
    case BiasReference::Romberg:
      return "romberg-reference";
    default:
      return "truth";
  }
}

struct LadderRun {
  BiasLadder ladder;
  std::vector<RunningStats> combos;
};

// Channels: [e_0..e_{m-1}, d_0..d_{m-1}, combos...], e = level estimate, d = e - reference.
LadderRun run_ladder(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                     const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                     const BiasOptions& opt, const std::vector<std::vector<double>>& combos) {
  require_pointwise(f);
  if (ladder.empty()) throw InvalidArgument("bias ladder is empty");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    if (ladder[i] <= ladder[i - 1]) throw InvalidArgument("bias ladder must be strictly increasing");

  LadderRun run;
  BiasLadder& out = run.ladder;
  out.reference = resolve_reference(model, opt);
  out.oracle = out.reference == BiasReference::Truth ? opt.truth_name : reference_name(out.reference);
  if (opt.truth) {
    out.truth = opt.truth;
  } else if (model.exact_density) {
    out.truth = semigroup_apply(model, t, f, x);
    if (out.reference == BiasReference::Truth) out.oracle = "quadrature";
  }
  if (out.reference == BiasReference::Truth && !out.truth)
    throw MissingOracle("no closed-form or quadrature value of E f(X_t^x) for model '" + model.name + "'");

  std::set<int> level_set(ladder.begin(), ladder.end());
  if (opt.romberg)
    for (int n : ladder) level_set.insert(2 * n);
  if (out.reference == BiasReference::Romberg) {
    out.n_ref = opt.n_ref > 0 ? opt.n_ref : 16 * ladder.back();
    level_set.insert(out.n_ref);
    level_set.insert(2 * out.n_ref);
  }
  const std::vector<int> levels(level_set.begin(), level_set.end());
  const auto pos = [&](int n) {
    return static_cast<std::size_t>(std::lower_bound(levels.begin(), levels.end(), n) - levels.begin());
  };
  const bool exact = out.reference == BiasReference::ExactCoupling;
  const std::size_t m = ladder.size();
  const double truth = out.truth.value_or(0.0);
  const BiasReference ref = out.reference;
  const bool romberg = opt.romberg;
  const int n_ref = out.n_ref;

  std::vector<std::size_t> lo(m), hi(m);
  for (std::size_t i = 0; i < m; ++i) {
    lo[i] = pos(ladder[i]);
    hi[i] = romberg ? pos(2 * ladder[i]) : lo[i];
  }
  const std::size_t ref_lo = ref == BiasReference::Romberg ? pos(n_ref) : 0;
  const std::size_t ref_hi = ref == BiasReference::Romberg ? pos(2 * n_ref) : 0;
  const std::size_t ex = levels.size();

  const int channels = static_cast<int>(2 * m + combos.size());
  const auto stats = ladder_statistics(
      model, {x}, t, levels, exact, n_samples, rng, channels,
      [&](std::span<const Vector> e, std::span<double> ch) {
        thread_local std::vector<double> fv;
        fv.resize(e.size());
        for (std::size_t k = 0; k < e.size(); ++k) fv[k] = f.eval(e[k]);
        double reference = truth;
        if (ref == BiasReference::ExactCoupling) reference = fv[ex];
        if (ref == BiasReference::Romberg) reference = 2.0 * fv[ref_hi] - fv[ref_lo];
        for (std::size_t i = 0; i < m; ++i) {
          const double v = romberg ? 2.0 * fv[hi[i]] - fv[lo[i]] : fv[lo[i]];
          ch[i] = v;
          ch[m + i] = v - reference;
        }
        for (std::size_t c = 0; c < combos.size(); ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) acc += combos[c][i] * ch[m + i];
          ch[2 * m + c] = acc;
        }
      });

  for (std::size_t i = 0; i < m; ++i) {
    BiasPoint p;
    p.n = ladder[i];
    p.estimate = Estimate::from(stats[i], ladder[i]);
    p.bias = Estimate::from(stats[m + i], ladder[i]);
    out.points.push_back(p);
  }
  run.combos.assign(stats.begin() + static_cast<std::ptrdiff_t>(2 * m), stats.end());
  return run;
}

}  // namespace

Estimate estimate_expectation(const SdeModel& model, const TestFunction& f, const Vector& x, int n, double t,
                              std::uint64_t n_samples, const RngStream& rng) {
  require_pointwise(f);
  const auto s = ladder_statistics(model, {x}, t, {n}, false, n_samples, rng, 1,
                                   [&](std::span<const Vector> e, std::span<double> out) { out[0] = f.eval(e[0]); });
  return Estimate::from(s[0], n);
}

Estimate romberg_estimate(const SdeModel& model, const TestFunction& f, const Vector& x, int n, double t,
                          std::uint64_t n_samples, const RngStream& rng) {
  require_pointwise(f);
  const auto s = ladder_statistics(model, {x}, t, {n, 2 * n}, false, n_samples, rng, 1,
                                   [&](std::span<const Vector> e, std::span<double> out) {
                                     out[0] = 2.0 * f.eval(e[1]) - f.eval(e[0]);
                                   });
  return Estimate::from(s[0], n);
}

namespace {

double ladder_ratio(const std::vector<int>& ladder) {
  if (ladder.size() < 2) return 2.0;
  const double rho = static_cast<double>(ladder[1]) / ladder[0];
  if (!(rho > 1.0)) throw InvalidArgument("Richardson ladder must be increasing");
  for (std::size_t i = 2; i < ladder.size(); ++i)
    if (static_cast<double>(ladder[i]) / ladder[i - 1] != rho)
      throw InvalidArgument("Richardson ladder must be geometric (n, rn, r^2 n, ...)");
  return rho;
}

// Neville elimination of 1/n^k, k = 1..j-1, over the last j entries.
double neville(const std::vector<double>& v, double rho, int j) {
  std::vector<double> T(v.end() - j, v.end());
  for (int k = 1; k < j; ++k) {
    const double rk = std::pow(rho, k);
    for (int i = j - 1; i >= k; --i)
      T[static_cast<std::size_t>(i)] = (rk * T[static_cast<std::size_t>(i)] - T[static_cast<std::size_t>(i - 1)]) / (rk - 1.0);
  }
  return T.back();
}

}  // namespace

std::vector<double> richardson_weights(const std::vector<int>& ladder, int j) {
  if (j < 1 || j > static_cast<int>(ladder.size())) throw InvalidArgument("Richardson order must be in [1, ladder length]");
  const double rho = ladder_ratio(ladder);
  std::vector<double> w(ladder.size(), 0.0);
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    std::vector<double> unit(ladder.size(), 0.0);
    unit[i] = 1.0;
    w[i] = neville(unit, rho, j);
  }
  return w;
}

double richardson_table(const std::vector<std::pair<int, double>>& values, int j) {
  if (j < 1 || j > static_cast<int>(values.size())) throw InvalidArgument("Richardson order must be in [1, ladder length]");
  std::vector<int> ladder;
  std::vector<double> v;
  for (const auto& [n, val] : values) {
    ladder.push_back(n);
    v.push_back(val);
  }
  return neville(v, ladder_ratio(ladder), j);
}

RateFit fit_rate(const std::vector<RatePoint>& measurements, double noise_factor, int min_points) {
  RateFit fit;
  fit.points = measurements;
  for (std::size_t i = 1; i < measurements.size(); ++i)
    if (measurements[i].n <= measurements[i - 1].n) throw InvalidArgument("rate points must be strictly increasing in n");
  std::vector<RatePoint> kept;
  for (const auto& p : measurements) {
    if (p.n > 0 && std::abs(p.error) > noise_factor * p.ci_halfwidth && p.error != 0.0) {
      kept.push_back(p);
      fit.used.push_back(p.n);
    } else {
      fit.excluded.push_back(p.n);
    }
  }
  if (static_cast<int>(kept.size()) < min_points)
    throw InsufficientSignal("only " + std::to_string(kept.size()) + " of " + std::to_string(measurements.size()) +
                             " points clear the noise gate; raise N or widen the n range");
  const bool weighted = std::all_of(kept.begin(), kept.end(), [](const RatePoint& p) { return p.ci_halfwidth > 0.0; });
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : kept) {
    const double w = weighted ? std::pow(std::abs(p.error) / p.ci_halfwidth, 2) : 1.0;
    const double lx = std::log(static_cast<double>(p.n)), ly = std::log(std::abs(p.error));
    sw += w;
    sx += w * lx;
    sy += w * ly;
    sxx += w * lx * lx;
    sxy += w * lx * ly;
  }
  const double mx = sx / sw, my = sy / sw;
  const double vxx = sxx / sw - mx * mx;
  fit.slope = (sxy / sw - mx * my) / vxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0, ss_tot = 0;
  for (const auto& p : kept) {
    const double w = weighted ? std::pow(std::abs(p.error) / p.ci_halfwidth, 2) : 1.0;
    const double lx = std::log(static_cast<double>(p.n)), ly = std::log(std::abs(p.error));
    ss_res += w * std::pow(ly - fit.intercept - fit.slope * lx, 2);
    ss_tot += w * std::pow(ly - my, 2);
  }
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

double gbm_euler_mean(double mu, double x, int n, double t) {
  double m = x;
  for (int k = 0; k < grid_steps(n, t); ++k) m *= 1.0 + mu * grid_step_length(n, t, k);
  return m;
}

std::vector<RatePoint> BiasLadder::rate_points() const {
  std::vector<RatePoint> r;
  for (const auto& p : points) r.push_back({p.n, p.bias.value, p.bias.ci_halfwidth()});
  return r;
}

BiasReference resolve_reference(const SdeModel& model, const BiasOptions& opt) {
  if (opt.reference != BiasReference::Auto) {
    if (opt.reference == BiasReference::ExactCoupling && !model.exact_step)
      throw MissingOracle("model '" + model.name + "' has no exact transition sampler");
    return opt.reference;
  }
  if (model.exact_step) return BiasReference::ExactCoupling;
  if (opt.truth || model.exact_density) return BiasReference::Truth;
  return BiasReference::Romberg;
}

BiasLadder bias_ladder(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                       const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                       const BiasOptions& opt) {
  return run_ladder(model, f, x, t, ladder, n_samples, rng, opt, {}).ladder;
}

LimitEstimate bias_times_n_limit(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                                 const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                                 int order, const BiasOptions& opt) {
  if (opt.romberg) throw InvalidArgument("bias_times_n_limit works on the plain Euler bias");
  const std::vector<double> w = richardson_weights(ladder, order);
  std::vector<double> combo(ladder.size());
  for (std::size_t i = 0; i < ladder.size(); ++i) combo[i] = w[i] * ladder[i];
  const LadderRun run = run_ladder(model, f, x, t, ladder, n_samples, rng, opt, {combo});
  LimitEstimate out;
  out.value = run.combos[0].mean;
  out.std_error = run.combos[0].std_error();
  out.oracle = run.ladder.oracle;
  for (const auto& p : run.ladder.points) out.scaled.push_back(p.n * p.bias.value);
  return out;
}

std::uint64_t samples_for_bias(double pilot_sd, double predicted_bias, std::uint64_t cap) {
  if (!(std::abs(predicted_bias) > 0.0)) return cap;
  const double n = std::ceil(std::pow(1.96 * pilot_sd / (std::abs(predicted_bias) / 5.0), 2));
  if (!(n < static_cast<double>(cap))) return cap;
  return std::max<std::uint64_t>(2, static_cast<std::uint64_t>(n));
}

std::uint64_t gated_sample_count(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                                 const std::vector<int>& ladder, const RngStream& rng, const BiasOptions& opt,
                                 std::uint64_t cap, std::optional<double> coefficient, std::uint64_t pilot) {
  // The pilot uses its own substreams so the main run stays independent of it.
  const RngStream pilot_rng = rng.substream(std::uint64_t{1} << 62);
  const BiasLadder pl = bias_ladder(model, f, x, t, ladder, pilot, pilot_rng, opt);
  const int power = opt.romberg ? 2 : 1;
  const double c = coefficient ? *coefficient
                               : pl.points.front().bias.value * std::pow(static_cast<double>(pl.points.front().n), power);
  std::uint64_t n = 2;
  for (const auto& p : pl.points) {
    const double sd = p.bias.std_error * std::sqrt(static_cast<double>(p.bias.n_samples));
    n = std::max(n, samples_for_bias(sd, c / std::pow(static_cast<double>(p.n), power), cap));
  }
  return n;
}

}  // namespace weaklab
