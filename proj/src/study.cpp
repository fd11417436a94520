#include "weaklab/study.hpp"

#include "weaklab/euler.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace weaklab {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config reading

// Reads one JSON object, remembering which keys were consumed so leftovers can
// be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  bool has(const std::string& key) {
    if (!j_.contains(key)) return false;
    seen_.insert(key);
    return true;
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) fail("missing required key '" + key + "'");
    return j_.at(key);
  }

  double number(const std::string& key, std::optional<double> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail("missing required key '" + key + "'");
    }
    const json& v = j_.at(key);
    if (!v.is_number()) fail("'" + key + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail("'" + key + "' must be finite");
    return d;
  }

  std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail("missing required key '" + key + "'");
    }
    const json& v = j_.at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    fail("'" + key + "' must be an integer");
  }

  std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt) {
    if (!has(key)) {
      if (fallback) return *fallback;
      fail("missing required key '" + key + "'");
    }
    const json& v = j_.at(key);
    if (!v.is_string()) fail("'" + key + "' must be a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail("'" + key + "' must be true or false");
    return v.get<bool>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail("unknown key '" + it.key() + "'");
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(where_ + ": " + msg); }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(where + ": expected a finite number");
  return d;
}

Vector as_vector(const json& v, const std::string& where) {
  if (v.is_number()) return Vector::Constant(1, as_number(v, where));
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a number or a non-empty array");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = as_number(v[i], where);
  return out;
}

Matrix as_matrix(const json& v, int rows, const std::string& where) {
  if (v.is_number()) {
    if (rows != 1) throw ConfigError(where + ": a scalar diffusion needs a 1-D drift");
    return Matrix::Constant(1, 1, as_number(v, where));
  }
  if (!v.is_array() || static_cast<int>(v.size()) != rows)
    throw ConfigError(where + ": expected " + std::to_string(rows) + " rows");
  std::size_t cols = 0;
  for (const auto& row : v) {
    if (!row.is_array() || row.empty()) throw ConfigError(where + ": rows must be non-empty arrays");
    if (cols == 0) cols = row.size();
    if (row.size() != cols) throw ConfigError(where + ": ragged rows");
  }
  Matrix m(rows, static_cast<Eigen::Index>(cols));
  for (int i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      m(i, static_cast<Eigen::Index>(j)) = as_number(v[static_cast<std::size_t>(i)][j], where);
  return m;
}

// A list of points in R^dim: a number, a single point, or an array of points.
std::vector<Vector> as_points(const json& v, int dim, const std::string& where) {
  std::vector<Vector> out;
  if (v.is_number()) {
    if (dim != 1) throw ConfigError(where + ": a scalar point needs a 1-D model");
    out.push_back(Vector::Constant(1, as_number(v, where)));
    return out;
  }
  if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a number or a non-empty array");
  if (v[0].is_array()) {
    for (const auto& p : v) {
      Vector x = as_vector(p, where);
      if (x.size() != dim) throw ConfigError(where + ": point has the wrong dimension");
      out.push_back(std::move(x));
    }
    return out;
  }
  const Vector flat = as_vector(v, where);
  if (dim == 1) {
    for (Eigen::Index i = 0; i < flat.size(); ++i) out.push_back(Vector::Constant(1, flat[i]));
  } else {
    if (flat.size() != dim) throw ConfigError(where + ": point has the wrong dimension");
    out.push_back(flat);
  }
  return out;
}

ModelSpec parse_model(const json& j) {
  ObjectReader r(j, "model");
  ModelSpec m;
  m.name = r.string("name");
  if (m.name == "constant") {
    m.drift = as_vector(r.at("drift"), "model.drift");
    m.dim = static_cast<int>(m.drift.size());
    m.diffusion = as_matrix(r.at("diffusion"), m.dim, "model.diffusion");
    m.require_ellipticity = r.boolean("require_ellipticity", false);
  } else if (m.name == "ou") {
    m.theta = r.number("theta");
    m.sigma = r.number("sigma");
    m.dim = static_cast<int>(r.integer("dim", 1));
  } else if (m.name == "gbm" || m.name == "black_scholes") {
    m.mu = r.number("mu", 0.0);
    m.sigma = r.number("sigma");
  } else if (m.name == "bounded_vol") {
    m.a0 = r.number("a0", 0.0);
    m.b0 = r.number("b0");
    m.c0 = r.number("c0");
  } else {
    r.fail("unknown model '" + m.name + "' (constant, ou, gbm, black_scholes, bounded_vol)");
  }
  r.finish();
  if (m.dim < 1 || m.dim > kMaxDensityDim) throw ConfigError("model: dimension must be in [1, 3]");
  return m;
}

FunctionSpec parse_function(const json& j, int dim) {
  ObjectReader r(j, "function");
  FunctionSpec f;
  f.name = r.string("name");
  if (f.name == "identity" || f.name == "squared_norm") {
  } else if (f.name == "power") {
    f.q = static_cast<int>(r.integer("q"));
    if (f.q < 0) r.fail("'q' must be nonnegative");
  } else if (f.name == "constant") {
    f.value = r.number("value", 1.0);
  } else if (f.name == "indicator_above") {
    f.level = r.number("level", 0.0);
  } else if (f.name == "exp_abs") {
    f.rate = r.number("rate", 1.0);
  } else if (f.name == "dirac" || f.name == "dirac_derivative") {
    f.y = as_vector(r.at("y"), "function.y");
    if (f.y.size() != dim) r.fail("'y' has the wrong dimension");
    if (f.name == "dirac_derivative") {
      const json& b = r.at("beta");
      if (b.is_number_integer()) {
        f.beta = {b.get<int>()};
      } else if (b.is_array()) {
        for (const auto& e : b) {
          if (!e.is_number_integer()) r.fail("'beta' entries must be integers");
          f.beta.push_back(e.get<int>());
        }
      } else {
        r.fail("'beta' must be an integer or an array of integers");
      }
      if (static_cast<int>(f.beta.size()) > dim) r.fail("'beta' has too many entries");
    }
  } else {
    r.fail("unknown function '" + f.name + "'");
  }
  r.finish();
  return f;
}

Payoff parse_payoff(const json& j) {
  ObjectReader r(j, "payoff");
  const std::string name = r.string("payoff");
  Payoff p;
  if (name == "call" || name == "put" || name == "digital") {
    const double k = r.number("strike");
    if (!(k > 0.0)) r.fail("'strike' must be positive");
    p = name == "call" ? Payoff::call(k) : name == "put" ? Payoff::put(k) : Payoff::digital(k);
  } else if (name == "constant") {
    p = Payoff::constant(r.number("value", 1.0));
  } else if (name == "identity") {
    p = Payoff::identity();
  } else if (name == "power") {
    const auto q = r.integer("q");
    if (q < 0) r.fail("'q' must be nonnegative");
    p = Payoff::power(static_cast<int>(q));
  } else {
    r.fail("unknown payoff '" + name + "' (call, put, digital, constant, identity, power)");
  }
  r.finish();
  return p;
}

const std::map<std::string, std::map<std::string, double>>& tolerance_defaults() {
  static const std::map<std::string, std::map<std::string, double>> d = {
      {"weak-rate", {{"slope", -1.0}, {"slope_tol_mc", 0.15}, {"slope_tol_det", 0.05}, {"noise", 3.0}}},
      {"romberg",
       {{"slope", -1.0}, {"slope_tol_det", 0.05}, {"romberg_slope", -2.0}, {"romberg_tol", 0.1},
        {"residual", 1e-6}, {"noise", 3.0}}},
      {"bias-limit", {{"ci_multiple", 1.0}, {"abs", 0.0}, {"quadrature", 1e-6}}},
      {"density", {{"floor", 1e-3}, {"scale", 4.0}, {"ratio_lo", 0.5}, {"ratio_hi", 2.0}}},
      {"tailbound", {{"margin", 1.0}}},
      {"greeks",
       {{"slope", -1.0}, {"slope_tol", 0.2}, {"romberg_slope", -1.7}, {"se", 3.0}, {"bump", 0.01}, {"noise", 3.0}}},
      {"moments", {{"stability", 0.2}}},
  };
  return d;
}

const std::vector<std::pair<std::string, std::string>>& catalog() {
  static const std::vector<std::pair<std::string, std::string>> c = {
      {"weak-rate", "fit the 1/n bias law over an Euler ladder (Monte Carlo and exact-law routes)"},
      {"romberg", "bias slope before and after 2 f(X^{2n}) - f(X^n), plus a Richardson residual"},
      {"bias-limit", "Richardson limit of n times the bias against the principal term C_t f"},
      {"density", "n (p_n - p) against the kernel pi on a (t, x, y) grid (affine models)"},
      {"tailbound", "fit and validate Gaussian tail envelopes for pi and p"},
      {"greeks", "price, delta and gamma ladders, Black-Scholes checks, Romberg on prices"},
      {"moments", "uniform-in-n bound on E|X^n_t|^q"},
  };
  return c;
}

Quantity parse_quantity(const std::string& s) {
  if (s == "price") return Quantity::Price;
  if (s == "delta") return Quantity::Delta;
  if (s == "gamma") return Quantity::Gamma;
  throw ConfigError("quantities: unknown quantity '" + s + "' (price, delta, gamma)");
}

// ---------------------------------------------------------------- formatting

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_point(const Vector& x) {
  std::string s;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i) s += ';';
    s += fmt(x[i]);
  }
  return s;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json fit_json(const std::string& label, const RateFit& f) {
  return json{{"label", label},       {"slope", f.slope},   {"intercept", f.intercept},
              {"r_squared", f.r_squared}, {"used", f.used}, {"excluded", f.excluded}};
}

// ---------------------------------------------------------------- study plumbing

struct Context {
  const StudyConfig& cfg;
  SdeModel model;
  StudyReport report;
  json fits = json::array();
  json values = json::object();
  std::uint64_t next_stream = 0;

  explicit Context(const StudyConfig& c) : cfg(c), model(build_model(c.model)) { report.study = c.study; }

  double tol(const std::string& key) const {
    auto it = cfg.tolerances.find(key);
    if (it != cfg.tolerances.end()) return it->second;
    return tolerance_defaults().at(cfg.study).at(key);
  }

  // Every Monte Carlo run gets its own block of 2^40 substreams.
  RngStream stream() { return RngStream{cfg.seed, (++next_stream) << 40}; }

  void gate(std::string name, double value, double threshold, bool passed, std::string detail = {}) {
    report.gates.push_back({std::move(name), value, threshold, passed, std::move(detail)});
  }

  // Gate on |slope - target| <= tol.
  void slope_gate(const std::string& name, const RateFit& fit, double target, double tolerance) {
    const double dev = std::abs(fit.slope - target);
    gate(name, fit.slope, tolerance, dev <= tolerance,
         "target " + fmt(target) + " +/- " + fmt(tolerance));
  }

  StudyRow row(const std::string& f, double t, const Vector& x) const {
    StudyRow r;
    r.study = cfg.study;
    r.model = model.name;
    r.f = f;
    r.t = t;
    r.x = fmt_point(x);
    return r;
  }
};

bool constant_coefficients(const SdeModel& m) {
  return m.affine && m.affine->drift_matrix.cwiseAbs().maxCoeff() == 0.0;
}

std::optional<double> closed_form_truth(const StudyConfig& cfg, const SdeModel& model, const TestFunction& f,
                                        double t, const Vector& x, std::string& oracle) {
  if (cfg.model.name == "gbm" && f.name == "identity") {
    oracle = "closed-form";
    return x[0] * std::exp(cfg.model.mu * t);
  }
  if (model.exact_density && !f.is_dirac()) {
    oracle = "quadrature";
    return semigroup_apply(model, t, f, x);
  }
  return std::nullopt;
}

// E f(X_t^{n,x}) without sampling, when some exact route exists.
std::optional<double> deterministic_expectation(const StudyConfig& cfg, const SdeModel& model, const TestFunction& f,
                                                const Vector& x, int n, double t, std::string& oracle) {
  if (cfg.model.name == "gbm" && f.name == "identity") {
    oracle = "gbm-euler-recursion";
    return gbm_euler_mean(cfg.model.mu, x[0], n, t);
  }
  if (f.is_dirac()) return std::nullopt;
  if (model.affine) {
    oracle = "affine-exact-law";
    const GaussianLaw law = euler_exact_law_affine(model, x, n, t);
    IntegralResult r;
    if (!f.kinks.empty() && model.dim_d == 1) {
      r = expect_frame_kinked(law.frame(), [&](double y) { return f.eval(Vector::Constant(1, y)); }, f.kinks);
    } else {
      r = expect_frame(law.frame(), f.eval);
    }
    if (!r.converged)
      throw QuadratureNotConverged(r.error, "exact-law expectation did not converge at n = " + std::to_string(n));
    return r.value;
  }
  if (model.dim_d == 1 && model.flags.B && model.flags.C) {
    oracle = "euler-chain";
    return euler_chain_expectation(model, f, x[0], n, t);
  }
  return std::nullopt;
}

int reference_level(const StudyConfig& cfg) {
  if (cfg.n_ref > 0) return cfg.n_ref;
  return 16 * *std::max_element(cfg.n_ladder.begin(), cfg.n_ladder.end());
}

// Fits a rate; a noise-only ladder on a constant-coefficient model is the
// exact-scheme case rather than a failure.
std::optional<RateFit> fit_or_gate(Context& ctx, const std::string& label, const std::vector<RatePoint>& pts,
                                   double noise, bool& exact_scheme) {
  // Constant coefficients: Euler is exact, and anything left is rounding or noise.
  if (constant_coefficients(ctx.model)) {
    bool all_below = true;
    for (const auto& p : pts)
      if (std::abs(p.error) > std::max(noise * p.ci_halfwidth, 1e-12)) all_below = false;
    if (all_below) {
      exact_scheme = true;
      ctx.fits.push_back(json{{"label", label}, {"status", "exact-scheme"}});
      ctx.gate(label + ":exact-scheme", 0.0, noise, true, "every bias below the noise gate");
      return std::nullopt;
    }
  }
  try {
    RateFit f = fit_rate(pts, noise);
    ctx.fits.push_back(fit_json(label, f));
    return f;
  } catch (const InsufficientSignal& e) {
    ctx.fits.push_back(json{{"label", label}, {"status", "insufficient-signal"}});
    ctx.gate(label + ":insufficient-signal", 0.0, noise, false, e.what());
    return std::nullopt;
  }
}

std::uint64_t mc_samples(Context& ctx, const TestFunction& f, const Vector& x, double t, const BiasOptions& bo) {
  if (ctx.cfg.n_samples > 0) return ctx.cfg.n_samples;
  return gated_sample_count(ctx.model, f, x, t, ctx.cfg.n_ladder, ctx.stream(), bo, ctx.cfg.sample_cap, std::nullopt,
                            ctx.cfg.pilot);
}

// ---------------------------------------------------------------- studies

void study_weak_rate(Context& ctx, bool romberg_study) {
  const auto& cfg = ctx.cfg;
  if (!cfg.function) throw ConfigError("this study needs a 'function' block");
  const TestFunction f = build_function(*cfg.function, ctx.model.dim_d);
  bool exact_scheme = false;

  for (double t : cfg.times) {
    for (const Vector& x : cfg.points) {
      const std::string cell = "t=" + fmt(t) + ",x=" + fmt_point(x);
      std::string truth_oracle;
      const std::optional<double> truth = closed_form_truth(cfg, ctx.model, f, t, x, truth_oracle);

      if (cfg.monte_carlo()) {
        const std::vector<bool> variants = romberg_study ? std::vector<bool>{false, true} : std::vector<bool>{false};
        for (bool rb : variants) {
          BiasOptions bo;
          bo.truth = truth;
          bo.truth_name = truth_oracle.empty() ? "closed-form" : truth_oracle;
          bo.n_ref = cfg.n_ref;
          bo.romberg = rb;
          const std::uint64_t N = mc_samples(ctx, f, x, t, bo);
          const BiasLadder L = bias_ladder(ctx.model, f, x, t, cfg.n_ladder, N, ctx.stream(), bo);
          for (const auto& p : L.points) {
            StudyRow r = ctx.row(f.name, t, x);
            r.n = p.n;
            r.N = p.estimate.n_samples;
            r.estimate = p.estimate.value;
            r.truth = L.truth;
            r.bias = p.bias.value;
            r.ci_halfwidth = p.bias.ci_halfwidth();
            r.oracle = std::string(rb ? "mc-romberg:" : "mc:") + L.oracle;
            ctx.report.rows.push_back(r);
          }
          const std::string label = std::string(rb ? "mc-romberg" : "mc") + "-slope[" + cell + "]";
          auto fit = fit_or_gate(ctx, label, L.rate_points(), ctx.tol("noise"), exact_scheme);
          if (!fit) continue;
          if (!rb && !romberg_study) ctx.slope_gate(label, *fit, ctx.tol("slope"), ctx.tol("slope_tol_mc"));
        }
      }

      std::string probe_oracle;
      const bool det_available =
          cfg.deterministic() &&
          (cfg.mode == "deterministic" ||
           deterministic_expectation(cfg, ctx.model, f, x, 1, t, probe_oracle).has_value());
      if (det_available) {
        std::string oracle;
        std::map<int, double> cache;
        const auto value = [&](int n) -> double {
          auto it = cache.find(n);
          if (it != cache.end()) return it->second;
          auto v = deterministic_expectation(cfg, ctx.model, f, x, n, t, oracle);
          if (!v) throw ConfigError("no deterministic Euler route for this model and function; use mode 'monte-carlo'");
          return cache[n] = *v;
        };
        double ref = 0.0;
        std::string ref_name;
        if (truth) {
          ref = *truth;
          ref_name = truth_oracle;
        } else {
          const int nr = reference_level(cfg);
          ref = 2.0 * value(nr) - value(nr / 2);
          ref_name = "romberg-n" + std::to_string(nr);
        }
        const std::vector<bool> variants = romberg_study ? std::vector<bool>{false, true} : std::vector<bool>{false};
        for (bool rb : variants) {
          std::vector<RatePoint> pts;
          for (int n : cfg.n_ladder) {
            const double v = rb ? 2.0 * value(2 * n) - value(n) : value(n);
            StudyRow r = ctx.row(f.name, t, x);
            r.n = n;
            r.estimate = v;
            r.truth = ref;
            r.bias = v - ref;
            r.oracle = std::string(rb ? "det-romberg:" : "det:") + oracle + "|" + ref_name;
            ctx.report.rows.push_back(r);
            pts.push_back({n, v - ref, 0.0});
          }
          const std::string label = std::string(rb ? "det-romberg" : "det") + "-slope[" + cell + "]";
          // Deterministic biases only need to stand clear of rounding.
          std::vector<RatePoint> gated;
          for (const auto& p : pts) gated.push_back({p.n, p.error, 1e-13 * std::max(1.0, std::abs(ref))});
          auto fit = fit_or_gate(ctx, label, gated, 1.0, exact_scheme);
          if (!fit) continue;
          if (rb)
            ctx.slope_gate(label, *fit, ctx.tol("romberg_slope"), ctx.tol("romberg_tol"));
          else
            ctx.slope_gate(label, *fit, ctx.tol("slope"), ctx.tol("slope_tol_det"));
        }
        if (romberg_study && cfg.richardson_n > 0) {
          const int n = cfg.richardson_n;
          if (n % 4 != 0) throw ConfigError("richardson_n must be divisible by 4");
          const double r3 = richardson_table({{n / 4, value(n / 4)}, {n / 2, value(n / 2)}, {n, value(n)}}, 3);
          const double resid = std::abs(r3 - ref);
          StudyRow r = ctx.row(f.name, t, x);
          r.n = n;
          r.estimate = r3;
          r.truth = ref;
          r.bias = r3 - ref;
          r.oracle = "det-richardson3:" + oracle + "|" + ref_name;
          ctx.report.rows.push_back(r);
          ctx.values["richardson3_residual[" + cell + "]"] = resid;
          ctx.gate("richardson3-residual[" + cell + "]", resid, ctx.tol("residual"), resid <= ctx.tol("residual"));
        }
      }
    }
  }
  ctx.report.status = exact_scheme ? "exact-scheme" : "";
}

void study_bias_limit(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.function) throw ConfigError("bias-limit needs a 'function' block");
  const TestFunction f = build_function(*cfg.function, ctx.model.dim_d);
  for (double t : cfg.times) {
    for (const Vector& x : cfg.points) {
      const std::string cell = "t=" + fmt(t) + ",x=" + fmt_point(x);
      const PiEvaluation C = principal_term_Ct(ctx.model, f, t, x);
      if (!C.converged)
        throw QuadratureNotConverged(C.quad_error, "principal term quadrature did not converge at " + cell);
      ctx.values["C_t[" + cell + "]"] = json{{"value", C.value}, {"quad_error", C.quad_error}};
      if (cfg.expected) {
        const double dev = std::abs(C.value - *cfg.expected);
        ctx.gate("closed-form[" + cell + "]", dev, ctx.tol("quadrature"), dev <= ctx.tol("quadrature"),
                 "C_t = " + fmt(C.value) + " vs expected " + fmt(*cfg.expected));
      }
      std::string truth_oracle;
      const std::optional<double> truth = closed_form_truth(cfg, ctx.model, f, t, x, truth_oracle);

      if (cfg.monte_carlo()) {
        BiasOptions bo;
        bo.truth = truth;
        bo.truth_name = truth_oracle.empty() ? "closed-form" : truth_oracle;
        bo.n_ref = cfg.n_ref;
        const std::uint64_t N = cfg.n_samples > 0 ? cfg.n_samples : cfg.sample_cap;
        const LimitEstimate L = bias_times_n_limit(ctx.model, f, x, t, cfg.n_ladder, N, ctx.stream(), cfg.order, bo);
        for (std::size_t i = 0; i < cfg.n_ladder.size(); ++i) {
          StudyRow r = ctx.row(f.name, t, x);
          r.n = cfg.n_ladder[i];
          r.N = N;
          r.estimate = L.scaled[i];
          r.truth = C.value;
          r.bias = L.scaled[i] - C.value;
          r.oracle = "mc-scaled-bias:" + L.oracle + "|principal-term";
          ctx.report.rows.push_back(r);
        }
        StudyRow r = ctx.row(f.name, t, x);
        r.n = 0;
        r.N = N;
        r.estimate = L.value;
        r.truth = C.value;
        r.bias = L.value - C.value;
        r.ci_halfwidth = L.ci_halfwidth();
        r.oracle = "mc-richardson" + std::to_string(cfg.order) + ":" + L.oracle + "|principal-term";
        ctx.report.rows.push_back(r);
        const double dev = std::abs(L.value - C.value);
        const double allowed = ctx.tol("ci_multiple") * L.ci_halfwidth() + C.quad_error + ctx.tol("abs");
        ctx.values["limit[" + cell + "]"] = json{{"value", L.value}, {"ci_halfwidth", L.ci_halfwidth()}};
        ctx.gate("limit-vs-principal[" + cell + "]", dev, allowed, dev <= allowed);
      }

      if (cfg.deterministic() && truth) {
        std::string oracle;
        std::vector<std::pair<int, double>> scaled;
        bool ok = true;
        for (int n : cfg.n_ladder) {
          auto v = deterministic_expectation(cfg, ctx.model, f, x, n, t, oracle);
          if (!v) {
            ok = false;
            break;
          }
          scaled.push_back({n, n * (*v - *truth)});
          StudyRow r = ctx.row(f.name, t, x);
          r.n = n;
          r.estimate = n * (*v - *truth);
          r.truth = C.value;
          r.bias = r.estimate - C.value;
          r.oracle = "det-scaled-bias:" + oracle + "|principal-term";
          ctx.report.rows.push_back(r);
        }
        if (ok && !scaled.empty()) {
          const int j = std::min<int>(cfg.order, static_cast<int>(scaled.size()));
          const double lim = richardson_table(scaled, j);
          StudyRow r = ctx.row(f.name, t, x);
          r.estimate = lim;
          r.truth = C.value;
          r.bias = lim - C.value;
          r.oracle = "det-richardson" + std::to_string(j) + ":" + oracle + "|principal-term";
          ctx.report.rows.push_back(r);
          ctx.values["det_limit[" + cell + "]"] = lim;
        }
      }
    }
  }
}

void study_density(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!ctx.model.affine || !ctx.model.exact_density)
    throw ConfigError("density study needs an affine model with an exact density (constant or ou)");
  if (cfg.targets.empty()) throw ConfigError("density study needs a 'y' grid");
  std::vector<int> ns = cfg.n_ladder;
  std::sort(ns.begin(), ns.end());
  std::map<int, double> sup_err, sup_second;
  for (double t : cfg.times)
    for (const Vector& x : cfg.points)
      for (const Vector& y : cfg.targets) {
        const PiEvaluation pi = principal_density_pi(ctx.model, t, x, y, {}, {});
        if (!pi.converged) throw QuadratureNotConverged(pi.quad_error, "pi quadrature did not converge");
        for (int n : ns) {
          const double e = density_error_exact(ctx.model, n, t, x, y, {}, {});
          StudyRow r = ctx.row("dirac(" + fmt_point(y) + ")", t, x);
          r.n = n;
          r.estimate = n * e;
          r.truth = pi.value;
          r.bias = n * e - pi.value;
          r.ci_halfwidth = n * pi.quad_error;
          r.oracle = "affine-exact-law|pi-quadrature";
          ctx.report.rows.push_back(r);
          sup_err[n] = std::max(sup_err[n], std::abs(n * e - pi.value));
          sup_second[n] = std::max(sup_second[n], std::abs(double(n) * n * (e - pi.value / n)));
        }
      }
  const int top = ns.back();
  const double allowed = std::max(ctx.tol("floor"), ctx.tol("scale") / top);
  ctx.gate("sup-error[n=" + std::to_string(top) + "]", sup_err[top], allowed, sup_err[top] <= allowed);
  for (int n : ns) ctx.values["sup_error[n=" + std::to_string(n) + "]"] = sup_err[n];
  if (ns.size() >= 2) {
    const int prev = ns[ns.size() - 2];
    const double ratio = sup_second[top] > 0 ? sup_second[prev] / sup_second[top] : 0.0;
    ctx.values["second_order_ratio"] = ratio;
    ctx.gate("second-order-ratio[" + std::to_string(prev) + "/" + std::to_string(top) + "]", ratio,
             ctx.tol("ratio_hi"), ratio >= ctx.tol("ratio_lo") && ratio <= ctx.tol("ratio_hi"),
             "window [" + fmt(ctx.tol("ratio_lo")) + ", " + fmt(ctx.tol("ratio_hi")) + "]");
  }
}

void study_tailbound(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!ctx.model.exact_density) throw ConfigError("tailbound study needs a model with an exact density");
  if (cfg.targets.empty()) throw ConfigError("tailbound study needs a 'y' grid");
  std::vector<TailProbe> fit, val;
  for (double t : cfg.times)
    for (const Vector& x : cfg.points)
      for (const Vector& y : cfg.targets) fit.push_back({t, x, y});
  val = fit;
  if (ctx.model.dim_d == 1 && cfg.targets.size() > 1) {
    std::vector<double> ys;
    for (const auto& y : cfg.targets) ys.push_back(y[0]);
    std::sort(ys.begin(), ys.end());
    for (double t : cfg.times)
      for (const Vector& x : cfg.points)
        for (std::size_t i = 0; i + 1 < ys.size(); ++i)
          val.push_back({t, x, Vector::Constant(1, 0.5 * (ys[i] + ys[i + 1]))});
  }
  std::vector<double> c2s;
  for (int k = 1; k <= 10; ++k) c2s.push_back(k / 20.0);

  struct Kernel {
    std::string name;
    int l;
    TailKernel k;
  };
  const SdeModel& m = ctx.model;
  std::map<std::tuple<double, std::vector<double>, std::vector<double>>, double> memo;
  const auto key = [](double t, const Vector& x, const Vector& y) {
    return std::make_tuple(t, std::vector<double>(x.data(), x.data() + x.size()),
                           std::vector<double>(y.data(), y.data() + y.size()));
  };
  const std::vector<Kernel> kernels = {
      {"pi", 1,
       [&](double t, const Vector& x, const Vector& y) {
         auto k = key(t, x, y);
         auto it = memo.find(k);
         if (it != memo.end()) return it->second;
         const PiEvaluation pi = principal_density_pi(m, t, x, y, {}, {});
         if (!pi.converged) throw QuadratureNotConverged(pi.quad_error, "pi quadrature did not converge");
         return memo[k] = pi.value;
       }},
      {"p", 0, [&](double t, const Vector& x, const Vector& y) { return m.exact_density->density(t, x, y); }},
  };
  for (const auto& K : kernels) {
    const TailBoundSpec spec = fit_tail_bound(K.k, K.l, fit, val, c2s);
    const TailReport rep = check_tail_bound(K.k, spec, val);
    for (const auto& p : val) {
      const double v = std::abs(K.k(p.t, p.x, p.y));
      const double env = tail_envelope(spec, m.dim_d, 0, p);
      StudyRow r = ctx.row(K.name + "(" + fmt_point(p.y) + ")", p.t, p.x);
      r.estimate = v;
      r.truth = env;
      r.bias = v / env;
      r.oracle = K.name == "pi" ? "pi-quadrature|tail-envelope" : "exact-density|tail-envelope";
      ctx.report.rows.push_back(r);
    }
    ctx.values["envelope[" + K.name + "]"] = json{{"l", spec.l}, {"c1", spec.c1}, {"c2", spec.c2}};
    ctx.gate("tail-margin[" + K.name + "]", rep.max_violation_ratio, ctx.tol("margin"),
             rep.max_violation_ratio <= ctx.tol("margin"),
             "c1 = " + fmt(spec.c1) + ", c2 = " + fmt(spec.c2));
  }
}

void study_greeks(Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (!cfg.payoff) throw ConfigError("greeks study needs a 'payoff' block");
  if (ctx.model.dim_d != 1) throw ConfigError("greeks study supports d = 1");
  const double t = cfg.times.front();
  const Vector v = cfg.points.front();
  const OptionSpec opt{*cfg.payoff, t, v};
  const std::string fname = cfg.payoff->name();
  bool exact_scheme = false;
  PricingLadderOptions lo;
  lo.n_ref = cfg.n_ref > 0 ? cfg.n_ref : 512;
  lo.bump = ctx.tol("bump");
  const std::uint64_t N = cfg.n_samples > 0 ? cfg.n_samples : cfg.sample_cap;

  if (cfg.model.name == "black_scholes" && cfg.monte_carlo()) {
    const int n = cfg.n_ladder.front();
    const GreeksReport g = greeks_euler(ctx.model, opt, n, N, lo.bump, ctx.stream());
    const BlackScholes bs = black_scholes(*cfg.payoff, v[0], cfg.model.mu, cfg.model.sigma, t);
    const double k = ctx.tol("se");
    const auto check = [&](const std::string& q, double est, double se, double truth) {
      StudyRow r = ctx.row(fname, t, v);
      r.n = n;
      r.N = N;
      r.estimate = est;
      r.truth = truth;
      r.bias = est - truth;
      r.ci_halfwidth = 1.96 * se;
      r.oracle = "mc-" + q + "|black-scholes";
      ctx.report.rows.push_back(r);
      const double z = se > 0 ? std::abs(est - truth) / se : (est == truth ? 0.0 : INFINITY);
      ctx.gate("black-scholes-" + q, z, k, z <= k, "in standard errors");
    };
    check("price", g.price.value, g.price.std_error, bs.price);
    check("delta", g.delta[0].value, g.delta[0].std_error, bs.delta);
    check("gamma", g.gamma(0, 0), g.gamma_se(0, 0), bs.gamma);
    ctx.values["bump_halving"] = json{{"consistent", g.halving_consistent},
                                      {"difference", g.halving_difference},
                                      {"se", g.halving_se}};
  }

  for (Quantity q : cfg.quantities) {
    const std::string qn = quantity_name(q);
    if (cfg.monte_carlo()) {
      const PricingLadder L = pricing_ladder(ctx.model, opt, q, cfg.n_ladder, N, ctx.stream(), lo);
      for (const auto& p : L.points) {
        StudyRow r = ctx.row(fname, t, v);
        r.n = p.n;
        r.N = p.estimate.n_samples;
        r.estimate = p.estimate.value;
        r.truth = L.reference.value;
        r.bias = p.bias.value;
        r.ci_halfwidth = p.bias.ci_halfwidth();
        r.oracle = "mc-" + qn + ":" + L.oracle;
        ctx.report.rows.push_back(r);
      }
      const std::string label = "mc-" + qn + "-slope";
      auto fit = fit_or_gate(ctx, label, L.rate_points(), ctx.tol("noise"), exact_scheme);
      if (fit) ctx.slope_gate(label, *fit, ctx.tol("slope"), ctx.tol("slope_tol"));
    }
    if (cfg.deterministic()) {
      for (bool rb : {false, true}) {
        if (rb && q != Quantity::Price) continue;
        PricingLadderOptions lr = lo;
        lr.romberg = rb;
        const PricingLadder L = pricing_ladder_chain(ctx.model, opt, q, cfg.n_ladder, lr);
        std::vector<RatePoint> pts;
        for (const auto& p : L.points) {
          StudyRow r = ctx.row(fname, t, v);
          r.n = p.n;
          r.estimate = p.estimate.value;
          r.truth = L.reference.value;
          r.bias = p.bias.value;
          r.oracle = std::string(rb ? "det-romberg-" : "det-") + qn + ":" + L.oracle;
          ctx.report.rows.push_back(r);
          pts.push_back({p.n, p.bias.value, 1e-12 * std::max(1.0, std::abs(L.reference.value))});
        }
        const std::string label = std::string(rb ? "det-romberg-" : "det-") + qn + "-slope";
        auto fit = fit_or_gate(ctx, label, pts, 1.0, exact_scheme);
        if (!fit) continue;
        if (rb)
          ctx.gate(label, fit->slope, ctx.tol("romberg_slope"), fit->slope <= ctx.tol("romberg_slope"),
                   "must not exceed " + fmt(ctx.tol("romberg_slope")));
        else
          ctx.slope_gate(label, *fit, ctx.tol("slope"), ctx.tol("slope_tol"));
      }
    }
  }
  ctx.report.status = exact_scheme ? "exact-scheme" : "";
}

void study_moments(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const int q = cfg.moment;
  const std::uint64_t N = cfg.n_samples > 0 ? cfg.n_samples : cfg.sample_cap;
  double c = 0.0;
  double worst = 0.0;
  struct Cell {
    double t;
    Vector x;
    std::vector<std::pair<int, Estimate>> e;
  };
  std::vector<Cell> cells;
  for (double t : cfg.times)
    for (const Vector& x : cfg.points) {
      Cell cell{t, x, {}};
      for (int n : cfg.n_ladder) cell.e.push_back({n, empirical_moment(ctx.model, x, n, t, q, N, ctx.stream())});
      cells.push_back(std::move(cell));
    }
  for (const auto& cell : cells) {
    const double w = 1.0 + std::pow(cell.x.norm(), q);
    double mean = 0.0;
    for (const auto& [n, e] : cell.e) mean += e.value / w;
    mean /= static_cast<double>(cell.e.size());
    for (const auto& [n, e] : cell.e) {
      c = std::max(c, e.value / w);
      worst = std::max(worst, std::abs(e.value / w - mean) / mean);
    }
  }
  for (const auto& cell : cells) {
    const double w = 1.0 + std::pow(cell.x.norm(), q);
    for (const auto& [n, e] : cell.e) {
      StudyRow r = ctx.row("norm^" + std::to_string(q), cell.t, cell.x);
      r.n = n;
      r.N = e.n_samples;
      r.estimate = e.value;
      r.truth = c * w;
      r.bias = e.value - c * w;
      r.ci_halfwidth = e.ci_halfwidth();
      r.oracle = "mc-moment|fitted-bound";
      ctx.report.rows.push_back(r);
    }
  }
  ctx.values["c"] = c;
  ctx.values["max_relative_spread"] = worst;
  ctx.gate("moment-constant-stability", worst, ctx.tol("stability"), worst <= ctx.tol("stability"),
           "per (t, x) cell, relative spread of E|X|^q / (1 + |x|^q) across n");
}

}  // namespace

SdeModel build_model(const ModelSpec& spec) {
  try {
    if (spec.name == "constant") return make_constant_model(spec.drift, spec.diffusion, spec.require_ellipticity);
    if (spec.name == "ou") return make_ou_model(spec.theta, spec.sigma, spec.dim);
    if (spec.name == "gbm") return make_gbm_model(spec.mu, spec.sigma);
    if (spec.name == "black_scholes") return make_black_scholes_log_model(spec.mu, spec.sigma);
    if (spec.name == "bounded_vol") return make_bounded_vol_model(spec.a0, spec.b0, spec.c0);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model: ") + e.what());
  } catch (const AssumptionViolation& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  throw ConfigError("model: unknown model '" + spec.name + "'");
}

TestFunction build_function(const FunctionSpec& spec, int dim) {
  if (spec.name == "identity") return TestFunction::identity();
  if (spec.name == "squared_norm") return TestFunction::squared_norm();
  if (spec.name == "power") return TestFunction::power(spec.q);
  if (spec.name == "constant") return TestFunction::constant(spec.value);
  if (spec.name == "indicator_above") return TestFunction::indicator_above(spec.level);
  if (spec.name == "exp_abs") return TestFunction::exp_abs(spec.rate);
  if (spec.name == "dirac") return TestFunction::dirac(spec.y);
  if (spec.name == "dirac_derivative") {
    Multiindex b;
    for (std::size_t i = 0; i < spec.beta.size() && static_cast<int>(i) < dim; ++i)
      b[static_cast<int>(i)] = spec.beta[i];
    return TestFunction::dirac_derivative(spec.y, b);
  }
  throw ConfigError("function: unknown function '" + spec.name + "'");
}

StudyConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ObjectReader r(j, "config");
  StudyConfig c;
  c.study = r.string("study");
  if (!tolerance_defaults().count(c.study)) r.fail("unknown study '" + c.study + "'");
  c.model = parse_model(r.at("model"));
  const int dim = c.model.dim;
  if (r.has("function")) c.function = parse_function(j.at("function"), dim);
  if (r.has("payoff")) c.payoff = parse_payoff(j.at("payoff"));

  const bool needs_ladder = c.study != "tailbound";
  const json empty_ladder = json::array();
  const json& ladder = needs_ladder || r.has("n_ladder") ? r.at("n_ladder") : empty_ladder;
  if (!ladder.is_array() || (needs_ladder && ladder.empty())) r.fail("'n_ladder' must be a non-empty array");
  for (const auto& e : ladder) {
    if (!e.is_number_integer() || e.get<int>() < 1) r.fail("'n_ladder' entries must be positive integers");
    c.n_ladder.push_back(e.get<int>());
  }
  if (!std::is_sorted(c.n_ladder.begin(), c.n_ladder.end()) ||
      std::adjacent_find(c.n_ladder.begin(), c.n_ladder.end()) != c.n_ladder.end())
    r.fail("'n_ladder' must be strictly increasing");

  const auto count = [&](const std::string& key, std::int64_t fallback) -> std::uint64_t {
    const std::int64_t v = r.integer(key, fallback);
    if (v < 0) r.fail("'" + key + "' must be nonnegative");
    return static_cast<std::uint64_t>(v);
  };
  c.n_samples = count("N", 0);
  c.sample_cap = count("sample_cap", 1000000);
  c.pilot = count("pilot", 10000);
  c.seed = count("seed", 1);
  if (c.sample_cap == 0) r.fail("'sample_cap' must be positive");

  if (r.has("t")) {
    const Vector ts = as_vector(j.at("t"), "config.t");
    c.times.assign(ts.data(), ts.data() + ts.size());
  }
  for (double t : c.times)
    if (!(t > 0.0) || t > 1.0) r.fail("'t' values must lie in (0, 1]");

  const bool pricing = c.study == "greeks";
  const std::string xkey = pricing ? "v" : "x";
  if (r.has(xkey)) {
    c.points = as_points(j.at(xkey), dim, "config." + xkey);
  } else {
    c.points.push_back(pricing ? Vector::Ones(dim) : Vector::Zero(dim));
  }
  if (pricing && r.has("x")) r.fail("greeks takes the spot as 'v'");
  if (!pricing && r.has("v")) r.fail("'v' is only used by the greeks study");
  if (r.has("y")) c.targets = as_points(j.at("y"), dim, "config.y");

  c.mode = r.string("mode", "both");
  if (c.mode != "both" && c.mode != "monte-carlo" && c.mode != "deterministic")
    r.fail("'mode' must be monte-carlo, deterministic or both");
  if (r.has("quantities")) {
    const json& q = j.at("quantities");
    if (!q.is_array() || q.empty()) r.fail("'quantities' must be a non-empty array");
    c.quantities.clear();
    for (const auto& e : q) {
      if (!e.is_string()) r.fail("'quantities' entries must be strings");
      c.quantities.push_back(parse_quantity(e.get<std::string>()));
    }
  }
  c.n_ref = static_cast<int>(r.integer("n_ref", 0));
  if (c.n_ref < 0 || c.n_ref % 2) r.fail("'n_ref' must be a nonnegative even integer");
  c.richardson_n = static_cast<int>(r.integer("richardson_n", 0));
  if (c.richardson_n < 0) r.fail("'richardson_n' must be nonnegative");
  c.order = static_cast<int>(r.integer("order", 2));
  if (c.order < 1 || (c.study == "bias-limit" && c.order > static_cast<int>(c.n_ladder.size())))
    r.fail("'order' must be in [1, ladder size]");
  c.moment = static_cast<int>(r.integer("moment", 4));
  if (c.moment < 2 || c.moment > 8 || c.moment % 2) r.fail("'moment' must be even and in [2, 8]");
  if (r.has("expected")) c.expected = as_number(j.at("expected"), "config.expected");

  if (r.has("tolerances")) {
    const json& tj = j.at("tolerances");
    if (!tj.is_object()) r.fail("'tolerances' must be an object");
    const auto& known = tolerance_defaults().at(c.study);
    for (auto it = tj.begin(); it != tj.end(); ++it) {
      if (!known.count(it.key())) r.fail("unknown tolerance '" + it.key() + "' for study '" + c.study + "'");
      c.tolerances[it.key()] = as_number(it.value(), "tolerances." + it.key());
    }
  }
  if (r.has("output")) {
    ObjectReader o(j.at("output"), "output");
    c.csv_path = o.string("csv", "");
    c.json_path = o.string("json", "");
    o.finish();
  }
  r.finish();

  if ((c.study == "weak-rate" || c.study == "romberg" || c.study == "bias-limit") && !c.function)
    throw ConfigError("config: study '" + c.study + "' needs a 'function' block");
  if (c.study == "greeks" && !c.payoff) throw ConfigError("config: study 'greeks' needs a 'payoff' block");
  if ((c.study == "density" || c.study == "tailbound") && c.targets.empty())
    throw ConfigError("config: study '" + c.study + "' needs a 'y' grid");
  return c;
}

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::pair<std::string, std::string>> study_catalog() { return catalog(); }

bool StudyReport::passed() const {
  return std::all_of(gates.begin(), gates.end(), [](const GateResult& g) { return g.passed; });
}

std::vector<std::string> StudyReport::failed_gates() const {
  std::vector<std::string> out;
  for (const auto& g : gates)
    if (!g.passed) out.push_back(g.name);
  return out;
}

StudyReport run_study(const StudyConfig& config) {
  Context ctx(config);
  const std::string& s = config.study;
  if (s == "weak-rate")
    study_weak_rate(ctx, false);
  else if (s == "romberg")
    study_weak_rate(ctx, true);
  else if (s == "bias-limit")
    study_bias_limit(ctx);
  else if (s == "density")
    study_density(ctx);
  else if (s == "tailbound")
    study_tailbound(ctx);
  else if (s == "greeks")
    study_greeks(ctx);
  else if (s == "moments")
    study_moments(ctx);
  else
    throw ConfigError("unknown study '" + s + "'");

  StudyReport& rep = ctx.report;
  const bool ok = rep.passed();
  if (!ok)
    rep.status = "fail";
  else if (rep.status.empty())
    rep.status = "pass";

  json gates = json::array();
  for (const auto& g : rep.gates)
    gates.push_back(json{{"name", g.name}, {"value", g.value}, {"threshold", g.threshold}, {"passed", g.passed},
                         {"detail", g.detail}});
  std::set<std::string> oracles;
  for (const auto& r : rep.rows) oracles.insert(r.oracle);
  json summary = {
      {"study", s},
      {"model", config.model.name},
      {"function", config.function ? build_function(*config.function, config.model.dim).name
                                   : (config.payoff ? config.payoff->name() : "")},
      {"seed", config.seed},
      {"n_ladder", config.n_ladder},
      {"status", rep.status},
      {"passed", ok},
      {"failed_gates", rep.failed_gates()},
      {"gates", gates},
      {"fits", ctx.fits},
      {"values", ctx.values},
      {"oracles", std::vector<std::string>(oracles.begin(), oracles.end())},
      {"rows", rep.rows.size()},
  };
  rep.summary_json = summary.dump(2) + "\n";
  return rep;
}

std::string render_csv(const std::vector<StudyRow>& rows) {
  std::string out = "study,model,f,t,x,n,N,estimate,truth,bias,ci_halfwidth,oracle\n";
  for (const auto& r : rows) {
    out += csv_field(r.study) + ',' + csv_field(r.model) + ',' + csv_field(r.f) + ',' + fmt(r.t) + ',' +
           csv_field(r.x) + ',' + std::to_string(r.n) + ',' + std::to_string(r.N) + ',' + fmt(r.estimate) + ',' +
           (r.truth ? fmt(*r.truth) : std::string()) + ',' + fmt(r.bias) + ',' + fmt(r.ci_halfwidth) + ',' +
           csv_field(r.oracle) + '\n';
  }
  return out;
}

void write_report(const StudyReport& report, const StudyConfig& config) {
  const auto put = [](const std::string& path, const std::string& text) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write report file '" + path + "'");
    out << text;
    if (!out) throw Error("failed while writing '" + path + "'");
  };
  put(config.csv_path, render_csv(report.rows));
  put(config.json_path, report.summary_json);
}

StudyOutcome execute_config(const std::string& json_text, bool write_files) {
  StudyOutcome out;
  try {
    const StudyConfig cfg = parse_config(json_text);
    StudyReport rep = run_study(cfg);
    if (write_files) write_report(rep, cfg);
    if (rep.passed()) {
      out.exit_code = kExitPass;
      out.message = "status: " + rep.status;
    } else {
      out.exit_code = kExitGate;
      std::string names;
      for (const auto& n : rep.failed_gates()) names += (names.empty() ? "" : ", ") + n;
      out.message = "gate failure: " + names;
    }
    out.report = std::move(rep);
  } catch (const ConfigError& e) {
    out.exit_code = kExitConfig;
    out.message = std::string("config error: ") + e.what();
  } catch (const InvalidArgument& e) {
    out.exit_code = kExitConfig;
    out.message = std::string("config error: ") + e.what();
  } catch (const MissingOracle& e) {
    out.exit_code = kExitConfig;
    out.message = std::string("config error: ") + e.what();
  } catch (const UnsupportedFunctional& e) {
    out.exit_code = kExitConfig;
    out.message = std::string("config error: ") + e.what();
  } catch (const AssumptionViolation& e) {
    out.exit_code = kExitConfig;
    out.message = std::string("config error: ") + e.what();
  } catch (const InsufficientSignal& e) {
    out.exit_code = kExitGate;
    out.message = std::string("gate failure (insufficient-signal): ") + e.what();
  } catch (const QuadratureNotConverged& e) {
    out.exit_code = kExitNumerical;
    out.message = std::string("numerical failure: ") + e.what();
  } catch (const SimulationBlowup& e) {
    out.exit_code = kExitNumerical;
    out.message = std::string("numerical failure: ") + e.what();
  } catch (const Error& e) {
    // Report files that cannot be written.
    out.exit_code = kExitConfig;
    out.message = std::string("error: ") + e.what();
  }
  return out;
}

}  // namespace weaklab
