#include "weaklab/error_expansion.hpp"

#include "weaklab/euler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace weaklab {

L2StarCoefficients l2star_coefficients(const SdeModel& model, const Vector& z) {
  const int d = model.dim_d;
  if (d > kMaxDensityDim) throw InvalidArgument("L2* is implemented for d <= 3");
  const CoefficientJet j = model.coefficient_jet(z);
  L2StarCoefficients c;
  c.c1 = Vector::Zero(d);
  c.c2 = Matrix::Zero(d, d);
  c.c3.assign(static_cast<std::size_t>(d), Matrix::Zero(d, d));
  const auto D = static_cast<std::size_t>(d);
  for (int i = 0; i < d; ++i) {
    double v = 0.0;
    for (int k = 0; k < d; ++k) v += j.b[k] * j.db(i, k);
    for (int k = 0; k < d; ++k)
      for (int l = 0; l < d; ++l) v += 0.5 * j.a(k, l) * j.d2b[static_cast<std::size_t>(i)](k, l);
    c.c1[i] = v;
  }
  for (int i = 0; i < d; ++i)
    for (int jj = 0; jj < d; ++jj) {
      double v = 0.0;
      for (int k = 0; k < d; ++k) {
        v += 0.5 * j.b[k] * j.da[static_cast<std::size_t>(k)](i, jj);
        v += j.a(k, jj) * j.db(i, k);
      }
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          v += 0.25 * j.a(k, l) * j.d2a[static_cast<std::size_t>(k) * D + static_cast<std::size_t>(l)](i, jj);
      c.c2(i, jj) = v;
    }
  for (int k = 0; k < d; ++k)
    for (int i = 0; i < d; ++i)
      for (int jj = 0; jj < d; ++jj) {
        double v = 0.0;
        for (int l = 0; l < d; ++l) v += 0.5 * j.a(l, k) * j.da[static_cast<std::size_t>(l)](i, jj);
        c.c3[static_cast<std::size_t>(k)](i, jj) = v;
      }

  for (const auto& g : multiindices(d, 1, 3)) c.g[g] = 0.0;
  for (int i = 0; i < d; ++i) {
    c.g[Multiindex::unit(i)] -= c.c1[i];
    for (int jj = 0; jj < d; ++jj) {
      c.g[Multiindex::unit(i) + Multiindex::unit(jj)] -= c.c2(i, jj);
      for (int k = 0; k < d; ++k)
        c.g[Multiindex::unit(i) + Multiindex::unit(jj) + Multiindex::unit(k)] -= c.c3[static_cast<std::size_t>(k)](i, jj);
    }
  }
  return c;
}

double apply_L2star(const SdeModel& model, const DerivativeOracle& g, const Vector& z) {
  if (!g) throw MissingOracle("apply_L2star needs derivatives of the target up to order 3");
  const L2StarCoefficients c = l2star_coefficients(model, z);
  double v = 0.0;
  for (const auto& [gamma, coef] : c.g)
    if (coef != 0.0) v += coef * g(gamma, z);
  return v;
}

namespace {

using VecFn = std::function<std::vector<double>(const Vector&)>;

struct Stencil {
  std::vector<int> offsets;
  std::vector<double> weights;
  double denom;
  double step;
};

const Stencil& stencil(int order) {
  static const Stencil s1{{2, 1, -1, -2}, {-1, 8, -8, 1}, 12.0, 1e-3};
  static const Stencil s2{{2, 1, 0, -1, -2}, {-1, 16, -30, 16, -1}, 12.0, 3e-3};
  static const Stencil s3{{3, 2, 1, -1, -2, -3}, {-1, 8, -13, 13, -8, 1}, 8.0, 1e-2};
  switch (order) {
    case 1:
      return s1;
    case 2:
      return s2;
    case 3:
      return s3;
    default:
      throw InvalidArgument("finite-difference order must be 1, 2 or 3");
  }
}

// Nested 4th-order central differences, one axis at a time.
std::vector<double> fd_derivative(const VecFn& F, const Vector& z, const Multiindex& nu) {
  if (nu.order() == 0) return F(z);
  int axis = 0;
  while (nu[axis] == 0) ++axis;
  Multiindex rest = nu;
  rest[axis] = 0;
  const Stencil& s = stencil(nu[axis]);
  const double h = s.step * std::max(1.0, std::abs(z[axis]));
  std::vector<double> acc;
  Vector w = z;
  for (std::size_t k = 0; k < s.offsets.size(); ++k) {
    w[axis] = z[axis] + s.offsets[k] * h;
    const std::vector<double> v = fd_derivative(F, w, rest);
    if (acc.empty()) acc.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) acc[i] += s.weights[k] * v[i];
  }
  const double scale = s.denom * std::pow(h, nu[axis]);
  for (double& a : acc) a /= scale;
  return acc;
}

struct Target {
  bool dirac = false;
  Vector y;
  Multiindex beta;
  const TestFunction* f = nullptr;
};

struct InnerTracker {
  double max_error = 0.0;
  bool converged = true;
  void note(const IntegralResult& r) {
    max_error = std::max(max_error, r.error);
    converged = converged && r.converged;
  }
};

PiEvaluation principal_engine(const SdeModel& model, double t, const Vector& x, const Target& target,
                              const Multiindex& alpha, const PrincipalOptions& opt) {
  if (!model.exact_density) throw MissingOracle("model '" + model.name + "' has no exact transition density");
  if (!(t > 0.0) || t > 1.0) throw InvalidArgument("t must lie in (0, 1]");
  if (!(opt.split > 0.0) || !(opt.split < 1.0)) throw InvalidArgument("split fraction must lie in (0, 1)");
  const int d = model.dim_d;
  if (d > kMaxDensityDim) throw InvalidArgument("density-level work is limited to d <= 3");

  const TransitionDensityOracle& oracle = *model.exact_density;
  const std::vector<Multiindex> gammas = multiindices(d, 1, 3);
  const std::vector<Multiindex> nus = multiindices(d, 0, 3);
  const VecFn gfun = [&](const Vector& z) {
    const L2StarCoefficients c = l2star_coefficients(model, z);
    std::vector<double> v(gammas.size());
    for (std::size_t i = 0; i < gammas.size(); ++i) v[i] = c.g.at(gammas[i]);
    return v;
  };

  InnerTracker inner;
  const Multiindex zero{};

  const auto early = [&](double s) {
    const auto ps = oracle.at(s);
    const auto pt = oracle.at(t - s);
    const QuadFrame frame = ps->forward_frame(x);
    const IntegralResult r = integrate_frame(
        frame,
        [&](const Vector& z) {
          const double k = ps->derivative(alpha, zero, x, z);
          if (k == 0.0) return 0.0;
          const std::vector<double> g = gfun(z);
          double acc = 0.0;
          for (std::size_t i = 0; i < gammas.size(); ++i) {
            if (g[i] == 0.0) continue;
            double h;
            if (target.dirac) {
              h = pt->derivative(gammas[i], target.beta, z, target.y);
            } else {
              const IntegralResult hr = semigroup_derivative(model, t - s, *target.f, z, gammas[i], opt.quad);
              inner.note(hr);
              h = hr.value;
            }
            acc += g[i] * h;
          }
          return k * acc;
        },
        opt.quad);
    inner.note(r);
    return r.value;
  };

  const auto late = [&](double s) {
    const auto ps = oracle.at(s);
    const auto pt = oracle.at(t - s);
    const QuadFrame frame = target.dirac ? pt->backward_frame(target.y) : ps->forward_frame(x);
    std::vector<std::vector<double>> dg(nus.size());
    std::vector<double> dp(nus.size());
    const IntegralResult r = integrate_frame(
        frame,
        [&](const Vector& z) {
          double h0;
          if (target.dirac) {
            h0 = pt->derivative(zero, target.beta, z, target.y);
          } else {
            const IntegralResult hr = semigroup_apply_detailed(model, t - s, *target.f, z, opt.quad);
            inner.note(hr);
            h0 = hr.value;
          }
          if (h0 == 0.0) return 0.0;
          bool any = false;
          for (std::size_t k = 0; k < nus.size(); ++k) {
            dg[k] = fd_derivative(gfun, z, nus[k]);
            for (double v : dg[k]) any = any || v != 0.0;
          }
          if (!any) return 0.0;
          for (std::size_t k = 0; k < nus.size(); ++k) dp[k] = ps->derivative(alpha, nus[k], x, z);
          const auto idx = [&](const Multiindex& m) {
            return static_cast<std::size_t>(std::find(nus.begin(), nus.end(), m) - nus.begin());
          };
          double acc = 0.0;
          for (std::size_t i = 0; i < gammas.size(); ++i) {
            const Multiindex& gamma = gammas[i];
            const double sign = (gamma.order() % 2) ? -1.0 : 1.0;
            for (const Multiindex& kappa : sub_multiindices(gamma)) {
              const double gd = dg[idx(gamma - kappa)][i];
              if (gd == 0.0) continue;
              acc += sign * multi_binomial(gamma, kappa) * gd * dp[idx(kappa)];
            }
          }
          return acc * h0;
        },
        opt.quad);
    inner.note(r);
    return r.value;
  };

  const double split = opt.split * t;
  const IntegralResult lo = integrate_interval(early, 0.0, split, opt.tol, opt.max_depth);
  const IntegralResult hi = integrate_interval(late, split, t, opt.tol, opt.max_depth);

  PiEvaluation out;
  out.value = 0.5 * (lo.value + hi.value);
  out.quad_error = 0.5 * (lo.error + hi.error) + 0.5 * t * inner.max_error;
  // Stalled inner rules are accepted below the outer tolerance.
  const double inner_error = 0.5 * t * inner.max_error;
  const bool inner_ok =
      inner.converged || inner_error <= 100.0 * opt.tol * std::max(1.0, std::abs(out.value));
  out.converged = lo.converged && hi.converged && inner_ok;
  out.t = t;
  out.x = x;
  out.alpha = alpha;
  if (target.dirac) {
    out.y = target.y;
    out.beta = target.beta;
  }
  return out;
}

}  // namespace

PiEvaluation principal_density_pi(const SdeModel& model, double t, const Vector& x, const Vector& y,
                                  const Multiindex& alpha, const Multiindex& beta, const PrincipalOptions& opt) {
  Target target;
  target.dirac = true;
  target.y = y;
  target.beta = beta;
  return principal_engine(model, t, x, target, alpha, opt);
}

PiEvaluation principal_term_Ct(const SdeModel& model, const TestFunction& f, double t, const Vector& x,
                               const PrincipalOptions& opt, CtRoute route, const Multiindex& alpha) {
  if (f.is_dirac()) {
    PiEvaluation r = principal_density_pi(model, t, x, f.point, alpha, f.beta, opt);
    if (f.beta.order() % 2) r.value = -r.value;
    return r;
  }
  if (route == CtRoute::Auto) route = (!f.kinks.empty() && model.dim_d == 1) ? CtRoute::Kernel : CtRoute::Operator;
  if (route == CtRoute::Operator) {
    Target target;
    target.f = &f;
    return principal_engine(model, t, x, target, alpha, opt);
  }
  if (model.dim_d != 1) throw InvalidArgument("the kernel route for C_t is one-dimensional");
  if (!model.exact_density) throw MissingOracle("model '" + model.name + "' has no exact transition density");
  const QuadFrame frame = model.exact_density->at(t)->forward_frame(x);
  double worst = 0.0;
  bool ok = true;
  const auto integrand = [&](double y) {
    const double fy = f.eval(Vector::Constant(1, y));
    if (fy == 0.0) return 0.0;
    const PiEvaluation p = principal_density_pi(model, t, x, Vector::Constant(1, y), alpha, Multiindex{}, opt);
    worst = std::max(worst, p.quad_error);
    ok = ok && p.converged;
    return fy * p.value;
  };
  IntegralResult r;
  if (!f.kinks.empty()) {
    r = integrate_frame_kinked(frame, integrand, f.kinks, opt.tol);
  } else {
    QuadOptions q = opt.quad;
    q.rel_tol = std::max(q.rel_tol, opt.tol);
    r = integrate_frame(frame, [&](const Vector& y) { return integrand(y[0]); }, q);
  }
  PiEvaluation out;
  out.value = r.value;
  out.converged = r.converged && ok;
  // Each π value carries its own error; weight it by the mass of |f| under the frame.
  out.quad_error = r.error + worst * std::max(1.0, std::abs(r.value));
  out.t = t;
  out.x = x;
  out.alpha = alpha;
  return out;
}

double density_error_exact(const SdeModel& model, int n, double t, const Vector& x, const Vector& y,
                           const Multiindex& alpha, const Multiindex& beta) {
  if (!model.affine || !model.exact_density)
    throw InvalidArgument("density_error_exact needs affine drift, constant diffusion and an exact density");
  const AffineGaussianKernel kn = euler_kernel_affine(model, n, t);
  const double exact = model.exact_density->at(t)->derivative(alpha, beta, x, y);
  return kn.derivative(alpha, beta, x, y) - exact;
}

std::pair<double, double> distribution_pairing(const SdeModel& model, const TestFunction& S, int n, double t,
                                               const Vector& x) {
  if (!model.affine || !model.exact_density)
    throw InvalidArgument("distribution_pairing needs affine drift, constant diffusion and an exact density");
  const AffineGaussianKernel kn = euler_kernel_affine(model, n, t);
  if (S.is_dirac()) {
    const double sign = (S.beta.order() % 2) ? -1.0 : 1.0;
    return {sign * kn.derivative(Multiindex{}, S.beta, x, S.point),
            sign * model.exact_density->at(t)->derivative(Multiindex{}, S.beta, x, S.point)};
  }
  const QuadFrame frame = kn.forward_frame(x);
  IntegralResult approx;
  if (!S.kinks.empty() && model.dim_d == 1) {
    approx = expect_frame_kinked(frame, [&](double y) { return S.eval(Vector::Constant(1, y)); }, S.kinks);
  } else {
    approx = expect_frame(frame, S.eval);
  }
  if (!approx.converged) throw QuadratureNotConverged(approx.error, "pairing with p_n did not converge");
  return {approx.value, semigroup_apply(model, t, S, x)};
}

double tail_envelope(const TailBoundSpec& spec, int dim, int order, const TailProbe& p) {
  const double power = -0.5 * (order + dim + spec.l);
  return spec.c1 * std::pow(p.t, power) * std::exp(-spec.c2 * (p.x - p.y).squaredNorm() / p.t);
}

TailReport check_tail_bound(const TailKernel& kernel, const TailBoundSpec& spec, const std::vector<TailProbe>& grid,
                            int order) {
  if (!(spec.c2 > 0.0)) throw InvalidArgument("tail bound needs c2 > 0");
  TailReport rep;
  rep.probes = grid.size();
  for (const auto& p : grid) {
    if (!(p.t > 0.0) || p.t > 1.0) throw InvalidArgument("tail probes need t in (0, 1]");
    const double v = std::abs(kernel(p.t, p.x, p.y));
    const double env = tail_envelope(spec, static_cast<int>(p.x.size()), order, p);
    const double ratio = v == 0.0 ? 0.0 : (env > 0.0 ? v / env : std::numeric_limits<double>::infinity());
    if (ratio > rep.max_violation_ratio || rep.worst.x.size() == 0) {
      rep.max_violation_ratio = std::max(rep.max_violation_ratio, ratio);
      rep.worst = p;
    }
  }
  return rep;
}

TailBoundSpec fit_tail_bound(const TailKernel& kernel, int l, const std::vector<TailProbe>& fit_grid,
                             const std::vector<TailProbe>& validation_grid, const std::vector<double>& c2_candidates,
                             int order) {
  if (fit_grid.empty() || c2_candidates.empty()) throw InvalidArgument("tail fit needs probes and c2 candidates");
  std::vector<double> fit_vals, val_vals;
  for (const auto& p : fit_grid) fit_vals.push_back(std::abs(kernel(p.t, p.x, p.y)));
  for (const auto& p : validation_grid) val_vals.push_back(std::abs(kernel(p.t, p.x, p.y)));
  TailBoundSpec best{l, 0.0, c2_candidates.front()};
  double best_ratio = std::numeric_limits<double>::infinity();
  for (double c2 : c2_candidates) {
    TailBoundSpec s{l, 1.0, c2};
    double m = 0.0;
    for (std::size_t i = 0; i < fit_grid.size(); ++i) {
      const TailProbe& p = fit_grid[i];
      m = std::max(m, fit_vals[i] / tail_envelope(s, static_cast<int>(p.x.size()), order, p));
    }
    s.c1 = 1.05 * m;
    double worst = 0.0;
    for (std::size_t i = 0; i < validation_grid.size(); ++i) {
      const TailProbe& p = validation_grid[i];
      const double env = tail_envelope(s, static_cast<int>(p.x.size()), order, p);
      worst = std::max(worst, val_vals[i] == 0.0 ? 0.0 : val_vals[i] / env);
    }
    if (worst < best_ratio) {
      best_ratio = worst;
      best = s;
    }
  }
  return best;
}

double seminorm_Nq(const DerivativeOracle& kernel, int dim, int q, const std::vector<Vector>& grid) {
  if (q < 0) throw InvalidArgument("seminorm order must be nonnegative");
  const auto idx = multiindices(dim, 0, q);
  double m = 0.0;
  for (const auto& y : grid) {
    for (const auto& b : idx) {
      const double dv = std::abs(kernel(b, y));
      if (dv == 0.0) continue;
      for (const auto& a : idx) {
        double mono = 1.0;
        for (int i = 0; i < dim; ++i) mono *= std::pow(std::abs(y[i]), a[i]);
        m = std::max(m, mono * dv);
      }
    }
  }
  return m;
}

}  // namespace weaklab
