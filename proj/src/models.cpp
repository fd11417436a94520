#include "weaklab/models.hpp"

#include "weaklab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace weaklab {

namespace {

CoefficientJet zero_jet(int d) {
  CoefficientJet j;
  j.b = Vector::Zero(d);
  j.db = Matrix::Zero(d, d);
  j.d2b.assign(static_cast<std::size_t>(d), Matrix::Zero(d, d));
  j.a = Matrix::Zero(d, d);
  j.da.assign(static_cast<std::size_t>(d), Matrix::Zero(d, d));
  j.d2a.assign(static_cast<std::size_t>(d * d), Matrix::Zero(d, d));
  return j;
}

// b and a packed into one vector: [b (d), a row-major (d*d)].
Vector packed_coefficients(const SdeModel& m, const Vector& x) {
  const int d = m.dim_d;
  Vector out(d + d * d);
  out.head(d) = m.drift_at(x);
  const Matrix a = m.cov_at(x);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) out[d + i * d + j] = a(i, j);
  return out;
}

double signed_stirling1(int k, int i) {
  // s(k+1, i) = s(k, i-1) - k s(k, i)
  std::vector<std::vector<double>> s(static_cast<std::size_t>(k + 1), std::vector<double>(static_cast<std::size_t>(k + 1), 0.0));
  s[0][0] = 1.0;
  for (int n = 0; n < k; ++n)
    for (int j = 0; j <= n + 1; ++j) {
      const double left = j > 0 ? s[static_cast<std::size_t>(n)][static_cast<std::size_t>(j - 1)] : 0.0;
      const double right = j <= n ? s[static_cast<std::size_t>(n)][static_cast<std::size_t>(j)] : 0.0;
      s[static_cast<std::size_t>(n + 1)][static_cast<std::size_t>(j)] = left - n * right;
    }
  return (i >= 0 && i <= k) ? s[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] : 0.0;
}

double binom(int n, int k) {
  double c = 1.0;
  for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
  return c;
}

class LognormalSlice final : public DensitySlice {
 public:
  LognormalSlice(double mu, double sigma0, double t) : mu_(mu), sigma_(sigma0), t_(t) {}

  double density(const Vector& x, const Vector& y) const override {
    return lognormal_kernel_derivative(Multiindex{}, Multiindex{}, mu_, sigma_, t_, x[0], y[0]);
  }
  double derivative(const Multiindex& alpha, const Multiindex& beta, const Vector& x, const Vector& y) const override {
    return lognormal_kernel_derivative(alpha, beta, mu_, sigma_, t_, x[0], y[0]);
  }
  QuadFrame forward_frame(const Vector& x) const override {
    Vector c(1);
    c[0] = std::log(x[0]) + drift() * t_;
    return QuadFrame{c, Matrix::Constant(1, 1, sigma_ * std::sqrt(t_)), true};
  }
  QuadFrame backward_frame(const Vector& y) const override {
    Vector c(1);
    c[0] = std::log(y[0]) - drift() * t_;
    return QuadFrame{c, Matrix::Constant(1, 1, sigma_ * std::sqrt(t_)), true};
  }

 private:
  double drift() const { return mu_ - 0.5 * sigma_ * sigma_; }
  double mu_, sigma_, t_;
};

TransitionDensityOracle gaussian_oracle(std::function<AffineGaussianKernel(double)> kernel_at) {
  TransitionDensityOracle o;
  o.at = [kernel_at = std::move(kernel_at)](double t) -> std::shared_ptr<const DensitySlice> {
    if (!(t > 0.0)) throw InvalidArgument("transition density needs t > 0");
    return std::make_shared<GaussianSlice>(kernel_at(t));
  };
  return o;
}

}  // namespace

Vector SdeModel::drift_at(const Vector& x) const {
  Vector out(dim_d);
  drift(std::span<const double>(x.data(), static_cast<std::size_t>(dim_d)),
        std::span<double>(out.data(), static_cast<std::size_t>(dim_d)));
  return out;
}

Matrix SdeModel::diffusion_at(const Vector& x) const {
  std::vector<double> buf(static_cast<std::size_t>(dim_d * dim_r));
  diffusion(std::span<const double>(x.data(), static_cast<std::size_t>(dim_d)), buf);
  Matrix s(dim_d, dim_r);
  for (int i = 0; i < dim_d; ++i)
    for (int j = 0; j < dim_r; ++j) s(i, j) = buf[static_cast<std::size_t>(i * dim_r + j)];
  return s;
}

Matrix SdeModel::cov_at(const Vector& x) const {
  const Matrix s = diffusion_at(x);
  return s * s.transpose();
}

CoefficientJet SdeModel::coefficient_jet(const Vector& x) const {
  return jet ? jet(x) : finite_difference_jet(x);
}

CoefficientJet SdeModel::finite_difference_jet(const Vector& x) const {
  const int d = dim_d;
  CoefficientJet j = zero_jet(d);
  const Vector f0 = packed_coefficients(*this, x);
  j.b = f0.head(d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) j.a(r, c) = f0[d + r * d + c];

  Vector h(d);
  for (int i = 0; i < d; ++i) h[i] = std::max(1e-4, 1e-4 * std::abs(x[i]));
  const auto at = [&](int i, double si, int k, double sk) {
    Vector y = x;
    y[i] += si * h[i];
    if (k >= 0) y[k] += sk * h[k];
    return packed_coefficients(*this, y);
  };
  const auto first = [&](int i) -> Vector {
    return (-at(i, 2, -1, 0) + 8.0 * at(i, 1, -1, 0) - 8.0 * at(i, -1, -1, 0) + at(i, -2, -1, 0)) / (12.0 * h[i]);
  };
  std::vector<Vector> d1(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) d1[static_cast<std::size_t>(i)] = first(i);

  const double w[5] = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};  // offsets -2..2
  const auto second = [&](int i, int k) -> Vector {
    if (i == k) {
      return (-at(i, 2, -1, 0) + 16.0 * at(i, 1, -1, 0) - 30.0 * f0 + 16.0 * at(i, -1, -1, 0) - at(i, -2, -1, 0)) /
             (12.0 * h[i] * h[i]);
    }
    Vector acc = Vector::Zero(f0.size());
    for (int a = 0; a < 5; ++a)
      for (int b = 0; b < 5; ++b) {
        if (w[a] == 0.0 || w[b] == 0.0) continue;
        acc += w[a] * w[b] * at(i, a - 2, k, b - 2);
      }
    return acc / (h[i] * h[k]);
  };

  for (int k = 0; k < d; ++k) {
    const Vector& g = d1[static_cast<std::size_t>(k)];
    for (int r = 0; r < d; ++r) j.db(r, k) = g[r];
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) j.da[static_cast<std::size_t>(k)](r, c) = g[d + r * d + c];
  }
  for (int k = 0; k < d; ++k)
    for (int l = k; l < d; ++l) {
      const Vector s = second(k, l);
      for (int r = 0; r < d; ++r) {
        j.d2b[static_cast<std::size_t>(r)](k, l) = s[r];
        j.d2b[static_cast<std::size_t>(r)](l, k) = s[r];
      }
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          j.d2a[static_cast<std::size_t>(k * d + l)](r, c) = s[d + r * d + c];
          j.d2a[static_cast<std::size_t>(l * d + k)](r, c) = s[d + r * d + c];
        }
    }
  return j;
}

SdeModel make_constant_model(const Vector& b0, const Matrix& s0, bool require_ellipticity) {
  const int d = static_cast<int>(b0.size());
  const int r = static_cast<int>(s0.cols());
  if (d < 1 || s0.rows() != d || r < 1) throw InvalidArgument("constant model: shape mismatch");
  const Matrix a = s0 * s0.transpose();
  const double eta = Eigen::SelfAdjointEigenSolver<Matrix>(a).eigenvalues().minCoeff();
  const bool elliptic = eta > 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
  if (require_ellipticity && !elliptic)
    throw AssumptionViolation("constant model: s0 s0* is singular but ellipticity (C) was requested");

  SdeModel m;
  m.name = "constant";
  m.dim_d = d;
  m.dim_r = r;
  m.drift = [b0](std::span<const double>, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = b0[static_cast<Eigen::Index>(i)];
  };
  m.diffusion = [s0, r](std::span<const double>, std::span<double> out) {
    for (Eigen::Index i = 0; i < s0.rows(); ++i)
      for (Eigen::Index j = 0; j < r; ++j) out[static_cast<std::size_t>(i * r + j)] = s0(i, j);
  };
  m.jet = [b0, a, d](const Vector&) {
    CoefficientJet j = zero_jet(d);
    j.b = b0;
    j.a = a;
    return j;
  };
  m.flags = {true, true, elliptic};
  if (elliptic) {
    m.ellipticity_eta = eta;
    m.exact_density = gaussian_oracle([b0, a, d](double t) {
      return AffineGaussianKernel(Matrix::Identity(d, d), b0 * t, a * t);
    });
  }
  m.affine = AffineStructure{Matrix::Zero(d, d), b0, s0};
  m.exact_step = [b0, s0, d, r](std::span<const double> x, double h, std::span<const double> z,
                                std::span<double> out) {
    const double sh = std::sqrt(h);
    for (int i = 0; i < d; ++i) {
      double v = x[static_cast<std::size_t>(i)] + b0[i] * h;
      for (int k = 0; k < r; ++k) v += s0(i, k) * sh * z[static_cast<std::size_t>(k)];
      out[static_cast<std::size_t>(i)] = v;
    }
  };
  return m;
}

SdeModel make_ou_model(double theta, double sigma0, int dim) {
  if (!(theta > 0.0) || !(sigma0 > 0.0)) throw InvalidArgument("OU model needs theta > 0 and sigma > 0");
  if (dim < 1) throw InvalidArgument("OU model needs dim >= 1");
  SdeModel m;
  m.name = "ou";
  m.dim_d = m.dim_r = dim;
  m.drift = [theta](std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = -theta * x[i];
  };
  m.diffusion = [sigma0, dim](std::span<const double>, std::span<double> out) {
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(i * dim + j)] = i == j ? sigma0 : 0.0;
  };
  m.jet = [theta, sigma0, dim](const Vector& x) {
    CoefficientJet j = zero_jet(dim);
    j.b = -theta * x;
    j.db = -theta * Matrix::Identity(dim, dim);
    j.a = sigma0 * sigma0 * Matrix::Identity(dim, dim);
    return j;
  };
  // The drift is unbounded, so (B) fails; (A) and (C) hold.
  m.flags = {true, false, true};
  m.ellipticity_eta = sigma0 * sigma0;
  m.remarks = "drift unbounded: (B) does not hold";
  m.exact_density = gaussian_oracle([theta, sigma0, dim](double t) {
    const double v = sigma0 * sigma0 * (-std::expm1(-2.0 * theta * t)) / (2.0 * theta);
    return AffineGaussianKernel(std::exp(-theta * t) * Matrix::Identity(dim, dim), Vector::Zero(dim),
                                v * Matrix::Identity(dim, dim));
  });
  m.affine = AffineStructure{-theta * Matrix::Identity(dim, dim), Vector::Zero(dim),
                             sigma0 * Matrix::Identity(dim, dim)};
  m.exact_step = [theta, sigma0](std::span<const double> x, double h, std::span<const double> z,
                                 std::span<double> out) {
    const double decay = std::exp(-theta * h);
    const double sd = sigma0 * std::sqrt(-std::expm1(-2.0 * theta * h) / (2.0 * theta));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = decay * x[i] + sd * z[i];
  };
  return m;
}

SdeModel make_gbm_model(double mu, double sigma0) {
  if (!(sigma0 > 0.0)) throw InvalidArgument("GBM model needs sigma > 0");
  SdeModel m;
  m.name = "gbm";
  m.drift = [mu](std::span<const double> x, std::span<double> out) { out[0] = mu * x[0]; };
  m.diffusion = [sigma0](std::span<const double> x, std::span<double> out) { out[0] = sigma0 * x[0]; };
  m.jet = [mu, sigma0](const Vector& x) {
    CoefficientJet j = zero_jet(1);
    const double s2 = sigma0 * sigma0;
    j.b[0] = mu * x[0];
    j.db(0, 0) = mu;
    j.a(0, 0) = s2 * x[0] * x[0];
    j.da[0](0, 0) = 2.0 * s2 * x[0];
    j.d2a[0](0, 0) = 2.0 * s2;
    return j;
  };
  // (B) and (C) hold for the log-transformed coefficients only.
  m.flags = {true, false, false};
  m.remarks = "natural coordinates; (B),(C) hold after the log transform";
  TransitionDensityOracle o;
  o.at = [mu, sigma0](double t) -> std::shared_ptr<const DensitySlice> {
    if (!(t > 0.0)) throw InvalidArgument("transition density needs t > 0");
    return std::make_shared<LognormalSlice>(mu, sigma0, t);
  };
  m.exact_density = std::move(o);
  m.exact_step = [mu, sigma0](std::span<const double> x, double h, std::span<const double> z, std::span<double> out) {
    out[0] = x[0] * std::exp((mu - 0.5 * sigma0 * sigma0) * h + sigma0 * std::sqrt(h) * z[0]);
  };
  return m;
}

std::pair<double, double> gbm_log_coefficients(double mu, double sigma0) {
  return {mu - 0.5 * sigma0 * sigma0, sigma0};
}

SdeModel make_black_scholes_log_model(double mu, double sigma0) {
  if (!(sigma0 > 0.0)) throw InvalidArgument("Black-Scholes model needs sigma > 0");
  const auto [b, s] = gbm_log_coefficients(mu, sigma0);
  SdeModel m = make_constant_model(Vector::Constant(1, b), Matrix::Constant(1, 1, s), true);
  m.name = "black_scholes";
  return m;
}

SdeModel make_bounded_vol_model(double a0, double b0, double c0) {
  if (!(b0 > std::abs(c0)) || !(std::abs(c0) > 0.0))
    throw InvalidArgument("bounded-vol model needs b0 > |c0| > 0");
  SdeModel m;
  m.name = "bounded_vol";
  const auto vol = [b0, c0](double x) { return b0 + c0 * std::tanh(x); };
  m.drift = [a0, vol](std::span<const double> x, std::span<double> out) {
    const double s = vol(x[0]);
    out[0] = a0 - 0.5 * s * s;
  };
  m.diffusion = [vol](std::span<const double> x, std::span<double> out) { out[0] = vol(x[0]); };
  m.jet = [a0, b0, c0](const Vector& x) {
    CoefficientJet j = zero_jet(1);
    const double th = std::tanh(x[0]);
    const double sech2 = 1.0 - th * th;
    const double s = b0 + c0 * th;
    const double s1 = c0 * sech2;
    const double s2 = -2.0 * c0 * sech2 * th;
    const double a = s * s, a1 = 2.0 * s * s1, a2 = 2.0 * s1 * s1 + 2.0 * s * s2;
    j.b[0] = a0 - 0.5 * a;
    j.db(0, 0) = -0.5 * a1;
    j.d2b[0](0, 0) = -0.5 * a2;
    j.a(0, 0) = a;
    j.da[0](0, 0) = a1;
    j.d2a[0](0, 0) = a2;
    return j;
  };
  m.flags = {true, true, true};
  m.ellipticity_eta = (b0 - std::abs(c0)) * (b0 - std::abs(c0));
  return m;
}

double lognormal_kernel_derivative(const Multiindex& alpha, const Multiindex& beta, double mu, double sigma0, double t,
                                   double x, double y) {
  if (!(x > 0.0) || !(y > 0.0)) return 0.0;
  const double s = sigma0 * std::sqrt(t);
  const double kappa = mu - 0.5 * sigma0 * sigma0;
  const double w = (std::log(y) - std::log(x) - kappa * t) / s;
  const double phi = normal_pdf(w);
  if (phi == 0.0) return 0.0;
  const int a = alpha[0], b = beta[0];
  // g^{(m)}(u) for g(u) = phi((u - κt)/s)/s, at u = ln y - ln x.
  const auto gder = [&](int m) { return ((m % 2) ? -1.0 : 1.0) * std::pow(s, -m) * hermite_he(m, w) * phi / s; };
  // ∂_ξ^i ∂_η^j [e^{-η} g(η - ξ)], ξ = ln x, η = ln y.
  const auto D = [&](int i, int j) {
    double acc = 0.0;
    for (int m = 0; m <= j; ++m) acc += binom(j, m) * (((j - m) % 2) ? -1.0 : 1.0) * gder(i + m);
    return ((i % 2) ? -1.0 : 1.0) * acc / y;
  };
  double total = 0.0;
  for (int i = 0; i <= a; ++i) {
    const double si = signed_stirling1(a, i);
    if (si == 0.0) continue;
    for (int j = 0; j <= b; ++j) {
      const double sj = signed_stirling1(b, j);
      if (sj == 0.0) continue;
      total += si * sj * D(i, j);
    }
  }
  return total * std::pow(x, -a) * std::pow(y, -b);
}

IntegralResult semigroup_apply_detailed(const SdeModel& model, double t, const TestFunction& f, const Vector& x,
                                        const QuadOptions& opt) {
  if (!model.exact_density) throw MissingOracle("semigroup_apply: model '" + model.name + "' has no exact density");
  const auto slice = model.exact_density->at(t);
  if (f.kind == TestFunctionKind::Dirac) {
    return IntegralResult{slice->density(x, f.point), 0.0, 0, true};
  }
  if (f.kind == TestFunctionKind::DiracDeriv) {
    const double sign = (f.beta.order() % 2) ? -1.0 : 1.0;
    return IntegralResult{sign * slice->derivative(Multiindex{}, f.beta, x, f.point), 0.0, 0, true};
  }
  const QuadFrame frame = slice->forward_frame(x);
  if (!f.kinks.empty() && model.dim_d == 1) {
    return expect_frame_kinked(frame, [&](double y) { return f.eval(Vector::Constant(1, y)); }, f.kinks);
  }
  return expect_frame(frame, f.eval, opt);
}

double semigroup_apply(const SdeModel& model, double t, const TestFunction& f, const Vector& x,
                       const QuadOptions& opt) {
  const IntegralResult r = semigroup_apply_detailed(model, t, f, x, opt);
  if (!r.converged)
    throw QuadratureNotConverged(r.error, "semigroup_apply: quadrature did not converge (error " +
                                              std::to_string(r.error) + ")");
  return r.value;
}

IntegralResult semigroup_derivative(const SdeModel& model, double t, const TestFunction& f, const Vector& x,
                                    const Multiindex& alpha, const QuadOptions& opt) {
  if (!model.exact_density) throw MissingOracle("semigroup_derivative: model has no exact density");
  const auto slice = model.exact_density->at(t);
  if (f.is_dirac()) {
    const double sign = (f.beta.order() % 2) ? -1.0 : 1.0;
    return IntegralResult{sign * slice->derivative(alpha, f.beta, x, f.point), 0.0, 0, true};
  }
  const QuadFrame frame = slice->forward_frame(x);
  if (!f.kinks.empty() && model.dim_d == 1) {
    return integrate_frame_kinked(
        frame,
        [&](double y) {
          const Vector yy = Vector::Constant(1, y);
          return f.eval(yy) * slice->derivative(alpha, Multiindex{}, x, yy);
        },
        f.kinks);
  }
  return integrate_frame(
      frame, [&](const Vector& y) { return f.eval(y) * slice->derivative(alpha, Multiindex{}, x, y); }, opt);
}

double probe_ellipticity(const SdeModel& model, int probes, double scale, std::uint64_t seed) {
  const RngStream rng{seed, 1};
  const int d = model.dim_d;
  double worst = std::numeric_limits<double>::infinity();
  Vector x(d), xi(d);
  for (int p = 0; p < probes; ++p) {
    const std::uint64_t base = static_cast<std::uint64_t>(p) * static_cast<std::uint64_t>(2 * d);
    for (int i = 0; i < d; ++i) {
      x[i] = scale * rng.normal(base + static_cast<std::uint64_t>(i));
      xi[i] = rng.normal(base + static_cast<std::uint64_t>(d + i));
    }
    xi.normalize();
    worst = std::min(worst, xi.dot(model.cov_at(x) * xi));
  }
  return worst;
}

}  // namespace weaklab
