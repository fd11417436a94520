#pragma once

#include "weaklab/gaussian.hpp"
#include "weaklab/quadrature.hpp"
#include "weaklab/test_function.hpp"
#include "weaklab/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace weaklab {

struct AssumptionFlags {
  bool A = false;  // smooth, polynomially growing, bounded first derivatives
  bool B = false;  // smooth and bounded with all derivatives
  bool C = false;  // uniform ellipticity
};

/// Coefficients and their derivatives at one point.
///   db(i, j)          = ∂_j b_i
///   d2b[i](j, k)      = ∂_jk b_i
///   da[k](i, j)       = ∂_k a_ij
///   d2a[k*d + l](i,j) = ∂_kl a_ij
struct CoefficientJet {
  Vector b;
  Matrix db;
  std::vector<Matrix> d2b;
  Matrix a;
  std::vector<Matrix> da;
  std::vector<Matrix> d2a;
};

/// Transition density at one fixed time t: p(t, x, y) and its derivatives,
/// plus quadrature grids adapted to it. Per-time setup (factorizations) is done
/// once when the slice is built.
class DensitySlice {
 public:
  virtual ~DensitySlice() = default;
  virtual double density(const Vector& x, const Vector& y) const = 0;
  /// ∂_x^alpha ∂_y^beta p(t, x, y).
  virtual double derivative(const Multiindex& alpha, const Multiindex& beta, const Vector& x,
                            const Vector& y) const = 0;
  /// Grid for z ↦ p(t, x, z).
  virtual QuadFrame forward_frame(const Vector& x) const = 0;
  /// Grid for z ↦ p(t, z, y).
  virtual QuadFrame backward_frame(const Vector& y) const = 0;
  /// Law of X_t^x when it is Gaussian.
  virtual std::optional<GaussianLaw> law(const Vector&) const { return std::nullopt; }
};

/// p(t, x, y) for a model with known transitions.
struct TransitionDensityOracle {
  std::function<std::shared_ptr<const DensitySlice>(double t)> at;

  double density(double t, const Vector& x, const Vector& y) const { return at(t)->density(x, y); }
  double density_derivs(const Multiindex& alpha, const Multiindex& beta, double t, const Vector& x,
                        const Vector& y) const {
    return at(t)->derivative(alpha, beta, x, y);
  }
  std::optional<GaussianLaw> law(double t, const Vector& x) const { return at(t)->law(x); }
};

/// Slice backed by an affine-mean Gaussian kernel.
class GaussianSlice final : public DensitySlice {
 public:
  explicit GaussianSlice(AffineGaussianKernel kernel) : kernel_(std::move(kernel)) {}
  double density(const Vector& x, const Vector& y) const override { return kernel_.density(x, y); }
  double derivative(const Multiindex& alpha, const Multiindex& beta, const Vector& x,
                    const Vector& y) const override {
    return kernel_.derivative(alpha, beta, x, y);
  }
  QuadFrame forward_frame(const Vector& x) const override { return kernel_.forward_frame(x); }
  QuadFrame backward_frame(const Vector& y) const override { return kernel_.backward_frame(y); }
  std::optional<GaussianLaw> law(const Vector& x) const override { return kernel_.law(x); }
  const AffineGaussianKernel& kernel() const { return kernel_; }

 private:
  AffineGaussianKernel kernel_;
};

/// b(x) = drift_matrix x + drift_offset, σ(x) = diffusion.
struct AffineStructure {
  Matrix drift_matrix;
  Vector drift_offset;
  Matrix diffusion;
};

using CoefficientFn = std::function<void(std::span<const double> x, std::span<double> out)>;
/// Draws X_{s+h} given X_s = x from the exact transition, driven by a standard
/// normal vector z of size r.
using ExactStepFn = std::function<void(std::span<const double> x, double h, std::span<const double> z,
                                       std::span<double> out)>;

struct SdeModel {
  std::string name;
  int dim_d = 1;
  int dim_r = 1;
  CoefficientFn drift;      // out: d
  CoefficientFn diffusion;  // out: d*r, row-major
  /// Analytic coefficient jet; when empty, finite differences are used.
  std::function<CoefficientJet(const Vector&)> jet;
  AssumptionFlags flags;
  std::optional<double> ellipticity_eta;
  std::optional<TransitionDensityOracle> exact_density;
  std::optional<AffineStructure> affine;
  ExactStepFn exact_step;
  /// Free-form note, e.g. that (B)/(C) hold only in transformed coordinates.
  std::string remarks;

  Vector drift_at(const Vector& x) const;
  Matrix diffusion_at(const Vector& x) const;
  Matrix cov_at(const Vector& x) const;  // a = σσ*
  /// Analytic jet when available, else 4th-order central differences with
  /// per-coordinate step max(1e-4, 1e-4 |x_i|).
  CoefficientJet coefficient_jet(const Vector& x) const;
  CoefficientJet finite_difference_jet(const Vector& x) const;
};

/// Constant coefficients: b ≡ b0, σ ≡ s0. Ellipticity is flagged when s0 s0*
/// is nonsingular; `require_ellipticity` turns a singular s0 s0* into an error.
SdeModel make_constant_model(const Vector& b0, const Matrix& s0, bool require_ellipticity = false);
/// dX = -θ X dt + σ0 dB in dimension `dim` (isotropic).
SdeModel make_ou_model(double theta, double sigma0, int dim = 1);
/// dS = μ S dt + σ0 S dB on the positive half-line (natural coordinates).
SdeModel make_gbm_model(double mu, double sigma0);
/// Log-coordinate coefficients of GBM: b = μ - σ0²/2, σ = σ0.
std::pair<double, double> gbm_log_coefficients(double mu, double sigma0);
/// Black–Scholes market in log coordinates (constant-coefficient model).
SdeModel make_black_scholes_log_model(double mu, double sigma0);
/// Log-coordinate model with σ(x) = b0 + c0 tanh(x), b(x) = a0 - σ(x)²/2.
SdeModel make_bounded_vol_model(double a0, double b0, double c0);

/// P_t f(x) = E f(X_t^x) by quadrature against the exact transition density.
/// Dirac kinds return the density (or (-1)^|β| ∂_y^β of it) at the point.
IntegralResult semigroup_apply_detailed(const SdeModel& model, double t, const TestFunction& f, const Vector& x,
                                        const QuadOptions& opt = {});
double semigroup_apply(const SdeModel& model, double t, const TestFunction& f, const Vector& x,
                       const QuadOptions& opt = {});

/// ∂_x^alpha P_t f(x) = ∫ f(y) ∂_x^alpha p(t, x, y) dy.
IntegralResult semigroup_derivative(const SdeModel& model, double t, const TestFunction& f, const Vector& x,
                                    const Multiindex& alpha, const QuadOptions& opt = {});

/// Minimum of ξ*a(x)ξ over `probes` random (x, ξ) with ‖ξ‖ = 1, x ~ N(0, scale² I).
double probe_ellipticity(const SdeModel& model, int probes, double scale, std::uint64_t seed);

/// Derivatives of the lognormal kernel of GBM in natural coordinates.
double lognormal_kernel_derivative(const Multiindex& alpha, const Multiindex& beta, double mu, double sigma0, double t,
                                   double x, double y);

}  // namespace weaklab
