#pragma once

#include "weaklab/quadrature.hpp"
#include "weaklab/types.hpp"

namespace weaklab {

/// Mean vector and covariance matrix. Construction symmetrizes the covariance
/// and clamps eigenvalues above -tolerance to zero.
struct GaussianLaw {
  Vector mean;
  Matrix cov;

  static GaussianLaw make(Vector mean, Matrix cov, double tolerance = 1e-12);

  int dim() const { return static_cast<int>(mean.size()); }
  double pdf(const Vector& y) const;
  /// ∂_y^beta of the density at y (d <= 3).
  double pdf_derivative(const Multiindex& beta, const Vector& y) const;
  /// Grid that maps standard normal nodes onto this law.
  QuadFrame frame() const;
};

/// Standard normal pdf, cdf and probabilists' Hermite polynomial He_k.
double normal_pdf(double x);
double normal_cdf(double x);
double hermite_he(int k, double x);

/// Gaussian transition kernel whose mean is affine in the starting point:
///   p(x, y) = N(y; gain * x + offset, cov).
/// Both the exact law of affine-drift/constant-diffusion models and the law of
/// their Euler schemes have this form.
class AffineGaussianKernel {
 public:
  AffineGaussianKernel(Matrix gain, Vector offset, Matrix cov);

  int dim() const { return static_cast<int>(offset_.size()); }
  const Matrix& gain() const { return gain_; }
  const Vector& offset() const { return offset_; }
  const Matrix& cov() const { return cov_; }

  GaussianLaw law(const Vector& x) const;
  double density(const Vector& x, const Vector& y) const;
  /// ∂_x^alpha ∂_y^beta p(x, y).
  double derivative(const Multiindex& alpha, const Multiindex& beta, const Vector& x, const Vector& y) const;
  /// Grid for z ↦ p(x, z).
  QuadFrame forward_frame(const Vector& x) const;
  /// Grid for z ↦ p(z, y); requires an invertible gain.
  QuadFrame backward_frame(const Vector& y) const;

 private:
  Matrix gain_;
  Vector offset_;
  Matrix cov_;
  Matrix chol_;      // cov = chol * chol^T
  Matrix chol_inv_;  // chol^{-1}
  double log_norm_;  // -log((2π)^{d/2} det chol)
};

/// ∂^kappa of the standard d-dimensional normal density at w, via products of
/// Hermite polynomials.
double std_normal_derivative(const Multiindex& kappa, const Vector& w);

}  // namespace weaklab
