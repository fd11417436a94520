#include "weaklab/gaussian.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <map>
#include <numbers>

namespace weaklab {

namespace {

Matrix cholesky_or_throw(const Matrix& cov, const char* what) {
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw AssumptionViolation(std::string(what) + ": covariance is not positive definite");
  return llt.matrixL();
}

using Expansion = std::map<Multiindex, double>;

// Expand prod_k (sum_l dirs[k][l] ∂_{w_l}) into {kappa: coefficient}.
Expansion expand_directions(const std::vector<Vector>& dirs, int dim) {
  Expansion cur{{Multiindex{}, 1.0}};
  for (const auto& c : dirs) {
    Expansion next;
    for (const auto& [kappa, coef] : cur) {
      for (int l = 0; l < dim; ++l) {
        if (c[l] == 0.0) continue;
        next[kappa + Multiindex::unit(l)] += coef * c[l];
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::sqrt(2.0)); }

double hermite_he(int k, double x) {
  if (k == 0) return 1.0;
  double prev = 1.0, cur = x;
  for (int j = 1; j < k; ++j) {
    const double next = x * cur - j * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

double std_normal_derivative(const Multiindex& kappa, const Vector& w) {
  double r = 1.0;
  for (int j = 0; j < w.size(); ++j) {
    const int k = kappa[j];
    r *= ((k % 2) ? -1.0 : 1.0) * hermite_he(k, w[j]) * normal_pdf(w[j]);
  }
  return r;
}

GaussianLaw GaussianLaw::make(Vector mean, Matrix cov, double tolerance) {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) throw InvalidArgument("GaussianLaw: shape mismatch");
  Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  Vector ev = eig.eigenvalues();
  bool clamped = false;
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < -tolerance * std::max(1.0, ev.cwiseAbs().maxCoeff()))
      throw AssumptionViolation("GaussianLaw: covariance has a negative eigenvalue");
    if (ev[i] < 0.0) {
      ev[i] = 0.0;
      clamped = true;
    }
  }
  if (clamped) sym = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
  return GaussianLaw{std::move(mean), std::move(sym)};
}

double GaussianLaw::pdf(const Vector& y) const {
  return AffineGaussianKernel(Matrix::Zero(dim(), dim()), mean, cov).density(Vector::Zero(dim()), y);
}

double GaussianLaw::pdf_derivative(const Multiindex& beta, const Vector& y) const {
  return AffineGaussianKernel(Matrix::Zero(dim(), dim()), mean, cov)
      .derivative(Multiindex{}, beta, Vector::Zero(dim()), y);
}

QuadFrame GaussianLaw::frame() const {
  Eigen::LLT<Matrix> llt(cov);
  Matrix L;
  if (llt.info() == Eigen::Success) {
    L = llt.matrixL();
  } else {
    // Degenerate law: fall back to a symmetric square root (lower-triangularity is
    // only used for the Jacobian, which a degenerate law never needs).
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    L = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
        eig.eigenvectors().transpose();
  }
  return QuadFrame{mean, L, false};
}

AffineGaussianKernel::AffineGaussianKernel(Matrix gain, Vector offset, Matrix cov)
    : gain_(std::move(gain)), offset_(std::move(offset)), cov_(0.5 * (cov + cov.transpose())) {
  const int d = dim();
  if (d < 1) throw InvalidArgument("AffineGaussianKernel: empty state");
  if (gain_.rows() != d || gain_.cols() != d || cov_.rows() != d || cov_.cols() != d)
    throw InvalidArgument("AffineGaussianKernel: shape mismatch");
  chol_ = cholesky_or_throw(cov_, "AffineGaussianKernel");
  chol_inv_ = chol_.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi) - chol_.diagonal().array().log().sum();
}

GaussianLaw AffineGaussianKernel::law(const Vector& x) const { return GaussianLaw{gain_ * x + offset_, cov_}; }

double AffineGaussianKernel::density(const Vector& x, const Vector& y) const {
  const Vector w = chol_inv_ * (y - gain_ * x - offset_);
  return std::exp(log_norm_ - 0.5 * w.squaredNorm());
}

double AffineGaussianKernel::derivative(const Multiindex& alpha, const Multiindex& beta, const Vector& x,
                                        const Vector& y) const {
  const int d = dim();
  if (d > kMaxDensityDim) throw InvalidArgument("density derivatives need d <= 3");
  const Vector w = chol_inv_ * (y - gain_ * x - offset_);
  const double base = std::exp(log_norm_ - 0.5 * w.squaredNorm());
  if (base == 0.0) return 0.0;
  if (d == 1) {
    const double s_inv = chol_inv_(0, 0);
    const int k = alpha[0] + beta[0];
    const double scale = std::pow(-gain_(0, 0) * s_inv, alpha[0]) * std::pow(s_inv, beta[0]);
    return scale * ((k % 2) ? -1.0 : 1.0) * hermite_he(k, w[0]) * base;
  }
  // ∂_{y_i} = sum_l Linv(l,i) ∂_{w_l};  ∂_{x_j} = -sum_l (Linv G)(l,j) ∂_{w_l}.
  const Matrix xdir = -chol_inv_ * gain_;
  std::vector<Vector> dirs;
  for (int j = 0; j < d; ++j)
    for (int m = 0; m < alpha[j]; ++m) dirs.push_back(xdir.col(j));
  for (int i = 0; i < d; ++i)
    for (int m = 0; m < beta[i]; ++m) dirs.push_back(chol_inv_.col(i));
  const Expansion terms = expand_directions(dirs, d);
  double acc = 0.0;
  for (const auto& [kappa, coef] : terms) {
    double herm = 1.0;
    for (int l = 0; l < d; ++l) herm *= ((kappa[l] % 2) ? -1.0 : 1.0) * hermite_he(kappa[l], w[l]);
    acc += coef * herm;
  }
  return acc * base;
}

QuadFrame AffineGaussianKernel::forward_frame(const Vector& x) const {
  return QuadFrame{gain_ * x + offset_, chol_, false};
}

QuadFrame AffineGaussianKernel::backward_frame(const Vector& y) const {
  Eigen::FullPivLU<Matrix> lu(gain_);
  if (!lu.isInvertible()) throw InvalidArgument("backward frame needs an invertible gain");
  const Matrix ginv = lu.inverse();
  const Matrix zcov = ginv * cov_ * ginv.transpose();
  return QuadFrame{ginv * (y - offset_), cholesky_or_throw(0.5 * (zcov + zcov.transpose()), "backward frame"), false};
}

}  // namespace weaklab
