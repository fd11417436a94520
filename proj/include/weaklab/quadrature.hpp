#pragma once

#include "weaklab/types.hpp"

#include <cmath>
#include <functional>
#include <vector>

namespace weaklab {

/// Gauss–Hermite rule for the standard normal weight.
///   E[h(U)], U ~ N(0,1)      ~= sum_k weights[k] * h(nodes[k])
///   integral of h(u) du       ~= sum_k flat_weights[k] * h(nodes[k])
/// flat_weights = weights / phi(nodes) is computed directly (Christoffel
/// function of the Hermite functions) so it stays accurate at the outer nodes.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> flat_weights;
};

/// Cached rule with `n` nodes; thread-safe.
const HermiteRule& hermite_rule(int n);

/// Affine (optionally exponentiated) change of variables used to centre a
/// tensorized Gauss–Hermite grid on a Gaussian-like integrand:
///   v = center + scale * u,  z = log_coords ? exp(v) : v   (componentwise).
struct QuadFrame {
  Vector center;
  Matrix scale;  // lower triangular, positive diagonal
  bool log_coords = false;

  int dim() const { return static_cast<int>(center.size()); }
  Vector map(const Vector& u) const;
  /// |dz/du| at u (given z = map(u)).
  double jacobian(const Vector& z) const;
  /// Inverse map for a 1-D frame (used to locate kinks in u-space).
  double inverse_1d(double z) const;
};

struct QuadOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  int min_nodes = 32;
  int max_nodes = 256;
};

struct IntegralResult {
  double value = 0.0;
  double error = 0.0;  // node-doubling disagreement (or Kronrod estimate)
  int nodes = 0;       // per-axis node count of the accepted rule
  bool converged = true;
};

/// Integral of F(z) dz over R^d on the frame's grid, doubling the per-axis
/// node count from min_nodes until successive values agree.
IntegralResult integrate_frame(const QuadFrame& frame, const std::function<double(const Vector&)>& F,
                               const QuadOptions& opt = {});

/// E[f(z(U))] with U ~ N(0, I): the expectation under the law the frame maps.
IntegralResult expect_frame(const QuadFrame& frame, const std::function<double(const Vector&)>& f,
                            const QuadOptions& opt = {});

/// 1-D expectation for integrands with known kinks/jumps at `kinks` (z-space):
/// adaptive Gauss–Kronrod on u in [-40, 40], split at the kink preimages.
IntegralResult expect_frame_kinked(const QuadFrame& frame, const std::function<double(double)>& f,
                                   const std::vector<double>& kinks, double tol = 1e-13);

/// Integral of F(z) dz for a 1-D integrand with kinks, same splitting as above.
IntegralResult integrate_frame_kinked(const QuadFrame& frame, const std::function<double(double)>& F,
                                      const std::vector<double>& kinks, double tol = 1e-13);

/// Adaptive Gauss–Kronrod on [a, b]; rel_tol is relative to the L1 norm of f,
/// with an absolute floor abs_tol.
IntegralResult integrate_interval(const std::function<double(double)>& f, double a, double b,
                                  double rel_tol, int max_depth = 18, double abs_tol = 1e-14);

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace weaklab
