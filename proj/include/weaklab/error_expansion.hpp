#pragma once

#include "weaklab/models.hpp"
#include "weaklab/quadrature.hpp"
#include "weaklab/test_function.hpp"

#include <functional>
#include <map>
#include <utility>
#include <vector>

namespace weaklab {

/// Coefficients of the principal error operator at one point:
///   -L2* = Σ c1_i ∂_i + Σ c2_ij ∂_ij + Σ c3_ijk ∂_ijk   (ordered indices)
/// and the same operator collected by multiindex, L2* = Σ g_γ ∂^γ.
struct L2StarCoefficients {
  Vector c1;
  Matrix c2;
  std::vector<Matrix> c3;  // c3[k](i, j)
  std::map<Multiindex, double> g;
};

L2StarCoefficients l2star_coefficients(const SdeModel& model, const Vector& z);

/// ∂^γ g(z) for |γ| <= 3.
using DerivativeOracle = std::function<double(const Multiindex& gamma, const Vector& z)>;

/// (L2* g)(z).
double apply_L2star(const SdeModel& model, const DerivativeOracle& g, const Vector& z);

struct PiEvaluation {
  double value = 0.0;
  double quad_error = 0.0;
  bool converged = true;
  double t = 0.0;
  Vector x, y;
  Multiindex alpha, beta;
};

struct PrincipalOptions {
  double tol = 1e-9;      // time integration (relative) and kernel-route y integration
  double split = 0.5;     // s <= split * t uses the direct form, s > split * t the integrated-by-parts form
  int max_depth = 12;     // adaptive bisection depth for the time integral
  QuadOptions quad;       // inner Gauss–Hermite integrals
};

/// ∂_x^alpha ∂_y^beta π(t, x, y).
PiEvaluation principal_density_pi(const SdeModel& model, double t, const Vector& x, const Vector& y,
                                  const Multiindex& alpha, const Multiindex& beta, const PrincipalOptions& opt = {});

enum class CtRoute {
  Auto,      // Kernel for 1-D targets with kinks, Operator otherwise
  Operator,  // ½ ∫ P_s L2* P_{t-s} f ds
  Kernel,    // ∫ f(y) π(t, x, y) dy (1-D)
};

/// ∂_x^alpha C_t f(x). For Dirac kinds this is the pairing ⟨S, π(t, x, ·)⟩,
/// i.e. (-1)^{|β|} ∂_y^β π(t, x, y).
PiEvaluation principal_term_Ct(const SdeModel& model, const TestFunction& f, double t, const Vector& x,
                               const PrincipalOptions& opt = {}, CtRoute route = CtRoute::Auto,
                               const Multiindex& alpha = {});

/// ∂_x^alpha ∂_y^beta (p_n - p)(t, x, y) for affine-drift, constant-diffusion models.
double density_error_exact(const SdeModel& model, int n, double t, const Vector& x, const Vector& y,
                           const Multiindex& alpha, const Multiindex& beta);

/// (⟨S, p_n(t, x, ·)⟩, ⟨S, p(t, x, ·)⟩) for affine-drift, constant-diffusion models.
/// ⟨∂^β δ_y, φ⟩ = (-1)^{|β|} ∂^β φ(y).
std::pair<double, double> distribution_pairing(const SdeModel& model, const TestFunction& S, int n, double t,
                                               const Vector& x);

/// |k| <= c1 t^{-(order + d + l)/2} exp(-c2 ‖x - y‖² / t), order = |α| + |β|.
struct TailBoundSpec {
  int l = 0;
  double c1 = 1.0;
  double c2 = 0.5;
};

struct TailProbe {
  double t = 1.0;
  Vector x, y;
};

struct TailReport {
  double max_violation_ratio = 0.0;
  TailProbe worst;
  std::size_t probes = 0;
};

using TailKernel = std::function<double(double t, const Vector& x, const Vector& y)>;

double tail_envelope(const TailBoundSpec& spec, int dim, int order, const TailProbe& p);
TailReport check_tail_bound(const TailKernel& kernel, const TailBoundSpec& spec, const std::vector<TailProbe>& grid,
                            int order = 0);

/// Picks c2 from `c2_candidates` and sets c1 = 1.05 x the largest ratio on the
/// fit grid; the candidate with the smallest worst ratio on the validation
/// grid wins.
TailBoundSpec fit_tail_bound(const TailKernel& kernel, int l, const std::vector<TailProbe>& fit_grid,
                             const std::vector<TailProbe>& validation_grid, const std::vector<double>& c2_candidates,
                             int order = 0);

/// Grid value of N_q(k) = max over |a|, |b| <= q of |y^a ∂^b k(y)|.
double seminorm_Nq(const DerivativeOracle& kernel, int dim, int q, const std::vector<Vector>& grid);

}  // namespace weaklab
