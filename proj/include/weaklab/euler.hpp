#pragma once

#include "weaklab/gaussian.hpp"
#include "weaklab/models.hpp"
#include "weaklab/parallel.hpp"
#include "weaklab/rng.hpp"
#include "weaklab/test_function.hpp"

#include <span>
#include <vector>

namespace weaklab {

struct EulerEndpoint {
  Vector value;
  int n = 0;
  double t = 1.0;
  Vector x0;
};

/// Step count of the grid k/n on [0, t]: floor(nt) full steps plus one partial
/// step when nt is not an integer.
int grid_steps(int n, double t);
/// Length of step k on that grid.
double grid_step_length(int n, double t, int k);

/// Brownian increments on the grid k/n up to t, stored step-major (steps x r).
struct BrownianSlice {
  int n = 0;
  double t = 1.0;
  int r = 1;
  std::vector<double> increments;

  int steps() const { return static_cast<int>(increments.size()) / r; }
  std::span<const double> step(int k) const {
    return {increments.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(r), static_cast<std::size_t>(r)};
  }
};

/// Increment k, coordinate c is sqrt(h_k) * rng.normal(k * r + c).
BrownianSlice brownian_slice(const RngStream& rng, int n, double t, int r);
/// Sums groups of `factor` adjacent increments (grid n -> n / factor).
BrownianSlice coarsen(const BrownianSlice& fine, int factor);

EulerEndpoint simulate_with_slice(const SdeModel& model, const Vector& x, const BrownianSlice& slice);
EulerEndpoint simulate_euler(const SdeModel& model, const Vector& x, int n, double t, const RngStream& rng);
/// Schemes of order n and 2n driven by one Brownian path on the finer grid.
std::pair<EulerEndpoint, EulerEndpoint> simulate_coupled(const SdeModel& model, const Vector& x, int n, double t,
                                                         const RngStream& rng);

/// Simulates several Euler levels (and optionally the exact-transition chain)
/// on one Brownian path. Each level must divide the finest. The exact chain
/// steps through the finest grid with model.exact_step, using the same
/// normals, so per-path differences against it estimate the bias with small
/// variance. One instance per worker; not thread-safe.
class LadderSimulator {
 public:
  LadderSimulator(const SdeModel& model, double t, std::vector<int> levels, bool exact_chain);

  int outputs() const { return static_cast<int>(levels_.size()) + (exact_ ? 1 : 0); }
  const std::vector<int>& levels() const { return levels_; }
  int finest() const { return finest_; }

  /// Draws the normals of one path.
  void draw(const RngStream& path_rng);
  /// Endpoints for each level in order, then the exact chain; out must have
  /// outputs() entries.
  void simulate(const Vector& x0, std::span<Vector> out);

 private:
  const SdeModel& model_;
  double t_;
  std::vector<int> levels_;
  bool exact_;
  int finest_;
  int fine_steps_;
  std::vector<double> sqrt_h_;  // per fine step
  std::vector<double> normals_;
  // scratch
  std::vector<double> state_, dB_, drift_, diff_, tmp_;
};

/// Per-path functional of the ladder endpoints.
using EndpointFunctional = std::function<void(std::span<const Vector> endpoints, std::span<double> out)>;

/// Runs n_paths ladder paths (path i uses stream rng.substream(i)) and reduces
/// the channels written by `fn`. Deterministic for any worker count.
std::vector<RunningStats> ladder_statistics(const SdeModel& model, const std::vector<Vector>& starts, double t,
                                            const std::vector<int>& levels, bool exact_chain,
                                            std::uint64_t n_paths, const RngStream& rng, int channels,
                                            const EndpointFunctional& fn);

/// Gaussian kernel of the Euler chain x -> X_t^{n,x} for affine drift and
/// constant diffusion (mean G x + c, covariance V).
AffineGaussianKernel euler_kernel_affine(const SdeModel& model, int n, double t);
GaussianLaw euler_exact_law_affine(const SdeModel& model, const Vector& x, int n, double t);

/// E f(X_t^{n,x}) for a 1-D model without sampling: the Euler chain's density
/// is propagated on a uniform grid (Gaussian one-step kernels, trapezoid rule
/// with spacing a fraction of the narrowest kernel), and the last step is
/// integrated against f directly. Intended for bounded coefficients.
struct ChainOptions {
  double width_sd = 9.0;          // half-width of the grid in units of max σ √t
  double spacing_fraction = 0.6;  // grid spacing / narrowest one-step kernel width
  double probe_radius = 10.0;     // range used to bound σ and b around x
};
double euler_chain_expectation(const SdeModel& model, const TestFunction& f, double x, int n, double t,
                               const ChainOptions& opt = {});

/// Monte Carlo estimate of E‖X_t^{n,x}‖^q for even q <= 8.
Estimate empirical_moment(const SdeModel& model, const Vector& x, int n, double t, int q, std::uint64_t n_samples,
                          const RngStream& rng);

}  // namespace weaklab
