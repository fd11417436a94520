#pragma once

#include "weaklab/euler.hpp"
#include "weaklab/models.hpp"
#include "weaklab/parallel.hpp"
#include "weaklab/test_function.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace weaklab {

/// Sample mean of f(X_t^{n,x}) over N paths.
Estimate estimate_expectation(const SdeModel& model, const TestFunction& f, const Vector& x, int n, double t,
                              std::uint64_t n_samples, const RngStream& rng);
/// Sample mean of 2 f(X^{2n}) - f(X^n) over N coupled pairs.
Estimate romberg_estimate(const SdeModel& model, const TestFunction& f, const Vector& x, int n, double t,
                          std::uint64_t n_samples, const RngStream& rng);

/// Weights w with value ≈ Σ w_i v_i that cancel the 1/n, ..., 1/n^{j-1} terms
/// using the last j entries of a geometric ladder (zero weight elsewhere).
std::vector<double> richardson_weights(const std::vector<int>& ladder, int j);
/// Neville elimination over the last j values; j = 1 returns the last value.
double richardson_table(const std::vector<std::pair<int, double>>& values, int j);

struct RatePoint {
  int n = 0;
  double error = 0.0;
  double ci_halfwidth = 0.0;
};

struct RateFit {
  std::vector<RatePoint> points;  // all input points
  std::vector<int> used;          // n values that passed the noise gate
  std::vector<int> excluded;      // n values dropped as noise-dominated
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Weighted least squares of log|error| on log n, keeping points with
/// |error| > noise_factor * CI. Weights are (|error| / CI)^2 (delta method);
/// if any kept CI is zero the fit is unweighted. Throws InsufficientSignal with
/// fewer than min_points kept points.
RateFit fit_rate(const std::vector<RatePoint>& measurements, double noise_factor = 3.0, int min_points = 4);

/// E[X_t^{n,x}] for GBM (closed form of the Euler mean recursion).
double gbm_euler_mean(double mu, double x, int n, double t);

/// How E f(X_t^x) enters a bias measurement.
enum class BiasReference {
  Auto,           // exact coupling, else known truth, else Romberg reference
  ExactCoupling,  // per-path f(X^n) - f(X^exact) on shared normals
  Truth,          // f(X^n) minus a closed-form or quadrature value
  Romberg,        // per-path f(X^n) - (2 f(X^{2 n_ref}) - f(X^{n_ref}))
};

struct BiasOptions {
  BiasReference reference = BiasReference::Auto;
  std::optional<double> truth;  // closed-form E f(X_t^x); otherwise quadrature when available
  std::string truth_name = "closed-form";
  int n_ref = 0;  // Romberg reference level; 0 means 16 x the largest ladder level
  bool romberg = false;  // measure 2 f(X^{2n}) - f(X^n) instead of f(X^n)
};

struct BiasPoint {
  int n = 0;
  Estimate estimate;  // E f(X^n) (or its Romberg combination)
  Estimate bias;      // estimate minus reference, with its own standard error
};

struct BiasLadder {
  std::vector<BiasPoint> points;
  BiasReference reference = BiasReference::Truth;
  std::string oracle;
  std::optional<double> truth;  // E f(X_t^x) when known
  int n_ref = 0;

  std::vector<RatePoint> rate_points() const;
};

BiasReference resolve_reference(const SdeModel& model, const BiasOptions& opt);

BiasLadder bias_ladder(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                       const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                       const BiasOptions& opt = {});

/// Limit of n (E f(X^n) - E f(X)) by Richardson extrapolation (order j) over
/// the ladder; the standard error accounts for the path-level correlation.
struct LimitEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> scaled;  // n * bias per level
  std::string oracle;
  double ci_halfwidth() const { return 1.96 * std_error; }
};
LimitEstimate bias_times_n_limit(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                                 const std::vector<int>& ladder, std::uint64_t n_samples, const RngStream& rng,
                                 int order = 2, const BiasOptions& opt = {});

/// Samples per point so that the 95% CI is at most |predicted bias| / 5,
/// from a pilot standard deviation; capped at `cap`.
std::uint64_t samples_for_bias(double pilot_sd, double predicted_bias, std::uint64_t cap);

/// Pilot run followed by the CI gate: the largest N over the ladder. The
/// predicted bias at level n is c / n^k (k = 2 for Romberg), with c given or
/// taken from the pilot bias at the smallest level.
std::uint64_t gated_sample_count(const SdeModel& model, const TestFunction& f, const Vector& x, double t,
                                 const std::vector<int>& ladder, const RngStream& rng, const BiasOptions& opt,
                                 std::uint64_t cap, std::optional<double> coefficient = std::nullopt,
                                 std::uint64_t pilot = 10000);

}  // namespace weaklab
