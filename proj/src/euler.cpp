#include "weaklab/euler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace weaklab {

namespace {

void check_finite(std::span<const double> x, std::uint64_t step) {
  for (double v : x)
    if (!std::isfinite(v))
      throw SimulationBlowup(step, "Euler scheme produced a non-finite state at step " + std::to_string(step));
}

// x <- x + b(x) h + σ(x) dB, in place.
void euler_step(const SdeModel& m, std::span<double> x, double h, std::span<const double> dB, std::span<double> drift,
                std::span<double> diff) {
  const int d = m.dim_d, r = m.dim_r;
  m.drift(x, drift);
  m.diffusion(x, diff);
  for (int i = 0; i < d; ++i) {
    double v = drift[static_cast<std::size_t>(i)] * h;
    for (int k = 0; k < r; ++k) v += diff[static_cast<std::size_t>(i * r + k)] * dB[static_cast<std::size_t>(k)];
    x[static_cast<std::size_t>(i)] += v;
  }
}

void check_args(const SdeModel& m, const Vector& x, int n, double t) {
  if (n < 1) throw InvalidArgument("Euler scheme needs n >= 1");
  if (!(t > 0.0) || t > 1.0) throw InvalidArgument("terminal time must lie in (0, 1]");
  if (x.size() != m.dim_d) throw InvalidArgument("starting point has the wrong dimension");
}

}  // namespace

int grid_steps(int n, double t) {
  const double nt = n * t;
  const double full = std::floor(nt + 1e-9);
  return static_cast<int>(full) + (nt - full > 1e-9 ? 1 : 0);
}

double grid_step_length(int n, double t, int k) {
  const double start = static_cast<double>(k) / n;
  const double end = static_cast<double>(k + 1) / n;
  return end <= t * (1.0 + 1e-12) ? 1.0 / n : t - start;
}

BrownianSlice brownian_slice(const RngStream& rng, int n, double t, int r) {
  BrownianSlice s{n, t, r, {}};
  const int steps = grid_steps(n, t);
  s.increments.resize(static_cast<std::size_t>(steps) * static_cast<std::size_t>(r));
  rng.normals(0, s.increments);
  for (int k = 0; k < steps; ++k) {
    const double sh = std::sqrt(grid_step_length(n, t, k));
    for (int c = 0; c < r; ++c) s.increments[static_cast<std::size_t>(k * r + c)] *= sh;
  }
  return s;
}

BrownianSlice coarsen(const BrownianSlice& fine, int factor) {
  if (factor < 1 || fine.n % factor != 0) throw InvalidArgument("coarsen: factor must divide the grid size");
  BrownianSlice c{fine.n / factor, fine.t, fine.r, {}};
  const int steps = grid_steps(c.n, c.t);
  c.increments.assign(static_cast<std::size_t>(steps) * static_cast<std::size_t>(c.r), 0.0);
  for (int k = 0; k < fine.steps(); ++k) {
    const int j = k / factor;
    for (int q = 0; q < c.r; ++q) c.increments[static_cast<std::size_t>(j * c.r + q)] += fine.step(k)[static_cast<std::size_t>(q)];
  }
  return c;
}

EulerEndpoint simulate_with_slice(const SdeModel& model, const Vector& x, const BrownianSlice& slice) {
  check_args(model, x, slice.n, slice.t);
  if (slice.r != model.dim_r) throw InvalidArgument("Brownian slice has the wrong dimension");
  std::vector<double> state(x.data(), x.data() + x.size());
  std::vector<double> drift(static_cast<std::size_t>(model.dim_d));
  std::vector<double> diff(static_cast<std::size_t>(model.dim_d * model.dim_r));
  for (int k = 0; k < slice.steps(); ++k) {
    euler_step(model, state, grid_step_length(slice.n, slice.t, k), slice.step(k), drift, diff);
    check_finite(state, static_cast<std::uint64_t>(k));
  }
  return EulerEndpoint{Eigen::Map<const Vector>(state.data(), model.dim_d), slice.n, slice.t, x};
}

EulerEndpoint simulate_euler(const SdeModel& model, const Vector& x, int n, double t, const RngStream& rng) {
  check_args(model, x, n, t);
  return simulate_with_slice(model, x, brownian_slice(rng, n, t, model.dim_r));
}

std::pair<EulerEndpoint, EulerEndpoint> simulate_coupled(const SdeModel& model, const Vector& x, int n, double t,
                                                         const RngStream& rng) {
  check_args(model, x, n, t);
  const BrownianSlice fine = brownian_slice(rng, 2 * n, t, model.dim_r);
  return {simulate_with_slice(model, x, coarsen(fine, 2)), simulate_with_slice(model, x, fine)};
}

LadderSimulator::LadderSimulator(const SdeModel& model, double t, std::vector<int> levels, bool exact_chain)
    : model_(model), t_(t), levels_(std::move(levels)), exact_(exact_chain) {
  if (levels_.empty()) throw InvalidArgument("ladder needs at least one level");
  if (!(t > 0.0) || t > 1.0) throw InvalidArgument("terminal time must lie in (0, 1]");
  finest_ = 0;
  for (int n : levels_) {
    if (n < 1) throw InvalidArgument("ladder levels must be positive");
    finest_ = std::max(finest_, n);
  }
  for (int n : levels_)
    if (finest_ % n != 0) throw InvalidArgument("every ladder level must divide the finest level");
  if (exact_ && !model.exact_step) throw MissingOracle("model '" + model.name + "' has no exact transition sampler");
  fine_steps_ = grid_steps(finest_, t);
  for (int n : levels_)
    if ((fine_steps_ - 1) / (finest_ / n) != grid_steps(n, t) - 1)
      throw InvalidArgument("terminal time is not compatible with the ladder grids");
  sqrt_h_.resize(static_cast<std::size_t>(fine_steps_));
  for (int k = 0; k < fine_steps_; ++k) sqrt_h_[static_cast<std::size_t>(k)] = std::sqrt(grid_step_length(finest_, t, k));
  const auto d = static_cast<std::size_t>(model.dim_d), r = static_cast<std::size_t>(model.dim_r);
  normals_.resize(static_cast<std::size_t>(fine_steps_) * r);
  state_.resize(d);
  dB_.resize(r);
  drift_.resize(d);
  diff_.resize(d * r);
  tmp_.resize(d);
}

void LadderSimulator::draw(const RngStream& path_rng) { path_rng.normals(0, normals_); }

void LadderSimulator::simulate(const Vector& x0, std::span<Vector> out) {
  const int d = model_.dim_d, r = model_.dim_r;
  if (x0.size() != d) throw InvalidArgument("starting point has the wrong dimension");
  const auto ur = static_cast<std::size_t>(r);
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const int n = levels_[l];
    const int m = finest_ / n;
    std::copy(x0.data(), x0.data() + d, state_.begin());
    std::fill(dB_.begin(), dB_.end(), 0.0);
    for (int k = 0; k < fine_steps_; ++k) {
      const double sh = sqrt_h_[static_cast<std::size_t>(k)];
      const double* z = normals_.data() + static_cast<std::size_t>(k) * ur;
      if (m == 1) {
        for (std::size_t c = 0; c < ur; ++c) dB_[c] = sh * z[c];
      } else {
        for (std::size_t c = 0; c < ur; ++c) dB_[c] += sh * z[c];
      }
      if ((k + 1) % m == 0 || k + 1 == fine_steps_) {
        const int j = k / m;
        euler_step(model_, state_, grid_step_length(n, t_, j), dB_, drift_, diff_);
        check_finite(state_, static_cast<std::uint64_t>(j));
        std::fill(dB_.begin(), dB_.end(), 0.0);
      }
    }
    out[l] = Eigen::Map<const Vector>(state_.data(), d);
  }
  if (exact_) {
    std::copy(x0.data(), x0.data() + d, state_.begin());
    for (int k = 0; k < fine_steps_; ++k) {
      const double h = grid_step_length(finest_, t_, k);
      model_.exact_step(state_, h, std::span<const double>(normals_.data() + static_cast<std::size_t>(k) * ur, ur), tmp_);
      std::copy(tmp_.begin(), tmp_.end(), state_.begin());
    }
    check_finite(state_, static_cast<std::uint64_t>(fine_steps_));
    out[levels_.size()] = Eigen::Map<const Vector>(state_.data(), d);
  }
}

std::vector<RunningStats> ladder_statistics(const SdeModel& model, const std::vector<Vector>& starts, double t,
                                            const std::vector<int>& levels, bool exact_chain,
                                            std::uint64_t n_paths, const RngStream& rng, int channels,
                                            const EndpointFunctional& fn) {
  if (starts.empty()) throw InvalidArgument("ladder_statistics needs at least one starting point");
  LadderSimulator probe(model, t, levels, exact_chain);  // validates arguments up front
  const int per_start = probe.outputs();
  return reduce_paths(n_paths, channels, [&]() -> PathKernel {
    auto sim = std::make_shared<LadderSimulator>(model, t, levels, exact_chain);
    auto ends = std::make_shared<std::vector<Vector>>(starts.size() * static_cast<std::size_t>(per_start));
    return [&, sim, ends](std::uint64_t i, std::span<double> out) {
      sim->draw(rng.substream(i));
      for (std::size_t s = 0; s < starts.size(); ++s)
        sim->simulate(starts[s], std::span<Vector>(ends->data() + s * static_cast<std::size_t>(per_start),
                                                   static_cast<std::size_t>(per_start)));
      fn(*ends, out);
    };
  });
}

AffineGaussianKernel euler_kernel_affine(const SdeModel& model, int n, double t) {
  if (!model.affine) throw InvalidArgument("model '" + model.name + "' does not have affine drift and constant diffusion");
  if (n < 1) throw InvalidArgument("Euler scheme needs n >= 1");
  const auto& [M, c0, S] = *model.affine;
  const int d = model.dim_d;
  const Matrix a = S * S.transpose();
  Matrix G = Matrix::Identity(d, d), V = Matrix::Zero(d, d);
  Vector c = Vector::Zero(d);
  for (int k = 0; k < grid_steps(n, t); ++k) {
    const double h = grid_step_length(n, t, k);
    const Matrix A = Matrix::Identity(d, d) + M * h;
    G = A * G;
    c = A * c + c0 * h;
    V = A * V * A.transpose() + a * h;
  }
  return AffineGaussianKernel(G, c, V);
}

GaussianLaw euler_exact_law_affine(const SdeModel& model, const Vector& x, int n, double t) {
  if (!model.affine) throw InvalidArgument("model '" + model.name + "' does not have affine drift and constant diffusion");
  if (n < 1) throw InvalidArgument("Euler scheme needs n >= 1");
  const auto& [M, c0, S] = *model.affine;
  const int d = model.dim_d;
  const Matrix a = S * S.transpose();
  Vector m = x;
  Matrix V = Matrix::Zero(d, d);
  for (int k = 0; k < grid_steps(n, t); ++k) {
    const double h = grid_step_length(n, t, k);
    const Matrix A = Matrix::Identity(d, d) + M * h;
    m = A * m + c0 * h;
    V = A * V * A.transpose() + a * h;
  }
  return GaussianLaw::make(m, V);
}

Estimate empirical_moment(const SdeModel& model, const Vector& x, int n, double t, int q, std::uint64_t n_samples,
                          const RngStream& rng) {
  if (q < 0 || q % 2 != 0 || q > 8) throw InvalidArgument("moment order must be even and at most 8");
  check_args(model, x, n, t);
  const auto stats = ladder_statistics(model, {x}, t, {n}, false, n_samples, rng, 1,
                                       [q](std::span<const Vector> e, std::span<double> out) {
                                         out[0] = std::pow(e[0].squaredNorm(), q / 2);
                                       });
  return Estimate::from(stats[0], n);
}

}  // namespace weaklab

namespace weaklab {

double euler_chain_expectation(const SdeModel& model, const TestFunction& f, double x, int n, double t,
                               const ChainOptions& opt) {
  if (model.dim_d != 1 || model.dim_r != 1) throw InvalidArgument("euler_chain_expectation is one-dimensional");
  if (f.is_dirac()) throw UnsupportedFunctional("'" + f.name + "' has no pointwise value");
  check_args(model, Vector::Constant(1, x), n, t);
  const auto coef = [&](double z, double& b, double& s) {
    double in = z, out;
    model.drift(std::span<const double>(&in, 1), std::span<double>(&out, 1));
    b = out;
    model.diffusion(std::span<const double>(&in, 1), std::span<double>(&out, 1));
    s = std::abs(out);
  };
  double s_max = 0.0, s_min = std::numeric_limits<double>::infinity(), b_max = 0.0;
  for (int k = -1000; k <= 1000; ++k) {
    double b, s;
    coef(x + opt.probe_radius * k / 1000.0, b, s);
    s_max = std::max(s_max, s);
    s_min = std::min(s_min, s);
    b_max = std::max(b_max, std::abs(b));
  }
  if (!(s_min > 0.0)) throw AssumptionViolation("euler_chain_expectation needs a non-degenerate diffusion");

  const int steps = grid_steps(n, t);
  const auto inner = [&](double m, double s) {
    const QuadFrame fr{Vector::Constant(1, m), Matrix::Constant(1, 1, s), false};
    IntegralResult r = f.kinks.empty() ? expect_frame(fr, f.eval) : expect_frame_kinked(fr, [&](double y) {
      return f.eval(Vector::Constant(1, y));
    }, f.kinks);
    if (!r.converged) throw QuadratureNotConverged(r.error, "last-step expectation did not converge");
    return r.value;
  };
  double b0, s0;
  coef(x, b0, s0);
  const double h0 = grid_step_length(n, t, 0);
  if (steps == 1) return inner(x + b0 * h0, s0 * std::sqrt(h0));

  // The final partial step, if any, is handled by the inner expectation.
  double h_min_prop = 1.0 / n;
  for (int k = 1; k + 1 < steps; ++k) h_min_prop = std::min(h_min_prop, grid_step_length(n, t, k));
  const double dx = opt.spacing_fraction * s_min * std::sqrt(h_min_prop);
  const double half = opt.width_sd * s_max * std::sqrt(t) + b_max * t;
  const double lo = x - half;
  const auto M = static_cast<std::size_t>(std::ceil(2.0 * half / dx)) + 1;
  std::vector<double> grid(M), p(M), next(M), mean(M), sd(M);
  for (std::size_t i = 0; i < M; ++i) grid[i] = lo + static_cast<double>(i) * dx;

  {
    const double m = x + b0 * h0, s = s0 * std::sqrt(h0);
    for (std::size_t i = 0; i < M; ++i) p[i] = normal_pdf((grid[i] - m) / s) / s;
  }
  for (int k = 1; k < steps; ++k) {
    const double h = grid_step_length(n, t, k);
    const double sh = std::sqrt(h);
    for (std::size_t i = 0; i < M; ++i) {
      double b, s;
      coef(grid[i], b, s);
      mean[i] = grid[i] + b * h;
      sd[i] = s * sh;
    }
    if (k == steps - 1) {
      CompensatedSum acc;
      for (std::size_t i = 0; i < M; ++i)
        if (p[i] > 1e-300) acc.add(dx * p[i] * inner(mean[i], sd[i]));
      return acc.value();
    }
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < M; ++i) {
      if (p[i] < 1e-300) continue;
      const double w = dx * p[i] / sd[i];
      const double reach = 9.0 * sd[i];
      const auto j0 = static_cast<std::ptrdiff_t>(std::floor((mean[i] - reach - lo) / dx));
      const auto j1 = static_cast<std::ptrdiff_t>(std::ceil((mean[i] + reach - lo) / dx));
      for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, j0); j <= std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(M) - 1, j1); ++j) {
        const double u = (grid[static_cast<std::size_t>(j)] - mean[i]) / sd[i];
        next[static_cast<std::size_t>(j)] += w * normal_pdf(u);
      }
    }
    std::swap(p, next);
  }
  return 0.0;
}

}  // namespace weaklab
