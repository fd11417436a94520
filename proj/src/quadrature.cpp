#include "weaklab/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace weaklab {

namespace {

// Orthonormal Hermite functions psi_0..psi_{n} at x (weight folded in).
void hermite_functions(int n, double x, double& psi_nm1, double& psi_n, double& sum_sq_below_n) {
  double prev = 0.0;
  double cur = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  sum_sq_below_n = 0.0;
  for (int j = 0; j < n; ++j) {
    sum_sq_below_n += cur * cur;
    const double next = std::sqrt(2.0 / (j + 1)) * x * cur - std::sqrt(static_cast<double>(j) / (j + 1)) * prev;
    prev = cur;
    cur = next;
  }
  psi_nm1 = prev;
  psi_n = cur;
}

HermiteRule build_rule(int n) {
  // Golub–Welsch for the physicists' weight exp(-x^2), then Newton polish on psi_n.
  Matrix jacobi = Matrix::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(jacobi, Eigen::EigenvaluesOnly);
  std::vector<double> x(eig.eigenvalues().data(), eig.eigenvalues().data() + n);
  std::sort(x.begin(), x.end());

  HermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  rule.flat_weights.resize(n);
  for (int k = 0; k < n; ++k) {
    double xk = x[static_cast<std::size_t>(k)];
    double pm1, pn, s;
    for (int it = 0; it < 4; ++it) {
      hermite_functions(n, xk, pm1, pn, s);
      const double dpsi = std::sqrt(2.0 * n) * pm1 - xk * pn;
      if (dpsi == 0.0) break;
      xk -= pn / dpsi;
    }
    hermite_functions(n, xk, pm1, pn, s);
    const double flat_phys = 1.0 / s;  // w_k * exp(x_k^2)
    rule.nodes[static_cast<std::size_t>(k)] = std::sqrt(2.0) * xk;
    rule.flat_weights[static_cast<std::size_t>(k)] = std::sqrt(2.0) * flat_phys;
    rule.weights[static_cast<std::size_t>(k)] = flat_phys * std::exp(-xk * xk) / std::sqrt(std::numbers::pi);
  }
  // Symmetrize to remove eigen-solver asymmetry.
  for (int k = 0; k < n / 2; ++k) {
    const auto a = static_cast<std::size_t>(k), b = static_cast<std::size_t>(n - 1 - k);
    const double node = 0.5 * (rule.nodes[b] - rule.nodes[a]);
    rule.nodes[a] = -node;
    rule.nodes[b] = node;
    rule.weights[a] = rule.weights[b] = 0.5 * (rule.weights[a] + rule.weights[b]);
    rule.flat_weights[a] = rule.flat_weights[b] = 0.5 * (rule.flat_weights[a] + rule.flat_weights[b]);
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

template <class Accumulate>
IntegralResult doubling(const QuadOptions& opt, Accumulate&& at) {
  IntegralResult res;
  bool have_prev = false;
  double prev = 0.0;
  for (int n = opt.min_nodes; n <= opt.max_nodes; n *= 2) {
    const double v = at(n);
    res.value = v;
    res.nodes = n;
    if (have_prev) {
      res.error = std::abs(v - prev);
      if (res.error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(v))) {
        res.converged = true;
        return res;
      }
    }
    have_prev = true;
    prev = v;
  }
  res.converged = false;
  return res;
}

// Sum over the tensor grid of prod(w_axis) * g(u).
template <class G>
double tensor_sum(const std::vector<double>& nodes, const std::vector<double>& w, int dim, G&& g) {
  const int n = static_cast<int>(nodes.size());
  CompensatedSum acc;
  Vector u(dim);
  std::array<int, kMaxDensityDim> idx{0, 0, 0};
  while (true) {
    double weight = 1.0;
    for (int i = 0; i < dim; ++i) {
      u[i] = nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      weight *= w[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    acc.add(weight * g(u));
    int axis = 0;
    while (axis < dim && ++idx[static_cast<std::size_t>(axis)] == n) {
      idx[static_cast<std::size_t>(axis)] = 0;
      ++axis;
    }
    if (axis == dim) break;
  }
  return acc.value();
}

}  // namespace

const HermiteRule& hermite_rule(int n) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<HermiteRule>> cache;
  if (n < 1) throw InvalidArgument("Gauss-Hermite rule needs at least one node");
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<HermiteRule>(build_rule(n));
  return *slot;
}

Vector QuadFrame::map(const Vector& u) const {
  Vector v = center + scale.triangularView<Eigen::Lower>() * u;
  if (log_coords) v = v.array().exp().matrix();
  return v;
}

double QuadFrame::jacobian(const Vector& z) const {
  double j = std::abs(scale.diagonal().prod());
  if (log_coords) j *= z.prod();
  return j;
}

double QuadFrame::inverse_1d(double z) const {
  const double v = log_coords ? (z > 0 ? std::log(z) : -1e300) : z;
  return (v - center[0]) / scale(0, 0);
}

IntegralResult integrate_frame(const QuadFrame& frame, const std::function<double(const Vector&)>& F,
                               const QuadOptions& opt) {
  const int dim = frame.dim();
  if (dim < 1 || dim > kMaxDensityDim) throw InvalidArgument("quadrature dimension must be in [1, 3]");
  return doubling(opt, [&](int n) {
    const auto& rule = hermite_rule(n);
    return tensor_sum(rule.nodes, rule.flat_weights, dim, [&](const Vector& u) {
      const Vector z = frame.map(u);
      const double v = F(z);
      return v == 0.0 ? 0.0 : v * frame.jacobian(z);
    });
  });
}

IntegralResult expect_frame(const QuadFrame& frame, const std::function<double(const Vector&)>& f,
                            const QuadOptions& opt) {
  const int dim = frame.dim();
  if (dim < 1 || dim > kMaxDensityDim) throw InvalidArgument("quadrature dimension must be in [1, 3]");
  return doubling(opt, [&](int n) {
    const auto& rule = hermite_rule(n);
    return tensor_sum(rule.nodes, rule.weights, dim, [&](const Vector& u) { return f(frame.map(u)); });
  });
}

IntegralResult integrate_interval(const std::function<double(double)>& f, double a, double b, double rel_tol,
                                  int max_depth, double abs_tol) {
  IntegralResult r;
  if (a == b) return r;
  using GK = boost::math::quadrature::gauss_kronrod<double, 21>;
  double err = 0.0, l1 = 0.0;
  GK::integrate(f, a, b, 0, rel_tol, &err, &l1);
  const double tol = l1 > 0.0 ? std::max(rel_tol, abs_tol / l1) : rel_tol;
  r.value = GK::integrate(f, a, b, static_cast<unsigned>(max_depth), tol, &err);
  r.error = err;
  r.nodes = 21;
  r.converged = err <= std::max(1e-300, 10.0 * rel_tol * std::max(1.0, std::abs(r.value)));
  return r;
}

namespace {

IntegralResult integrate_u_kinked(const QuadFrame& frame, const std::function<double(double)>& h,
                                  const std::vector<double>& kinks, double tol) {
  if (frame.dim() != 1) throw InvalidArgument("kinked integrals are one-dimensional");
  constexpr double kEdge = 40.0;
  std::vector<double> cuts{-kEdge};
  for (double k : kinks) {
    const double u = frame.inverse_1d(k);
    if (u > -kEdge && u < kEdge) cuts.push_back(u);
  }
  cuts.push_back(kEdge);
  std::sort(cuts.begin(), cuts.end());
  IntegralResult total;
  CompensatedSum acc;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    double err = 0.0;
    const double v =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(h, cuts[i], cuts[i + 1], 20u, tol, &err);
    acc.add(v);
    total.error += err;
  }
  total.value = acc.value();
  total.nodes = 31;
  total.converged = total.error <= std::max(1e-14, 100.0 * tol * std::max(1.0, std::abs(total.value)));
  return total;
}

}  // namespace

IntegralResult expect_frame_kinked(const QuadFrame& frame, const std::function<double(double)>& f,
                                   const std::vector<double>& kinks, double tol) {
  return integrate_u_kinked(
      frame,
      [&](double u) {
        const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
        if (phi == 0.0) return 0.0;
        Vector uu(1);
        uu[0] = u;
        return f(frame.map(uu)[0]) * phi;
      },
      kinks, tol);
}

IntegralResult integrate_frame_kinked(const QuadFrame& frame, const std::function<double(double)>& F,
                                      const std::vector<double>& kinks, double tol) {
  return integrate_u_kinked(
      frame,
      [&](double u) {
        Vector uu(1);
        uu[0] = u;
        const Vector z = frame.map(uu);
        const double v = F(z[0]);
        return v == 0.0 ? 0.0 : v * frame.jacobian(z);
      },
      kinks, tol);
}

}  // namespace weaklab
