#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace weaklab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Density-level work (quadrature over R^d) is tensorized and capped at d = 3.
inline constexpr int kMaxDensityDim = 3;

/// Multiindex alpha in N^d for d <= kMaxDensityDim; unused slots stay zero.
struct Multiindex {
  std::array<int, kMaxDensityDim> k{0, 0, 0};

  Multiindex() = default;
  Multiindex(std::initializer_list<int> init);

  static Multiindex unit(int i);
  static Multiindex scalar(int order) { return Multiindex{order}; }

  int order() const { return k[0] + k[1] + k[2]; }
  int operator[](int i) const { return k[static_cast<std::size_t>(i)]; }
  int& operator[](int i) { return k[static_cast<std::size_t>(i)]; }

  Multiindex operator+(const Multiindex& o) const;
  Multiindex operator-(const Multiindex& o) const;
  bool operator==(const Multiindex& o) const = default;
  auto operator<=>(const Multiindex& o) const = default;

  /// Componentwise kappa <= *this.
  bool dominates(const Multiindex& kappa) const;
  std::string str(int dim) const;
};

/// All multiindices in dimension `dim` with lo <= |alpha| <= hi.
std::vector<Multiindex> multiindices(int dim, int lo, int hi);

/// All kappa <= gamma componentwise.
std::vector<Multiindex> sub_multiindices(const Multiindex& gamma);

/// Product of binomial coefficients C(gamma_i, kappa_i).
double multi_binomial(const Multiindex& gamma, const Multiindex& kappa);

// Error hierarchy. Every failure mode named by a contract gets its own type so
// callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

class MissingOracle : public Error {
 public:
  using Error::Error;
};

class UnsupportedFunctional : public Error {
 public:
  using Error::Error;
};

class SimulationBlowup : public Error {
 public:
  SimulationBlowup(std::uint64_t step, const std::string& what)
      : Error(what), step_(step) {}
  std::uint64_t step() const { return step_; }

 private:
  std::uint64_t step_;
};

class QuadratureNotConverged : public Error {
 public:
  QuadratureNotConverged(double achieved, const std::string& what)
      : Error(what), achieved_(achieved) {}
  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

class InsufficientSignal : public Error {
 public:
  using Error::Error;
};

}  // namespace weaklab
