#include "weaklab/types.hpp"

#include <sstream>

namespace weaklab {

Multiindex::Multiindex(std::initializer_list<int> init) {
  if (init.size() > k.size()) throw InvalidArgument("multiindex longer than kMaxDensityDim");
  std::size_t i = 0;
  for (int v : init) {
    if (v < 0) throw InvalidArgument("negative multiindex entry");
    k[i++] = v;
  }
}

Multiindex Multiindex::unit(int i) {
  Multiindex m;
  m[i] = 1;
  return m;
}

Multiindex Multiindex::operator+(const Multiindex& o) const {
  Multiindex r;
  for (int i = 0; i < kMaxDensityDim; ++i) r[i] = (*this)[i] + o[i];
  return r;
}

Multiindex Multiindex::operator-(const Multiindex& o) const {
  Multiindex r;
  for (int i = 0; i < kMaxDensityDim; ++i) {
    r[i] = (*this)[i] - o[i];
    if (r[i] < 0) throw InvalidArgument("multiindex subtraction underflow");
  }
  return r;
}

bool Multiindex::dominates(const Multiindex& kappa) const {
  for (int i = 0; i < kMaxDensityDim; ++i)
    if (kappa[i] > (*this)[i]) return false;
  return true;
}

std::string Multiindex::str(int dim) const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) os << (i ? "," : "") << (*this)[i];
  os << ')';
  return os.str();
}

std::vector<Multiindex> multiindices(int dim, int lo, int hi) {
  if (dim < 1 || dim > kMaxDensityDim) throw InvalidArgument("multiindex dimension out of range");
  std::vector<Multiindex> out;
  for (int order = lo; order <= hi; ++order) {
    // Enumerate compositions of `order` into `dim` parts, lexicographically descending.
    Multiindex m;
    const auto rec = [&](auto&& self, int pos, int remaining) -> void {
      if (pos == dim - 1) {
        m[pos] = remaining;
        out.push_back(m);
        return;
      }
      for (int v = remaining; v >= 0; --v) {
        m[pos] = v;
        self(self, pos + 1, remaining - v);
      }
      m[pos] = 0;
    };
    rec(rec, 0, order);
  }
  return out;
}

std::vector<Multiindex> sub_multiindices(const Multiindex& gamma) {
  std::vector<Multiindex> out;
  for (int a = 0; a <= gamma[0]; ++a)
    for (int b = 0; b <= gamma[1]; ++b)
      for (int c = 0; c <= gamma[2]; ++c) out.push_back(Multiindex{a, b, c});
  return out;
}

double multi_binomial(const Multiindex& gamma, const Multiindex& kappa) {
  double r = 1.0;
  for (int i = 0; i < kMaxDensityDim; ++i) {
    const int n = gamma[i], k = kappa[i];
    if (k < 0 || k > n) return 0.0;
    double c = 1.0;
    for (int j = 1; j <= k; ++j) c = c * (n - k + j) / j;
    r *= c;
  }
  return r;
}

}  // namespace weaklab
