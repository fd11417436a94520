#include "weaklab/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace weaklab {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> block(const RngStream& s, std::uint64_t pair_index) {
  std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(s.stream_id),
                                   static_cast<std::uint32_t>(s.stream_id >> 32),
                                   static_cast<std::uint32_t>(pair_index),
                                   static_cast<std::uint32_t>(pair_index >> 32)};
  std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(s.seed),
                                   static_cast<std::uint32_t>(s.seed >> 32)};
  return philox4x32_10(ctr, key);
}

inline std::uint64_t word(const std::array<std::uint32_t, 4>& b, std::uint64_t half) {
  return half == 0 ? (static_cast<std::uint64_t>(b[1]) << 32) | b[0]
                   : (static_cast<std::uint64_t>(b[3]) << 32) | b[2];
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

double normal_quantile(double p) {
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double RngStream::uniform(std::uint64_t index) const {
  return bits_to_uniform(word(block(*this, index >> 1), index & 1u));
}

double RngStream::normal(std::uint64_t index) const { return normal_quantile(uniform(index)); }

void RngStream::normals(std::uint64_t first, std::span<double> out) const {
  std::size_t j = 0;
  std::uint64_t index = first;
  while (j < out.size()) {
    const auto b = block(*this, index >> 1);
    for (std::uint64_t half = index & 1u; half < 2 && j < out.size(); ++half, ++index, ++j) {
      out[j] = normal_quantile(bits_to_uniform(word(b, half)));
    }
  }
}

}  // namespace weaklab
