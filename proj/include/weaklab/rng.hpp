#pragma once

#include <array>
#include <cstdint>
#include <span>

namespace weaklab {

/// Philox-4x32-10 block function (Salmon et al.). Pure function of counter and key.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

/// Standard normal quantile.
double normal_quantile(double p);

/// Open-interval uniform from 53 high bits.
inline double bits_to_uniform(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Counter-based stream: the i-th normal of stream (seed, stream_id) is a pure
/// function of (seed, stream_id, i). Callers index draws by
/// i = step * width + coordinate, so the same path is reproduced regardless of
/// which worker simulates it or in which order.
struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;

  double uniform(std::uint64_t index) const;
  double normal(std::uint64_t index) const;
  /// Fills out[j] = normal(first + j).
  void normals(std::uint64_t first, std::span<double> out) const;

  RngStream substream(std::uint64_t offset) const { return {seed, stream_id + offset}; }
};

}  // namespace weaklab
