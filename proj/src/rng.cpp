#include "racklay/rng.hpp"

#include <cmath>
#include <numbers>

namespace racklay {

double SplitMix64::normal() {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SplitMix64 substream(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 mix(seed ^ (0xD1B54A32D192ED03ULL * (stream + 1)));
  // Two rounds decorrelate adjacent stream ids.
  const std::uint64_t a = mix.next();
  const std::uint64_t b = mix.next();
  return SplitMix64(a ^ (b << 1));
}

}  // namespace racklay
