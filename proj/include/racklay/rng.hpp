#pragma once

#include <cstdint>
#include <limits>

namespace racklay {

// splitmix64 (Steele, Lea, Flood 2014). Every random draw in the project goes
// through this generator so scenes, cameras, and weight initialisation are
// reproducible from a single 64-bit seed on any platform.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t operator()() { return next(); }
  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return std::numeric_limits<std::uint64_t>::max(); }

  // Uniform double in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi <= lo) return lo;
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next() % span);
  }

  // Standard normal via Box-Muller (one value per call, no caching so the
  // stream position stays a pure function of the call count).
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

// Independent substream for (seed, stream id). Used for per-shelf and
// per-sample streams so that one shelf's draws never shift another's.
SplitMix64 substream(std::uint64_t seed, std::uint64_t stream);

}  // namespace racklay
