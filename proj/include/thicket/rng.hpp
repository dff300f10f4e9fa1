#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace thicket {

namespace detail {

// SplitMix64 finalizer, also used as a general-purpose 64-bit mixer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace detail

/// Combine a master seed and a stream index into a fresh 64-bit seed.
/// Rows of a field, Monte Carlo trials and worker tasks each derive
/// their own stream this way, so results do not depend on the order in
/// which work is scheduled.
inline constexpr std::uint64_t derive_seed(std::uint64_t master,
                                           std::uint64_t stream) {
  return detail::mix64(master ^ detail::mix64(stream + 0x632BE59BD9B4E019ULL));
}

/// xoshiro256++ generator with self-contained distribution helpers.
///
/// Sampling deliberately avoids <random> distributions: their output is
/// implementation-defined, and the test suite pins byte-identical fields
/// and trial outcomes for a given seed. uniform() is open on both ends,
/// so exponential() is strictly positive and finite.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) {
      sm += 0x9E3779B97F4A7C15ULL;
      std::uint64_t z = sm;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      w = z ^ (z >> 31);
    }
  }

  static Rng substream(std::uint64_t master, std::uint64_t stream) {
    return Rng(derive_seed(master, stream));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result =
        detail::rotl64(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl64(state_[3], 45);
    return result;
  }

  /// Fair coin from the top bit.
  bool coin() { return (next_u64() >> 63) != 0; }

  /// Uniform double in the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Exponential with the given rate; strictly positive.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  /// Standard normal via Marsaglia's polar method (cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace thicket
