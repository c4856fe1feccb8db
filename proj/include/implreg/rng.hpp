#pragma once

#include <cstdint>

namespace implreg {

/**
 * Counter-based SplitMix64 generator.
 *
 * The k-th raw output (k = 1, 2, ...) of a stream with key `s` is
 * mix(s + k * 0x9E3779B97F4A7C15) where mix is the SplitMix64 finalizer:
 *
 *   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
 *   z ^= z >> 27; z *= 0x94D049BB133111EB;
 *   z ^= z >> 31;
 *
 * Streams are keyed by (seed, stream) as key = mix(seed ^ mix(stream + 1)).
 * Derived variates:
 *   uniform()  = (raw >> 11) * 2^-53                       in [0, 1)
 *   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)        one pair per draw
 *   below(n)   = raw mod n after rejecting raw >= n * floor(2^64 / n)
 * The same (seed, stream) therefore yields the same numbers on any platform.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  double uniform();
  double normal();
  std::uint64_t below(std::uint64_t n);

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace implreg
