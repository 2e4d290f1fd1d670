#pragma once

#include <cstdint>

namespace mq {

// Deterministic stream used for every random draw in the project: datasets,
// weight init, shuffles. splitmix64 for the integer stream; uniforms take
// the top 53 bits into [0,1); normals come from Box-Muller pairs. Identical
// seed gives an identical byte-for-byte value stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1), 53-bit resolution.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal. Draws two uniforms per pair; the sin partner is
  // cached, so parity matters for stream reproducibility.
  double next_normal();

  // Uniform integer in [0, bound). Rejection-free modulo is fine here:
  // bounds are tiny (shuffles, subsets) against a 64-bit stream.
  std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

  // Independent child stream. The derivation is part of the data format:
  // re-deriving with the same (seed, tag) must give the same stream.
  Rng derive(std::uint64_t tag) const;

 private:
  std::uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace mq
