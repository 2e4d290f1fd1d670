#include "mq/rng.hpp"

#include <cmath>

namespace mq {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double Rng::next_normal() {
  if (have_cached_) {
    have_cached_ = false;
    return cached_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  // log1p(-u1) keeps the argument in (0,1] even when u1 == 0.
  const double r = std::sqrt(-2.0 * std::log1p(-u1));
  cached_ = r * std::sin(kTwoPi * u2);
  have_cached_ = true;
  return r * std::cos(kTwoPi * u2);
}

Rng Rng::derive(std::uint64_t tag) const {
  return Rng(mix64(state_ ^ (0xD2B74407B1CE6E93ULL * (tag + 1))));
}

}  // namespace mq
