#pragma once

#include <cstdint>
#include <string_view>

namespace norst {

// Counter-based stream: output k is splitmix64(key + k * golden). Streams
// are named so that, for example, coefficients and supports of one scenario
// stay reproducible independently of each other. Bit-identical on every
// platform (no std:: distributions involved).
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream);

  // Child stream, keyed by this stream's key and the name.
  Rng split(std::string_view name) const;

  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Box-Muller; caches the second deviate.
  double normal();
  // Integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  bool bernoulli(double p) { return uniform() < p; }
  double sign() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  std::uint64_t key() const noexcept { return key_; }

 private:
  explicit Rng(std::uint64_t key) : key_(key) {}
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t mix64(std::uint64_t z);

}  // namespace norst
