#pragma once

#include <cstdint>
#include <vector>

namespace fanet {

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** seeded through splitmix64. Every stochastic choice in the
/// project (init, scene generation, shuffling, crops) draws from this
/// generator so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  /// Independent stream for (seed, stream) pairs, e.g. (dataset seed, sample index).
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);
  /// Standard normal via Box-Muller (one value per call).
  double normal();
  /// Normal(0, std) truncated to [-2 std, 2 std] by rejection.
  double trunc_normal(double std);

  /// Fisher-Yates permutation of [0, n).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t s_[4];
};

}  // namespace fanet
