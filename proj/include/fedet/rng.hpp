#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace fedet {

/// Deterministic pseudo-random stream (xoshiro256++ seeded via splitmix64).
/// All distributions are implemented in-house so that runs replay
/// bit-identically regardless of standard-library vendor. Streams are
/// derived from a root seed plus a purpose tag and indices, which makes
/// every consumer (client k in round t, partition attempt a, ...) own an
/// independent stream whose output does not depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream keyed by (seed, tag, a, b).
  static Rng substream(std::uint64_t seed, std::string_view tag,
                       std::uint64_t a = 0, std::uint64_t b = 0);

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double next_double();

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via Box-Muller (two uniforms per call, no caching).
  double normal();
  double normal(double mean, double stddev);

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape);

  /// Dirichlet with symmetric concentration over k components.
  std::vector<double> dirichlet_symmetric(double alpha, std::size_t k);

  /// Random k-permutation prefix: first `take` entries of a Fisher-Yates
  /// shuffle of [0, n).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t take);

 private:
  std::uint64_t state_[4];
};

}  // namespace fedet
