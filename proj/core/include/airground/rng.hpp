#pragma once

#include <cstdint>
#include <random>

namespace airground {

/// Seeded generator with distribution helpers implemented here rather than
/// through <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Poisson sample (Knuth for small means, normal approximation above 64).
  std::int64_t poisson(double mean);

  /// Exponential with the given rate (mean 1/rate).
  double exponential(double rate);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a stream index.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace airground
