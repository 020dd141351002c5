#pragma once

#include <cstdint>
#include <iterator>
#include <utility>

namespace golfsig {

/// Portable pseudorandom stream (xoshiro256** seeded through splitmix64).
///
/// Every distribution used by the project is defined here rather than taken
/// from <random>, whose distributions are implementation-defined. Equal seeds
/// give equal streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  /// Independent stream for a (seed, stream id) pair, e.g. one per swing.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    auto n = static_cast<std::uint64_t>(std::distance(first, last));
    for (std::uint64_t i = n; i > 1; --i) {
      auto j = below(i);
      using std::swap;
      swap(first[static_cast<std::ptrdiff_t>(i - 1)], first[static_cast<std::ptrdiff_t>(j)]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace golfsig
