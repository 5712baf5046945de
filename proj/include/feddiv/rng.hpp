#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace feddiv {

// Seeded random source with portable sampling routines.
//
// The std distributions are implementation-defined, so uniform, integer and
// normal draws are implemented here on top of mt19937_64. The same seed yields
// the same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);
  // Standard normal draw (Marsaglia polar method; spare value cached).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent stream seed from a tuple of integers (splitmix64
// chaining). Used for per-(seed, round, client) and per-(seed, sample) streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace feddiv
