#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace diffpool {

/// Seeded random source. The engine is std::mt19937_64, whose output sequence
/// is fixed by the C++ standard; the real-valued transforms below are written
/// out here (rather than using std::*_distribution, whose algorithms are
/// implementation-defined) so that draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Normal(mean, stddev) via the Marsaglia polar method.
  double normal(double mean = 0.0, double stddev = 1.0);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// Independent child generator for a named sub-stream.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finaliser; used to derive well-mixed child seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace diffpool
