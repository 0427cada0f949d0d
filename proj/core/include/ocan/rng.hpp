#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

#include "ocan/tensor.hpp"

namespace ocan {

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; every conversion to reals/ints below is
// done by hand so results do not depend on the standard library vendor.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Uniform integer in [lo, hi], inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  // Independent child stream; the same (seed, stream) pair always yields the
  // same child regardless of how much this generator has been consumed.
  SeededRng derive(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// batch×dim tensor with entries i.i.d. uniform on [-1, 1].
Tensor sample_noise(SeededRng& rng, Index batch, Index dim);

}  // namespace ocan
