#include "ocan/rng.hpp"

#include <limits>

#include "ocan/errors.hpp"

namespace ocan {

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw ArgumentError("SeededRng::below: n must be positive");
  // Rejection keeps the distribution exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

std::int64_t SeededRng::between(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw ArgumentError("SeededRng::between: empty range");
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<std::int64_t>(below(span));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined word.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SeededRng SeededRng::derive(std::uint64_t stream) const { return SeededRng(mix_seed(seed_, stream)); }

Tensor sample_noise(SeededRng& rng, Index batch, Index dim) {
  if (batch <= 0 || dim <= 0) {
    throw ArgumentError("sample_noise: batch and dim must be positive, got " +
                        shape_str(batch, dim));
  }
  Tensor z(batch, dim);
  for (double& v : z.data()) v = rng.uniform(-1.0, 1.0);
  return z;
}

}  // namespace ocan
