#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ocan/errors.hpp"
#include "ocan/rng.hpp"

namespace ocan {

// Seeded shuffle of [0, n) cut into contiguous chunks of `size`; the last
// chunk may be short.
std::vector<std::vector<std::size_t>> minibatch_indices(std::size_t n, std::size_t size,
                                                        std::uint64_t seed);

template <typename T>
std::vector<std::vector<T>> minibatches(std::span<const T> items, std::size_t size,
                                        std::uint64_t seed) {
  std::vector<std::vector<T>> out;
  for (const auto& idx : minibatch_indices(items.size(), size, seed)) {
    auto& batch = out.emplace_back();
    batch.reserve(idx.size());
    for (std::size_t i : idx) batch.push_back(items[i]);
  }
  return out;
}

}  // namespace ocan
