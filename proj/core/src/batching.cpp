#include "ocan/batching.hpp"

namespace ocan {

std::vector<std::vector<std::size_t>> minibatch_indices(std::size_t n, std::size_t size,
                                                        std::uint64_t seed) {
  if (size == 0) throw ArgumentError("minibatch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SeededRng rng(seed);
  rng.shuffle(std::span(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += size) {
    const std::size_t end = std::min(n, start + size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace ocan
