#pragma once

#include <srt/errors.hpp>
#include <srt/numerics.hpp>

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace srt {

/// Sample indices of one mini-batch S_k and the iteration k it belongs to.
struct BatchIndexSet {
  std::vector<std::size_t> indices;
  std::uint64_t iteration = 0;
};

/// One epoch of sampling without replacement: a Fisher-Yates shuffle of 0..n-1
/// cut into ceil(n/m) consecutive batches. Every batch has m indices except
/// possibly the last.
inline std::vector<BatchIndexSet> epoch_batches(std::size_t n, std::size_t m, Rng& rng,
                                                std::uint64_t first_iteration = 0) {
  if (m < 1) throw ParameterError("epoch_batches: batch size must be >= 1");
  if (m > n) {
    throw ParameterError("epoch_batches: batch size " + std::to_string(m) + " exceeds sample count " +
                         std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.uniform_index(i + 1)]);
  }
  std::vector<BatchIndexSet> batches;
  batches.reserve((n + m - 1) / m);
  for (std::size_t start = 0; start < n; start += m) {
    const std::size_t stop = std::min(n, start + m);
    batches.push_back({std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(start),
                                                order.begin() + static_cast<std::ptrdiff_t>(stop)),
                       first_iteration + batches.size()});
  }
  return batches;
}

inline std::size_t batches_per_epoch(std::size_t n, std::size_t m) { return (n + m - 1) / m; }

}  // namespace srt
