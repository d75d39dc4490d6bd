#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace bornsim {

// Splits [0, n) into fixed-size blocks and evaluates fn(begin, end) -> Partial
// for every block on up to `workers` threads. The result vector is in block
// order and the block layout ignores the worker count, so folding it
// front-to-back gives bit-identical totals for any number of workers.
template <typename Partial, typename Fn>
std::vector<Partial> map_blocks(std::size_t n, std::size_t block_size, unsigned workers, Fn&& fn) {
  block_size = std::max<std::size_t>(block_size, 1);
  const std::size_t n_blocks = (n + block_size - 1) / block_size;
  std::vector<Partial> partials(n_blocks);
  if (n_blocks == 0) return partials;

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto drain = [&] {
    for (std::size_t b = next++; b < n_blocks; b = next++) {
      try {
        const std::size_t begin = b * block_size;
        partials[b] = fn(begin, std::min(n, begin + block_size));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(std::max(workers, 1u), n_blocks));
  if (n_threads == 1) {
    drain();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads - 1);
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(drain);
    drain();
  }
  if (failure) std::rethrow_exception(failure);
  return partials;
}

}  // namespace bornsim
