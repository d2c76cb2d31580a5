#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace confope {

// Deterministic chunked parallelism: work is split into fixed chunks that
// depend only on the problem size, each chunk's result is stored by chunk
// index, and partials are combined in index order. Results are therefore
// identical for any worker count.

inline std::size_t hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// fn(chunk_index, begin, end) fills independent state; chunks are
// [i*chunk_size, min((i+1)*chunk_size, n)).
inline void parallel_chunks(std::size_t n, std::size_t chunk_size,
                            const std::function<void(std::size_t, std::size_t,
                                                     std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk_size == 0) chunk_size = 1;
  const std::size_t num_chunks = (n + chunk_size - 1) / chunk_size;
  const std::size_t workers =
      std::min<std::size_t>(hardware_workers(), num_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < num_chunks; ++c)
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= num_chunks) return;
      fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

// Pairwise (cascade) summation over values[begin, end): bounded error and a
// fixed association order, so the result does not depend on how the values
// were produced.
inline double pairwise_sum(const double* values, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

inline double pairwise_sum(const std::vector<double>& values) {
  return pairwise_sum(values.data(), values.size());
}

}  // namespace confope
