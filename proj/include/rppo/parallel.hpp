#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rppo {

// Parallel loop over [0, n). body(i) may only touch state owned by index i,
// which keeps the result independent of thread count and schedule.
template <class Fn>
void parallel_for(std::size_t n, Fn&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    body(static_cast<std::size_t>(i));
  }
#else
  for (std::size_t i = 0; i < n; ++i) body(i);
#endif
}

inline constexpr std::size_t kReduceChunk = 64;

// Reduction with a fixed summation tree: partials are computed per chunk
// (serially, in index order) and folded left-to-right in chunk order. The
// result is bitwise identical for any thread count.
template <class Partial, class ChunkFn, class CombineFn>
Partial chunked_reduce(std::size_t n, Partial zero, ChunkFn&& chunk_fn, CombineFn&& combine,
                       std::size_t chunk = kReduceChunk) {
  if (n == 0) return zero;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  std::vector<Partial> partials(nchunks, zero);
  parallel_for(nchunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    partials[c] = chunk_fn(begin, end);
  });
  Partial acc = std::move(partials[0]);
  for (std::size_t c = 1; c < nchunks; ++c) acc = combine(std::move(acc), std::move(partials[c]));
  return acc;
}

// Compensated (Kahan) accumulator for order-stable scalar sums.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    const double y = x - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }

  void merge(const KahanSum& other) {
    add(other.sum);
    add(-other.carry);
  }

  double value() const { return sum; }
};

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace rppo
