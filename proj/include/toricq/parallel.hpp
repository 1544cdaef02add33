#pragma once

// Deterministic data parallelism: work is split into a fixed number of chunks
// independent of the thread count, and partial results are combined by a
// fixed-order pairwise tree.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace toricq {

/// Number of worker threads used by parallel_for (default 1).
int thread_count();
void set_thread_count(int n);

/// Calls body(c) for every chunk c in [0, chunks), spread over thread_count() threads.
void parallel_for(std::size_t chunks, const std::function<void(std::size_t)>& body);

/// Splits [0, n) into fixed chunks of `chunk` items, lets body(begin, end, acc)
/// accumulate `components` values per chunk, and reduces the chunk results pairwise.
std::vector<double> chunked_reduce(std::size_t n, std::size_t components, std::size_t chunk,
                                   const std::function<void(std::size_t, std::size_t, double*)>& body);

/// Pairwise sum in a fixed tree order.
double pairwise_sum(std::span<const double> values);

/// Elementwise pairwise reduction of equally sized partial vectors; consumes parts.
std::vector<double> pairwise_reduce(std::vector<std::vector<double>>& parts);

}  // namespace toricq
