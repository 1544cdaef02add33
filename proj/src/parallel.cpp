#include "toricq/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace toricq {

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(); }

void set_thread_count(int n) {
  if (n < 1) throw std::invalid_argument("thread count must be at least 1");
  g_threads.store(n);
}

void parallel_for(std::size_t chunks, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        body(c);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(run);
    run();
  }
  if (error) std::rethrow_exception(error);
}

double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

std::vector<double> pairwise_reduce(std::vector<std::vector<double>>& parts) {
  if (parts.empty()) return {};
  for (std::size_t stride = 1; stride < parts.size(); stride *= 2)
    for (std::size_t i = 0; i + stride < parts.size(); i += 2 * stride) {
      auto& dst = parts[i];
      const auto& src = parts[i + stride];
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
  return std::move(parts[0]);
}

std::vector<double> chunked_reduce(std::size_t n, std::size_t components, std::size_t chunk,
                                   const std::function<void(std::size_t, std::size_t, double*)>& body) {
  if (chunk == 0) throw std::invalid_argument("chunk size must be positive");
  const std::size_t chunks = (n + chunk - 1) / chunk;
  if (chunks == 0) return std::vector<double>(components, 0.0);
  std::vector<std::vector<double>> parts(chunks, std::vector<double>(components, 0.0));
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    body(begin, std::min(n, begin + chunk), parts[c].data());
  });
  return pairwise_reduce(parts);
}

}  // namespace toricq
