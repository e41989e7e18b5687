#include "banditfh/parallel.hpp"

#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace banditfh {

void parallel_pieces(std::size_t pieces, int threads, const std::function<void(std::size_t)>& fn) {
  if (pieces == 0) return;
  if (threads < 1) throw std::invalid_argument("thread count must be >= 1");
  if (threads == 1 || pieces == 1) {
    for (std::size_t i = 0; i < pieces; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), pieces);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr failure;
  std::mutex mu;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      // Static stride assignment; piece results are scheduling-independent.
      for (std::size_t i = w; i < pieces; i += workers) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!failure) failure = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace banditfh
