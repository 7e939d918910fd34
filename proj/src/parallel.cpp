#include "pclnet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace pclnet {
namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) { g_threads = std::max(1, threads); }

int thread_count() { return g_threads; }

void parallel_chunks(std::size_t n, std::size_t grain,
                     const std::function<void(std::size_t, std::size_t,
                                              std::size_t)>& body) {
  if (n == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  const std::size_t chunks = chunk_count(n, grain);
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), chunks);

  auto run = [&](std::size_t c) {
    const std::size_t begin = c * grain;
    body(c, begin, std::min(n, begin + grain));
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (std::size_t c = next++; c < chunks; c = next++) {
        try {
          run(c);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace pclnet
