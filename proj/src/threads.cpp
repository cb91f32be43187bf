#include "sdmd/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace sdmd {

namespace {

int default_threads() {
  if (const char* env = std::getenv("SDMD_LAB_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

int& thread_count_ref() {
  static int n = default_threads();
  return n;
}

}  // namespace

int thread_count() { return thread_count_ref(); }

void set_thread_count(int n) {
  if (n < 1) throw InvalidArgument("set_thread_count: need n >= 1");
  thread_count_ref() = n;
}

void parallel_blocks(std::int64_t n, std::int64_t block_size,
                     const std::function<void(std::int64_t, std::int64_t, int)>& fn) {
  if (n <= 0) return;
  if (block_size <= 0) throw InvalidArgument("parallel_blocks: block_size must be positive");
  const int blocks = block_count(n, block_size);
  const int workers = std::min<int>(thread_count(), blocks);
  auto run_block = [&](int b) {
    const std::int64_t begin = static_cast<std::int64_t>(b) * block_size;
    const std::int64_t end = std::min<std::int64_t>(begin + block_size, n);
    fn(begin, end, b);
  };
  if (workers <= 1) {
    for (int b = 0; b < blocks; ++b) run_block(b);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      int b = next.fetch_add(1);
      if (b >= blocks) return;
      try {
        run_block(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sdmd
