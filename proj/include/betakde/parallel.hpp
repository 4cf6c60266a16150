#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace betakde {

//! Name of the environment variable selecting the worker count.
inline constexpr const char* workers_env = "BETAKDE_WORKERS";

//! Worker count from BETAKDE_WORKERS, or all hardware threads when unset.
inline unsigned worker_count()
{
  if (const char* env = std::getenv(workers_env)) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1)
      return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

//! Calls body(i) for i in [0, count) on contiguous blocks, one per worker.
//! Each index is processed exactly once; results must be written to
//! per-index slots so the outcome does not depend on the worker count.
//! Nested calls run serially.
template<class Body>
void parallel_for(std::size_t count, Body&& body, unsigned workers = 0)
{
  if (workers == 0)
    workers = worker_count();
  workers = static_cast<unsigned>(
    std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  if (workers <= 1 || detail::inside_parallel_region) {
    for (std::size_t i = 0; i < count; ++i)
      body(i);
    return;
  }

  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t lo = count * w / workers;
    const std::size_t hi = count * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      detail::inside_parallel_region = true;
      try {
        for (std::size_t i = lo; i < hi; ++i)
          body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure)
          failure = std::current_exception();
      }
    });
  }
  for (auto& th : pool)
    th.join();
  if (failure)
    std::rethrow_exception(failure);
}

} // namespace betakde
