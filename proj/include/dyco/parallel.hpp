#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace dyco {

// Runs fn(shard, begin, end) over `jobs` contiguous shards of [0, n). Shard boundaries
// depend only on n and jobs; callers merge per-shard results in shard order.
template <typename Fn>
void parallel_shards(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, std::max<std::size_t>(n, 1)));
  if (jobs == 1) {
    fn(std::size_t{0}, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(jobs);
  const std::size_t chunk = (n + jobs - 1) / jobs;
  for (std::size_t j = 0; j < jobs; ++j) {
    const std::size_t b = std::min(n, j * chunk);
    const std::size_t e = std::min(n, b + chunk);
    threads.emplace_back([&, j, b, e] {
      try {
        fn(j, b, e);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace dyco
