#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace twz {

// Static block partition over [0, n). The body must write only to its own
// index slots; combined with per-index seed derivation this keeps every
// pipeline bit-identical for any jobs count.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& body) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  std::vector<std::thread> workers;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  workers.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    workers.emplace_back([&, w] {
      const std::size_t lo = n * w / nw;
      const std::size_t hi = n * (w + 1) / nw;
      try {
        for (std::size_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace twz
