#ifndef SHRINKLAB_PARALLEL_HPP_
#define SHRINKLAB_PARALLEL_HPP_

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "shrinklab/core.hpp"

namespace shrinklab {

// A task inside a parallel batch failed; carries the failing index.
class ReplicateError : public Error {
 public:
  ReplicateError(std::size_t index, const std::string& what)
      : Error("replicate " + std::to_string(index) + ": " + what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// SHRINKLAB_THREADS if set and positive, else the hardware concurrency.
inline int default_thread_count() {
  if (const char* env = std::getenv("SHRINKLAB_THREADS")) {
    try {
      const int t = std::stoi(env);
      if (t > 0) return t;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

/// Runs body(i) for i in [0, count). Work is handed out by an atomic
/// counter; results must be written by index so the output does not depend
/// on scheduling. The failure with the smallest index is rethrown as a
/// ReplicateError.
template <class Body>
void parallel_for(std::size_t count, int threads, Body&& body) {
  if (threads <= 0) threads = default_thread_count();
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::size_t fail_index = count;
  std::string fail_what;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        body(i);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < fail_index) {
          fail_index = i;
          fail_what = e.what();
        }
        failed = true;
      }
    }
  };

  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed) throw ReplicateError(fail_index, fail_what);
}

}  // namespace shrinklab

#endif  // SHRINKLAB_PARALLEL_HPP_
