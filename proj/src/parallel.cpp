#include "gpo/parallel.hpp"
#include "gpo/common.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace gpo {

const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::Argument: return "argument error";
  case ErrorKind::Io: return "I/O error";
  case ErrorKind::Format: return "format error";
  case ErrorKind::DegenerateInput: return "degenerate input";
  case ErrorKind::NoConsensus: return "no consensus";
  case ErrorKind::DegeneratePoint: return "degenerate point";
  case ErrorKind::Consistency: return "consistency error";
  case ErrorKind::Numerical: return "numerical failure";
  case ErrorKind::Usage: return "usage error";
  case ErrorKind::Generation: return "generation error";
  }
  return "error";
}

namespace {

std::size_t default_workers() {
  if (const char *env = std::getenv("GPO_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception &) {
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

std::atomic<std::size_t> &worker_setting() {
  static std::atomic<std::size_t> n{default_workers()};
  return n;
}

} // namespace

std::size_t worker_count() { return worker_setting().load(); }

void set_worker_count(std::size_t n) { worker_setting().store(std::max<std::size_t>(1, n)); }

void parallel_rows(std::size_t rows, std::size_t workers,
                   const std::function<void(std::size_t, std::size_t, std::size_t)> &fn) {
  workers = std::max<std::size_t>(1, workers);
  if (workers == 1 || rows < 2) {
    // Still honour the partition so worker-indexed buffers line up.
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t b = rows * w / workers;
      const std::size_t e = rows * (w + 1) / workers;
      fn(w, b, e);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        fn(w, rows * w / workers, rows * (w + 1) / workers);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  try {
    fn(0, 0, rows / workers);
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto &t : pool) t.join();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace gpo
