#pragma once

#include <cstddef>
#include <functional>

namespace gpo {

// Worker count used by the data-parallel passes. Reads GPO_THREADS once
// (capped by hardware concurrency when unset); set_worker_count overrides it.
std::size_t worker_count();
void set_worker_count(std::size_t n);

// Splits [0, rows) into `workers` contiguous, equally sized chunks and runs
// fn(worker_index, begin, end) for each. The partition depends only on
// (rows, workers), so per-worker partial results merged in worker order are
// reproducible for a fixed worker count.
void parallel_rows(std::size_t rows, std::size_t workers,
                   const std::function<void(std::size_t, std::size_t, std::size_t)> &fn);

inline void parallel_rows(std::size_t rows,
                          const std::function<void(std::size_t, std::size_t, std::size_t)> &fn) {
  parallel_rows(rows, worker_count(), fn);
}

} // namespace gpo
