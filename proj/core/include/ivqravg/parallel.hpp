#pragma once

#include <cstddef>
#include <functional>

namespace ivqr {

//! Worker count from IVQR_THREADS, else the hardware concurrency (at least 1).
std::size_t default_worker_count();

//! Runs body(i) for i in [0, count) on up to `workers` threads. Indices are
//! handed out dynamically; results must be written to per-index slots. The
//! exception of the lowest failing index is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& body);

} // namespace ivqr
