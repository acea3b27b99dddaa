#pragma once

// Index-parallel loops. Each index writes only its own output slot, so the
// results do not depend on the thread count or the schedule; reductions are
// done afterwards in index order by the caller.

#include <cstddef>
#include <exception>
#include <vector>

namespace smoothtraj {

/// Thread cap from SMOOTHTRAJ_THREADS, else the OpenMP default. At least 1.
int worker_threads();

/// Calls body(i) for i in [0, n) across worker threads. If any call throws,
/// the exception of the lowest failing index is rethrown after the loop.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  std::vector<std::exception_ptr> errors(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic) num_threads(worker_threads())
  for (long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Serial counterpart with identical semantics, kept as the reference.
template <typename Body>
void serial_for(std::size_t n, Body&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

}  // namespace smoothtraj
