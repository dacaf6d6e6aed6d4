#pragma once

// Data-parallel loop over independent work items. Every caller writes its
// result into a slot indexed by the item, so output order (and therefore
// every downstream reduction) is independent of the worker count.

#include <cstddef>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geoattack {

/// Worker count used when a caller passes 0.
inline int default_workers() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Serial reference loop.
template <class F>
void for_each_index_serial(std::size_t n, F&& body) {
  for (std::size_t i = 0; i < n; ++i) body(i);
}

/// OpenMP loop with dynamic scheduling. Exceptions thrown by `body` are
/// captured and the first one is rethrown after the loop.
template <class F>
void for_each_index(std::size_t n, int workers, F&& body) {
  if (workers <= 0) workers = default_workers();
  if (workers == 1 || n < 2) {
    for_each_index_serial(n, body);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (long long i = 0; i < static_cast<long long>(n); ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace geoattack
