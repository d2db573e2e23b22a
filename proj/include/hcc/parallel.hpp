#pragma once

// Thin wrapper over OpenMP. Work items must be independent and write only to
// their own output slot; reductions happen sequentially afterwards, which is
// what keeps every result independent of the thread count.

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hcc {

inline void set_thread_count(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <class F>
void parallel_for(std::ptrdiff_t n, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
#else
  for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace hcc
