#pragma once
// OpenMP work distribution. Every parallel loop in this codebase is a pure map
// over independent output blocks: each index computes its own outputs with a
// fixed serial arithmetic order, so results are bit-identical for any thread
// count (including the serial fallback build without OpenMP).

#include <cstdint>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace molbbo {

inline int max_threads() {
#if defined(_OPENMP)
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#if defined(_OPENMP)
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

template <class F>
inline void parallel_for(std::int64_t n, F&& f) {
#if defined(_OPENMP)
  if (n > 1 && omp_get_max_threads() > 1) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) f(i);
    return;
  }
#endif
  for (std::int64_t i = 0; i < n; ++i) f(i);
}

}  // namespace molbbo
