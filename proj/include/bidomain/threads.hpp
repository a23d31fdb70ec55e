#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace bidomain {

/// Applies BIDOMAIN_THREADS (if set) to the OpenMP runtime once per process.
inline void configure_threads() {
#ifdef _OPENMP
  static const bool done = [] {
    if (const char* env = std::getenv("BIDOMAIN_THREADS")) {
      const int n = std::atoi(env);
      if (n > 0) omp_set_num_threads(n);
    }
    return true;
  }();
  (void)done;
#endif
}

}  // namespace bidomain
