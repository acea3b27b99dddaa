#include "smoothtraj/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace smoothtraj {

int worker_threads() {
  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  if (const char* env = std::getenv("SMOOTHTRAJ_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1 && cap < threads) threads = cap;
    } catch (const std::exception&) {
    }
  }
  return threads < 1 ? 1 : threads;
}

}  // namespace smoothtraj
