// SPDX-License-Identifier: Apache-2.0
#include "fst/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace fst {

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n >= 1) omp_set_num_threads(n);
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("FST_THREADS"); env != nullptr && *env != '\0') {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1 && cap < omp_get_max_threads()) omp_set_num_threads(cap);
    } catch (const std::exception&) {
      // unparsable values leave the OpenMP default in place
    }
  }
  return omp_get_max_threads();
}

}  // namespace fst
