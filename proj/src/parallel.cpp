#include "drht/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

#include "drht/error.hpp"

namespace drht {

void set_num_threads(int threads) { omp_set_num_threads(threads < 1 ? 1 : threads); }

int num_threads() { return omp_get_max_threads(); }

int configure_threads_from_env() {
  int threads = 0;
  if (const char* env = std::getenv("DRHT_THREADS"); env && *env) {
    try {
      threads = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("DRHT_THREADS must be an integer, got '") + env + "'");
    }
    if (threads < 0) throw ConfigError("DRHT_THREADS must be >= 0");
  }
  set_num_threads(threads);
  return threads;
}

}  // namespace drht
