#pragma once

namespace drht {

/// Reads DRHT_THREADS and applies it. 0 or unset selects the single-threaded
/// deterministic mode; n > 0 runs the kernels on n OpenMP threads.
int configure_threads_from_env();

void set_num_threads(int threads);
int num_threads();

}  // namespace drht
