#pragma once

#include <cstddef>
#include <functional>

namespace polopt {

// Worker count: POLOPT_THREADS if set, else the hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n) over up to `workers` threads. Results must not
// depend on scheduling; callers give each index its own RNG substream.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int workers = 0);

}  // namespace polopt
