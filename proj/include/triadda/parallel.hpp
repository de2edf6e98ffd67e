#pragma once

#include <cstdint>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace triadda {

// Worker count for particle loops.  0 means "use the OpenMP default".
int num_threads();
void set_num_threads(int n);

// Particle loops run over a fixed partition into blocks of kBlockSize.  All
// per-particle state (including RNG streams) is independent, and reductions
// write per-block partials, so results do not depend on how blocks are
// scheduled across threads.
inline constexpr std::int64_t kBlockSize = 2048;

inline std::int64_t num_blocks(std::int64_t n) {
  return (n + kBlockSize - 1) / kBlockSize;
}

template <class Fn>
void for_each_block(std::int64_t n, Fn&& fn) {
  const std::int64_t nb = num_blocks(n);
#ifdef _OPENMP
  const int requested = num_threads();
#pragma omp parallel for schedule(static) num_threads(requested > 0 ? requested : omp_get_max_threads())
#endif
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::int64_t lo = b * kBlockSize;
    const std::int64_t hi = std::min<std::int64_t>(lo + kBlockSize, n);
    fn(b, lo, hi);
  }
}

// Combine per-block partial sums (nblocks rows of `width` doubles) with a
// fixed pairwise tree so the summation order never varies.
void pairwise_combine(const double* partials, std::int64_t nblocks, int width,
                      double* out);

}  // namespace triadda
