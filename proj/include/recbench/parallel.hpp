#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace recbench {

// Static-schedule parallel loop over [0, n). Each iteration must write only
// to its own slot of any shared output, which keeps results bit-identical
// for every thread count. threads <= 1 runs the plain serial loop and is
// the reference path the tests compare against.
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
#ifdef _OPENMP
    if (threads > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            fn(static_cast<std::size_t>(i));
        }
        return;
    }
#endif
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

inline int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace recbench
