#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "dautomap/tensor.hpp"

namespace dautomap {

/// Worker count used by batch-parallel kernels. Defaults to $DAUTOMAP_NUM_THREADS, else 1.
int num_threads();
void set_num_threads(int n);

/// Runs fn(i) for i in [0, n). Each index must write disjoint memory; results do not
/// depend on the worker count.
template <class Fn>
void parallel_for(Index n, Fn&& fn) {
    const Index workers = std::min<Index>(num_threads(), n);
    if (workers <= 1) {
        for (Index i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (Index t = 0; t < workers; ++t) {
        pool.emplace_back([&fn, t, workers, n] {
            for (Index i = t; i < n; i += workers) fn(i);
        });
    }
}

}  // namespace dautomap
